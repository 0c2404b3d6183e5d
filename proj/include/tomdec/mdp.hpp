#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tomdec/random.hpp"

namespace tomdec {

using StateId = std::size_t;
using ActionId = std::size_t;

/// Thrown when a caller passes tables whose shapes do not agree.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown by KL-style sums when the reference assigns zero mass where the
/// other distribution does not.
class AbsoluteContinuityError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Finite-horizon discounted MDP with dense tables.
///
/// `transition` is row-major [state][action][next_state]; `reward` is
/// [state][action]. Goal states end an episode when entered.
struct TabularMdp {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> transition;
  std::vector<double> reward;
  double discount = 0.99;
  std::vector<double> initial;
  std::size_t horizon = 1;
  std::vector<bool> goal;

  TabularMdp() = default;
  TabularMdp(std::size_t states, std::size_t actions, std::size_t horizon_steps,
             double gamma);

  double& p(StateId s, ActionId a, StateId next) {
    return transition[(s * num_actions + a) * num_states + next];
  }
  double p(StateId s, ActionId a, StateId next) const {
    return transition[(s * num_actions + a) * num_states + next];
  }
  double& r(StateId s, ActionId a) { return reward[s * num_actions + a]; }
  double r(StateId s, ActionId a) const { return reward[s * num_actions + a]; }

  std::span<const double> row(StateId s, ActionId a) const {
    return {transition.data() + (s * num_actions + a) * num_states, num_states};
  }

  bool is_goal(StateId s) const { return !goal.empty() && goal[s]; }

  /// Nonzero successors of (s, a). Built lazily by `index_successors`.
  struct Successor {
    StateId state;
    double prob;
  };
  std::span<const Successor> successors(StateId s, ActionId a) const;

  /// Rebuilds the sparse successor cache; call after editing `transition`.
  void index_successors();

private:
  std::vector<Successor> succ_;
  std::vector<std::size_t> succ_offset_;
};

/// Per-state action distributions, row-major [state][action].
struct TabularPolicy {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> probs;
  /// Declared lower bound on every entry; 0 means no full-support claim.
  double support_floor = 0.0;

  TabularPolicy() = default;
  TabularPolicy(std::size_t states, std::size_t actions);

  static TabularPolicy uniform(std::size_t states, std::size_t actions);

  double& operator()(StateId s, ActionId a) { return probs[s * num_actions + a]; }
  double operator()(StateId s, ActionId a) const { return probs[s * num_actions + a]; }

  std::span<const double> row(StateId s) const {
    return {probs.data() + s * num_actions, num_actions};
  }
  std::span<double> row(StateId s) { return {probs.data() + s * num_actions, num_actions}; }

  bool full_support() const { return support_floor > 0.0; }
};

/// Time-indexed state marginals, one distribution per step 0..steps.
struct OccupancyProfile {
  std::vector<std::vector<double>> marginals;

  std::size_t steps() const { return marginals.empty() ? 0 : marginals.size() - 1; }
  const std::vector<double>& at(std::size_t t) const { return marginals.at(t); }
};

struct TraceStep {
  std::size_t time = 0;
  StateId state = 0;
  ActionId action = 0;
  double reward = 0.0;
  bool observed = false;
  /// Monitoring summary the agent acted on (age or belief bin); 0 when the
  /// policy ignores monitoring.
  std::size_t summary = 0;
  double b_hat = 0.0;
};

struct EpisodeTrace {
  std::vector<TraceStep> steps;
  bool success = false;
};

struct Violation {
  std::string field;
  std::string message;
};

std::vector<Violation> validate_mdp(const TabularMdp& mdp);
std::vector<Violation> validate_policy(const TabularPolicy& policy, std::size_t num_states,
                                       std::size_t num_actions);

/// Pushes `initial` forward through the policy-induced chain.
OccupancyProfile state_marginals(const TabularMdp& mdp, const TabularPolicy& policy,
                                 std::size_t steps);

/// KL(p || q) in nats with 0 ln(0/q) = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Delta(s) = KL(pi(.|s) || pi_ref(.|s)).
double action_divergence(const TabularPolicy& pi, const TabularPolicy& pi_ref, StateId state);

/// Samples one episode; the observed flag is left false (no monitor attached).
EpisodeTrace rollout(const TabularMdp& mdp, const TabularPolicy& policy, std::uint64_t seed);

double discounted_return(const EpisodeTrace& trace, double discount);

/// Draw from a discrete distribution given a uniform variate in [0,1).
std::size_t sample_index(std::span<const double> probs, double u);

}  // namespace tomdec
