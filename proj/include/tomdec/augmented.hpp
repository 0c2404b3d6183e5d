#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tomdec/mdp.hpp"
#include "tomdec/monitoring.hpp"

namespace tomdec {

/// What the agent knows about the monitor, and how that knowledge is
/// summarized into a finite index for tabular policies and critics.
///
/// With a noiseless one-step token channel the age is known exactly and the
/// summary is the age itself. Otherwise the summary is a bin of b-hat.
struct MonitorModel {
  HazardModel hazard;
  TokenChannel channel;
  std::size_t belief_bins = 10;

  static MonitorModel from_gap_law(const GapLaw& law, const TokenChannel& channel,
                                   std::size_t bins = 10);

  bool exact_age() const { return channel.reveals_age(); }
  std::size_t upper() const { return hazard.upper(); }
  std::size_t num_summaries() const { return exact_age() ? upper() + 1 : belief_bins; }

  std::size_t summarize(const LaggedBelief& belief, double b_hat) const;
  /// b-hat the summary stands for: h(k) for exact ages, bin midpoint otherwise.
  double summary_b_hat(std::size_t summary) const;
};

/// Policy over augmented states (t, s, summary), row-major [t][s][summary][a].
/// A stationary policy has num_steps == 1 and ignores t; a policy with one
/// summary ignores monitoring.
struct AugmentedPolicy {
  std::size_t num_steps = 1;
  std::size_t num_states = 0;
  std::size_t num_summaries = 1;
  std::size_t num_actions = 0;
  std::vector<double> probs;

  AugmentedPolicy() = default;
  AugmentedPolicy(std::size_t states, std::size_t summaries, std::size_t actions,
                  std::size_t steps = 1);

  /// Repeats each row of a plain policy across every summary.
  static AugmentedPolicy lift(const TabularPolicy& policy, std::size_t summaries);

  bool stationary() const { return num_steps == 1; }
  std::size_t row_index(std::size_t t, StateId s, std::size_t x) const {
    const std::size_t tt = std::min(t, num_steps - 1);
    const std::size_t xx = num_summaries == 1 ? 0 : x;
    return (tt * num_states + s) * num_summaries + xx;
  }
  std::span<const double> row(std::size_t t, StateId s, std::size_t x) const {
    return {probs.data() + row_index(t, s, x) * num_actions, num_actions};
  }
  std::span<double> row(std::size_t t, StateId s, std::size_t x) {
    return {probs.data() + row_index(t, s, x) * num_actions, num_actions};
  }
  std::span<const double> row(StateId s, std::size_t x) const { return row(0, s, x); }
  std::span<double> row(StateId s, std::size_t x) { return row(0, s, x); }

  /// Flattened view with num_steps * num_states * num_summaries rows.
  TabularPolicy flatten() const;
  static AugmentedPolicy unflatten(const TabularPolicy& flat, std::size_t summaries,
                                   std::size_t steps = 1);
};

/// Exact time-t state marginals of the joint (state, age) chain. Requires
/// an exact-age monitor model; the age chain is independent of the state.
OccupancyProfile augmented_marginals(const TabularMdp& mdp, const AugmentedPolicy& policy,
                                     const MonitorModel& model, std::size_t steps);

/// Monte Carlo state marginals for any monitor model (used when the age is
/// not exactly known and the joint chain has no finite form).
OccupancyProfile simulated_marginals(const TabularMdp& mdp, const AugmentedPolicy& policy,
                                     const MonitorModel& model, std::size_t episodes,
                                     std::uint64_t seed);

/// Marginals by whichever route the monitor model admits.
OccupancyProfile policy_marginals(const TabularMdp& mdp, const AugmentedPolicy& policy,
                                  const MonitorModel& model, std::uint64_t seed = 0);

/// Steps one episode of environment + monitor + agent-side filter.
///
/// At every tick the agent-visible quantities (state, b_hat, summary) are
/// ready before `step` is called; `observed()` is the supervisor's private
/// draw for the current tick.
class EpisodeSimulator {
public:
  EpisodeSimulator(const TabularMdp& mdp, const MonitorModel& model, Rng& rng);

  bool done() const { return done_; }
  bool success() const { return success_; }
  std::size_t time() const { return t_; }
  StateId state() const { return s_; }
  double b_hat() const { return b_hat_; }
  std::size_t summary() const { return summary_; }
  bool observed() const { return observed_; }
  std::size_t true_age() const { return age_at_draw_; }
  const LaggedBelief& belief() const { return belief_; }

  struct Step {
    double reward = 0.0;
    StateId next_state = 0;
    bool terminal = false;  // entered a goal state
    bool truncated = false;  // reached the horizon
  };
  Step step(ActionId action);

private:
  void begin_tick();

  const TabularMdp& mdp_;
  const MonitorModel& model_;
  Rng& rng_;
  MonitorState monitor_;
  LaggedBelief belief_;
  std::size_t t_ = 0;
  StateId s_ = 0;
  double b_hat_ = 0.0;
  std::size_t summary_ = 0;
  bool observed_ = false;
  std::size_t age_at_draw_ = 0;
  bool done_ = false;
  bool success_ = false;
};

}  // namespace tomdec
