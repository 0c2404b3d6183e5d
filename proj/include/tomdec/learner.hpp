#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tomdec/augmented.hpp"
#include "tomdec/evidence.hpp"
#include "tomdec/mdp.hpp"
#include "tomdec/monitoring.hpp"

namespace tomdec {

/// Tabular critic over augmented states (t, s, summary). A critic with
/// num_steps == 1 ignores the clock.
struct CriticTable {
  std::size_t num_steps = 1;
  std::size_t num_states = 0;
  std::size_t num_summaries = 1;
  std::size_t num_actions = 0;
  std::vector<double> q;
  std::vector<double> q_target;
  double target_rate = 1.0;

  CriticTable() = default;
  CriticTable(std::size_t states, std::size_t summaries, std::size_t actions, double rate = 1.0,
              std::size_t steps = 1);

  std::size_t index(std::size_t t, StateId s, std::size_t x, ActionId a) const {
    const std::size_t tt = std::min(t, num_steps - 1);
    return ((tt * num_states + s) * num_summaries + x) * num_actions + a;
  }
  std::size_t index(StateId s, std::size_t x, ActionId a) const { return index(0, s, x, a); }
  std::span<const double> row(std::size_t t, StateId s, std::size_t x) const {
    return {q.data() + index(t, s, x, 0), num_actions};
  }
  std::span<const double> row(StateId s, std::size_t x) const { return row(0, s, x); }
  std::span<const double> target_row(std::size_t t, StateId s, std::size_t x) const {
    return {q_target.data() + index(t, s, x, 0), num_actions};
  }
};

struct DualState {
  double lambda = 1.0;
  double epsilon = 0.3;
  double step_size = 0.01;
  /// Last exposure estimate the dual saw.
  double exposure = 0.0;
};

struct LearnerConfig {
  /// Negative means "use the mdp's discount".
  double discount = -1.0;
  double critic_lr = 0.2;
  /// Initial critic value; a positive value drives optimistic exploration.
  double q_init = 0.0;
  double target_rate = 0.5;
  double lambda_init = 0.1;
  double lambda_lr = 0.001;
  double epsilon = 0.3;
  double ema_decay = 0.99;
  double tau_min = 1e-3;
  double explore_start = 0.1;
  double explore_end = 0.0;
  /// Fraction of the episodes over which exploration anneals linearly.
  double explore_fraction = 0.7;
  std::size_t episodes = 8000;
  std::size_t ratio_refresh = 10;
  /// Monte Carlo episodes per ratio refresh when the age is not exact.
  std::size_t ratio_episodes = 2000;
  std::size_t dual_every = 1;
  std::size_t belief_bins = 10;
  /// Condition the critic and actor on the clock. The evidence term is
  /// time-indexed, but the table is much sparser; off by default.
  bool time_indexed = false;
  /// The acting policy is a running average of Gibbs tables, refreshed with
  /// the ratio: weight max(1/(k+1), actor_average_min) on the k-th table.
  double actor_average_min = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

constexpr double kDefaultTauMin = 1e-3;

double temperature(const DualState& dual, double b_hat, double tau_min = kDefaultTauMin);

/// tau * ln sum_a prior(a) exp(q(a) / tau), max-shifted.
double soft_value(std::span<const double> q, std::span<const double> prior, double tau);
double soft_value(const CriticTable& critic, const TabularPolicy& pi_ref, std::size_t t,
                  StateId s, std::size_t x, double tau, bool use_target = false);

/// pi*(a) proportional to prior(a) exp(q(a) / tau).
std::vector<double> gibbs_policy(std::span<const double> q, std::span<const double> prior,
                                 double tau);
std::vector<double> gibbs_policy(const CriticTable& critic, const TabularPolicy& pi_ref,
                                 std::size_t t, StateId s, std::size_t x, double tau);

double td_target(double reward, double tau, double log_ratio, double discount,
                 double next_soft_value);

struct Transition {
  std::size_t time = 0;
  StateId state = 0;
  std::size_t summary = 0;
  ActionId action = 0;
  double reward = 0.0;
  /// Weight on the state log-ratio in the target (lambda * b_hat).
  double penalty_weight = 0.0;
  double log_ratio = 0.0;
  StateId next_state = 0;
  std::size_t next_summary = 0;
  bool terminal = false;
};

/// One TD step toward td_target using the target table for the next soft
/// value; the updated entry's target copy is then blended toward it.
void critic_update(CriticTable& critic, const TabularPolicy& prior, const Transition& tr,
                   double tau_next, double discount, double lr);

/// lambda <- max(0, lambda + eta (S_hat - epsilon)).
DualState dual_update(const DualState& dual, double exposure_ema);

/// Per-episode training record.
struct EpisodeLog {
  std::size_t episode = 0;
  double ret = 0.0;
  /// Mean psi over the episode's steps.
  double exposure = 0.0;
  double lambda = 0.0;
  double exposure_ema = 0.0;
  bool success = false;
};

/// Variants of the soft-Q trainer. The ToM learner uses the defaults; the
/// baselines switch individual pieces off.
struct TrainerMode {
  /// Condition on the monitoring summary; false trains a plain (s) table.
  bool monitor_aware = true;
  /// Prior for the soft value and Gibbs actor: pi_ref, or uniform when false.
  bool reference_prior = true;
  /// tau = lambda * b_hat with dual ascent; false uses `constant_tau`.
  bool dual_temperature = true;
  double constant_tau = 0.01;
  /// Subtract the weighted state log-ratio in the TD target (dual mode only).
  bool state_penalty = true;
  /// Reward shaping weight on log r + ln(pi/pi_ref) with b_hat fixed at 1.
  double shaping_weight = 0.0;
};

struct TrainResult {
  AugmentedPolicy policy;
  CriticTable critic;
  DualState dual;
  std::vector<EpisodeLog> log;
};

TrainResult train_soft_q(const TabularMdp& mdp, const TabularPolicy& pi_ref,
                         const MonitorModel& model, const LearnerConfig& config,
                         const TrainerMode& mode);

/// The ToM learner: dual-weighted temperature, reference prior, state penalty.
TrainResult train_online(const TabularMdp& mdp, const TabularPolicy& pi_ref, const GapLaw& law,
                         const TokenChannel& channel, const LearnerConfig& config);

/// Gibbs table from a critic at a given lambda (no exploration).
AugmentedPolicy gibbs_table(const CriticTable& critic, const TabularPolicy& prior,
                            const MonitorModel& model, const TrainerMode& mode, double lambda,
                            double tau_min);

/// Index of the largest entry; entries within `tol` of the max tie and the
/// lowest index wins.
std::size_t greedy_action(std::span<const double> q, double tol = 0.0);

}  // namespace tomdec
