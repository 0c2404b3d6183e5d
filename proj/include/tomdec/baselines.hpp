#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tomdec/augmented.hpp"
#include "tomdec/learner.hpp"
#include "tomdec/mdp.hpp"

namespace tomdec {

enum class BaselineKind {
  AlwaysCompliant,
  Selfish,
  MultiObjective,
  KlConstant,
  Shielded,
  FixedBlend,
  HazardSwitch,
  BehaviorClone,
};

std::string to_string(BaselineKind kind);
/// Accepts the kebab-case names used in configs ("kl-constant", ...).
BaselineKind baseline_kind_from_string(const std::string& name);

struct BaselineSpec {
  BaselineKind kind = BaselineKind::AlwaysCompliant;
  /// Penalty weight of the multi-objective baseline.
  double weight = 0.5;
  /// Constant temperature of the KL-to-reference baseline.
  double tau = 0.1;
  /// Reference weight of the fixed blend.
  double alpha = 0.5;
  /// b-hat threshold of the shield and the hazard switch.
  double threshold = 0.5;
  /// Shield projection keeps actions in the reference's top-k.
  std::size_t top_k = 1;
  /// Observed (s, a) pairs the behavior clone is fit on.
  std::size_t clone_samples = 300;
  double smoothing = 1.0;
  /// For baselines with a compliance knob (multi-objective weight,
  /// kl-constant tau, behavior-clone sample count): ignore the configured
  /// value and use the smallest one whose measured exposure stays within the
  /// learner's budget.
  bool match_budget = false;

  /// Kind name plus its main parameter, e.g. "fixed-blend(alpha=0.3)".
  std::string label() const;
  /// The knob match_budget tunes; exposure falls as it grows.
  bool has_budget_knob() const;
  void set_budget_knob(double value);
  /// Search range for the knob.
  std::pair<double, double> budget_knob_range() const;
  void validate() const;
};

/// pi_ref itself.
TabularPolicy always_compliant(const TabularPolicy& pi_ref);

/// Soft-Q on the task reward with a uniform prior and a small fixed
/// temperature; ignores monitoring.
TrainResult selfish(const TabularMdp& mdp, const TabularPolicy& pi_ref, const MonitorModel& model,
                    const LearnerConfig& config);

/// Soft-Q on R - weight * (log r + ln(pi / pi_ref)) at every step.
TrainResult multi_objective(const TabularMdp& mdp, const TabularPolicy& pi_ref,
                            const MonitorModel& model, double weight, const LearnerConfig& config);

/// Soft-Q with prior pi_ref and a constant temperature.
TrainResult kl_constant(const TabularMdp& mdp, const TabularPolicy& pi_ref,
                        const MonitorModel& model, double tau, const LearnerConfig& config);

/// Actions of pi_ref sorted by decreasing probability, ties by lower index.
std::vector<ActionId> ranked_actions(std::span<const double> ref_row);

/// One shielded row: below the threshold the task row is returned as is;
/// otherwise mass outside the reference top-k moves to the reference argmax.
std::vector<double> shield_row(std::span<const double> task_row, std::span<const double> ref_row,
                               double b_hat, double threshold, std::size_t k);

/// The shield applied at every (t, s, summary) using the summary's b-hat.
AugmentedPolicy shielded(const AugmentedPolicy& task, const TabularPolicy& pi_ref,
                         const MonitorModel& model, double threshold, std::size_t k);

/// alpha * pi_ref + (1 - alpha) * task, row by row.
AugmentedPolicy fixed_blend(const AugmentedPolicy& task, const TabularPolicy& pi_ref,
                            double alpha);

/// pi_ref's row when b_hat >= threshold, otherwise the task row.
std::span<const double> switch_row(std::span<const double> task_row,
                                   std::span<const double> ref_row, double b_hat,
                                   double threshold);
AugmentedPolicy hazard_switch(const AugmentedPolicy& task, const TabularPolicy& pi_ref,
                              const MonitorModel& model, double threshold);

/// Smoothed empirical action frequencies; states without pairs are uniform.
TabularPolicy behavior_clone(const std::vector<std::pair<StateId, ActionId>>& pairs,
                             std::size_t num_states, std::size_t num_actions, double smoothing);

/// (s, a) pairs the supervisor sees while pi_ref runs under the monitor.
std::vector<std::pair<StateId, ActionId>> sample_observed_pairs(const TabularMdp& mdp,
                                                                const TabularPolicy& pi_ref,
                                                                const MonitorModel& model,
                                                                std::size_t count,
                                                                std::uint64_t seed);

/// Builds the acting policy of a baseline. Task-policy baselines (shield,
/// blend, switch) wrap a selfish policy trained with `config`.
AugmentedPolicy build_baseline(const BaselineSpec& spec, const TabularMdp& mdp,
                               const TabularPolicy& pi_ref, const MonitorModel& model,
                               const LearnerConfig& config);

}  // namespace tomdec
