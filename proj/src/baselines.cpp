#include "tomdec/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "tomdec/random.hpp"

namespace tomdec {

namespace {

constexpr std::array<std::pair<BaselineKind, const char*>, 8> kNames{{
    {BaselineKind::AlwaysCompliant, "always-compliant"},
    {BaselineKind::Selfish, "selfish"},
    {BaselineKind::MultiObjective, "multi-objective"},
    {BaselineKind::KlConstant, "kl-constant"},
    {BaselineKind::Shielded, "shielded"},
    {BaselineKind::FixedBlend, "fixed-blend"},
    {BaselineKind::HazardSwitch, "hazard-switch"},
    {BaselineKind::BehaviorClone, "behavior-clone"},
}};

constexpr double kSelfishTau = 0.01;

// Repeats the rows of a policy that ignores monitoring across summaries.
AugmentedPolicy expand(const AugmentedPolicy& task, std::size_t summaries) {
  if (task.num_summaries == summaries) return task;
  AugmentedPolicy out(task.num_states, summaries, task.num_actions, task.num_steps);
  for (std::size_t t = 0; t < task.num_steps; ++t) {
    for (StateId s = 0; s < task.num_states; ++s) {
      for (std::size_t x = 0; x < summaries; ++x) {
        const auto src = task.row(t, s, x);
        std::copy(src.begin(), src.end(), out.row(t, s, x).begin());
      }
    }
  }
  return out;
}

void check_shapes(const AugmentedPolicy& task, const TabularPolicy& pi_ref, const char* who) {
  if (task.num_states != pi_ref.num_states || task.num_actions != pi_ref.num_actions) {
    throw DimensionError(std::string(who) + ": task policy shape does not match reference");
  }
}

}  // namespace

std::string to_string(BaselineKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  throw std::invalid_argument("unknown baseline kind");
}

BaselineKind baseline_kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kNames) {
    if (name == n) return k;
  }
  throw std::invalid_argument("unknown baseline kind '" + name + "'");
}

std::string BaselineSpec::label() const {
  auto with = [&](const char* key, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return to_string(kind) + "(" + key + "=" + buf + ")";
  };
  switch (kind) {
    case BaselineKind::MultiObjective:
      return with("weight", weight);
    case BaselineKind::KlConstant:
      return with("tau", tau);
    case BaselineKind::Shielded:
    case BaselineKind::HazardSwitch:
      return with("threshold", threshold);
    case BaselineKind::FixedBlend:
      return with("alpha", alpha);
    case BaselineKind::BehaviorClone:
      return with("samples", static_cast<double>(clone_samples));
    default:
      return to_string(kind);
  }
}

bool BaselineSpec::has_budget_knob() const {
  return kind == BaselineKind::MultiObjective || kind == BaselineKind::KlConstant ||
         kind == BaselineKind::BehaviorClone;
}

void BaselineSpec::set_budget_knob(double value) {
  switch (kind) {
    case BaselineKind::MultiObjective:
      weight = value;
      return;
    case BaselineKind::KlConstant:
      tau = value;
      return;
    case BaselineKind::BehaviorClone:
      clone_samples = static_cast<std::size_t>(std::llround(value));
      return;
    default:
      throw std::invalid_argument("baseline " + to_string(kind) + " has no budget knob");
  }
}

std::pair<double, double> BaselineSpec::budget_knob_range() const {
  if (kind == BaselineKind::BehaviorClone) return {30.0, 1e5};
  return {1e-3, 1.0};
}

void BaselineSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw std::invalid_argument("baseline." + field + ": " + msg);
  };
  if (!(weight >= 0.0)) fail("weight", "must be >= 0");
  if (!(tau > 0.0)) fail("tau", "must be > 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha", "must be in [0, 1]");
  if (!(threshold >= 0.0 && threshold <= 1.0)) fail("threshold", "must be in [0, 1]");
  if (top_k < 1) fail("top_k", "must be >= 1");
  if (!(smoothing > 0.0)) fail("smoothing", "must be > 0");
}

TabularPolicy always_compliant(const TabularPolicy& pi_ref) { return pi_ref; }

TrainResult selfish(const TabularMdp& mdp, const TabularPolicy& pi_ref, const MonitorModel& model,
                    const LearnerConfig& config) {
  TrainerMode mode;
  mode.monitor_aware = false;
  mode.reference_prior = false;
  mode.dual_temperature = false;
  mode.constant_tau = kSelfishTau;
  return train_soft_q(mdp, pi_ref, model, config, mode);
}

TrainResult multi_objective(const TabularMdp& mdp, const TabularPolicy& pi_ref,
                            const MonitorModel& model, double weight,
                            const LearnerConfig& config) {
  if (!(weight >= 0.0)) throw std::invalid_argument("multi_objective: weight must be >= 0");
  TrainerMode mode;
  mode.monitor_aware = false;
  mode.reference_prior = false;
  mode.dual_temperature = false;
  mode.constant_tau = kSelfishTau;
  mode.shaping_weight = weight;
  return train_soft_q(mdp, pi_ref, model, config, mode);
}

TrainResult kl_constant(const TabularMdp& mdp, const TabularPolicy& pi_ref,
                        const MonitorModel& model, double tau, const LearnerConfig& config) {
  if (!(tau > 0.0)) throw std::invalid_argument("kl_constant: tau must be > 0");
  TrainerMode mode;
  mode.monitor_aware = false;
  mode.reference_prior = true;
  mode.dual_temperature = false;
  mode.constant_tau = tau;
  return train_soft_q(mdp, pi_ref, model, config, mode);
}

std::vector<ActionId> ranked_actions(std::span<const double> ref_row) {
  std::vector<ActionId> order(ref_row.size());
  std::iota(order.begin(), order.end(), ActionId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](ActionId a, ActionId b) { return ref_row[a] > ref_row[b]; });
  return order;
}

std::vector<double> shield_row(std::span<const double> task_row, std::span<const double> ref_row,
                               double b_hat, double threshold, std::size_t k) {
  std::vector<double> out(task_row.begin(), task_row.end());
  if (b_hat < threshold) return out;
  const auto order = ranked_actions(ref_row);
  std::vector<bool> keep(out.size(), false);
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) keep[order[i]] = true;
  double moved = 0.0;
  for (std::size_t a = 0; a < out.size(); ++a) {
    if (!keep[a]) {
      moved += out[a];
      out[a] = 0.0;
    }
  }
  out[order.front()] += moved;
  return out;
}

AugmentedPolicy shielded(const AugmentedPolicy& task, const TabularPolicy& pi_ref,
                         const MonitorModel& model, double threshold, std::size_t k) {
  check_shapes(task, pi_ref, "shielded");
  if (k < 1) throw std::invalid_argument("shielded: k must be >= 1");
  AugmentedPolicy out = expand(task, model.num_summaries());
  for (std::size_t t = 0; t < out.num_steps; ++t) {
    for (StateId s = 0; s < out.num_states; ++s) {
      for (std::size_t x = 0; x < out.num_summaries; ++x) {
        auto row = out.row(t, s, x);
        const auto shielded_row =
            shield_row(row, pi_ref.row(s), model.summary_b_hat(x), threshold, k);
        std::copy(shielded_row.begin(), shielded_row.end(), row.begin());
      }
    }
  }
  return out;
}

AugmentedPolicy fixed_blend(const AugmentedPolicy& task, const TabularPolicy& pi_ref,
                            double alpha) {
  check_shapes(task, pi_ref, "fixed_blend");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("fixed_blend: alpha must be in [0, 1]");
  }
  AugmentedPolicy out = task;
  for (std::size_t t = 0; t < out.num_steps; ++t) {
    for (StateId s = 0; s < out.num_states; ++s) {
      for (std::size_t x = 0; x < out.num_summaries; ++x) {
        auto row = out.row(t, s, x);
        for (ActionId a = 0; a < out.num_actions; ++a) {
          row[a] = alpha * pi_ref(s, a) + (1.0 - alpha) * row[a];
        }
      }
    }
  }
  return out;
}

std::span<const double> switch_row(std::span<const double> task_row,
                                   std::span<const double> ref_row, double b_hat,
                                   double threshold) {
  return b_hat >= threshold ? ref_row : task_row;
}

AugmentedPolicy hazard_switch(const AugmentedPolicy& task, const TabularPolicy& pi_ref,
                              const MonitorModel& model, double threshold) {
  check_shapes(task, pi_ref, "hazard_switch");
  AugmentedPolicy out = expand(task, model.num_summaries());
  for (std::size_t t = 0; t < out.num_steps; ++t) {
    for (StateId s = 0; s < out.num_states; ++s) {
      for (std::size_t x = 0; x < out.num_summaries; ++x) {
        auto row = out.row(t, s, x);
        const auto src = switch_row(row, pi_ref.row(s), model.summary_b_hat(x), threshold);
        std::copy(src.begin(), src.end(), row.begin());
      }
    }
  }
  return out;
}

TabularPolicy behavior_clone(const std::vector<std::pair<StateId, ActionId>>& pairs,
                             std::size_t num_states, std::size_t num_actions, double smoothing) {
  if (!(smoothing > 0.0)) throw std::invalid_argument("behavior_clone: smoothing must be > 0");
  std::vector<double> counts(num_states * num_actions, 0.0);
  std::vector<bool> seen(num_states, false);
  for (const auto& [s, a] : pairs) {
    if (s >= num_states || a >= num_actions) {
      throw DimensionError("behavior_clone: pair outside the state/action range");
    }
    counts[s * num_actions + a] += 1.0;
    seen[s] = true;
  }
  TabularPolicy pi = TabularPolicy::uniform(num_states, num_actions);
  for (StateId s = 0; s < num_states; ++s) {
    if (!seen[s]) continue;
    double total = 0.0;
    for (ActionId a = 0; a < num_actions; ++a) total += counts[s * num_actions + a] + smoothing;
    for (ActionId a = 0; a < num_actions; ++a) {
      pi(s, a) = (counts[s * num_actions + a] + smoothing) / total;
    }
  }
  return pi;
}

std::vector<std::pair<StateId, ActionId>> sample_observed_pairs(const TabularMdp& mdp,
                                                                const TabularPolicy& pi_ref,
                                                                const MonitorModel& model,
                                                                std::size_t count,
                                                                std::uint64_t seed) {
  std::vector<std::pair<StateId, ActionId>> pairs;
  pairs.reserve(count);
  Rng rng(derive_seed(seed, 0xbc));
  // Bounded so a monitor that never fires cannot loop forever.
  const std::size_t max_episodes = 1000 * (count + 1);
  for (std::size_t ep = 0; ep < max_episodes && pairs.size() < count; ++ep) {
    EpisodeSimulator sim(mdp, model, rng);
    while (!sim.done() && pairs.size() < count) {
      const StateId s = sim.state();
      const ActionId a = sample_index(pi_ref.row(s), rng.uniform());
      if (sim.observed()) pairs.emplace_back(s, a);
      sim.step(a);
    }
  }
  return pairs;
}

AugmentedPolicy build_baseline(const BaselineSpec& spec, const TabularMdp& mdp,
                               const TabularPolicy& pi_ref, const MonitorModel& model,
                               const LearnerConfig& config) {
  spec.validate();
  switch (spec.kind) {
    case BaselineKind::AlwaysCompliant:
      return AugmentedPolicy::lift(always_compliant(pi_ref), 1);
    case BaselineKind::Selfish:
      return selfish(mdp, pi_ref, model, config).policy;
    case BaselineKind::MultiObjective:
      return multi_objective(mdp, pi_ref, model, spec.weight, config).policy;
    case BaselineKind::KlConstant:
      return kl_constant(mdp, pi_ref, model, spec.tau, config).policy;
    case BaselineKind::Shielded:
      return shielded(selfish(mdp, pi_ref, model, config).policy, pi_ref, model, spec.threshold,
                      spec.top_k);
    case BaselineKind::FixedBlend:
      return fixed_blend(selfish(mdp, pi_ref, model, config).policy, pi_ref, spec.alpha);
    case BaselineKind::HazardSwitch:
      return hazard_switch(selfish(mdp, pi_ref, model, config).policy, pi_ref, model,
                           spec.threshold);
    case BaselineKind::BehaviorClone: {
      const auto pairs = sample_observed_pairs(mdp, pi_ref, model, spec.clone_samples,
                                               derive_seed(config.seed, 0xb1));
      return AugmentedPolicy::lift(
          behavior_clone(pairs, mdp.num_states, mdp.num_actions, spec.smoothing), 1);
    }
  }
  throw std::invalid_argument("build_baseline: unknown kind");
}

}  // namespace tomdec
