#include "tomdec/augmented.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tomdec {

MonitorModel MonitorModel::from_gap_law(const GapLaw& law, const TokenChannel& channel,
                                        std::size_t bins) {
  channel.validate();
  if (bins == 0) throw std::invalid_argument("MonitorModel: belief_bins must be positive");
  return {hazard_from_gap_law(law), channel, bins};
}

std::size_t MonitorModel::summarize(const LaggedBelief& belief, double b_hat) const {
  if (exact_age()) {
    const auto age = belief.known_age();
    if (!age) throw std::logic_error("MonitorModel: exact-age channel produced a diffuse belief");
    return *age;
  }
  const auto bin = static_cast<std::size_t>(b_hat * static_cast<double>(belief_bins));
  return std::min(bin, belief_bins - 1);
}

double MonitorModel::summary_b_hat(std::size_t summary) const {
  if (exact_age()) return hazard.at(summary);
  return (static_cast<double>(summary) + 0.5) / static_cast<double>(belief_bins);
}

AugmentedPolicy::AugmentedPolicy(std::size_t states, std::size_t summaries, std::size_t actions,
                                 std::size_t steps)
    : num_steps(steps),
      num_states(states),
      num_summaries(summaries),
      num_actions(actions),
      probs(steps * states * summaries * actions, 0.0) {
  if (steps == 0) throw std::invalid_argument("AugmentedPolicy: num_steps must be positive");
}

AugmentedPolicy AugmentedPolicy::lift(const TabularPolicy& policy, std::size_t summaries) {
  AugmentedPolicy out(policy.num_states, summaries, policy.num_actions);
  for (StateId s = 0; s < policy.num_states; ++s) {
    for (std::size_t x = 0; x < summaries; ++x) {
      std::copy(policy.row(s).begin(), policy.row(s).end(), out.row(s, x).begin());
    }
  }
  return out;
}

TabularPolicy AugmentedPolicy::flatten() const {
  TabularPolicy flat(num_steps * num_states * num_summaries, num_actions);
  flat.probs = probs;
  return flat;
}

AugmentedPolicy AugmentedPolicy::unflatten(const TabularPolicy& flat, std::size_t summaries,
                                           std::size_t steps) {
  if (summaries == 0 || steps == 0 || flat.num_states % (summaries * steps) != 0) {
    throw DimensionError("AugmentedPolicy::unflatten: row count not divisible by summaries");
  }
  AugmentedPolicy out(flat.num_states / (summaries * steps), summaries, flat.num_actions, steps);
  out.probs = flat.probs;
  return out;
}

OccupancyProfile augmented_marginals(const TabularMdp& mdp, const AugmentedPolicy& policy,
                                     const MonitorModel& model, std::size_t steps) {
  if (!model.exact_age()) {
    throw std::invalid_argument("augmented_marginals: requires an exact-age monitor model");
  }
  if (policy.num_states != mdp.num_states || policy.num_actions != mdp.num_actions ||
      (policy.num_summaries != 1 && policy.num_summaries != model.num_summaries())) {
    throw DimensionError("augmented_marginals: policy shape does not match mdp/monitor");
  }
  const std::size_t ages = model.num_summaries();
  const auto& h = model.hazard.hazard;
  std::vector<double> joint(mdp.num_states * ages, 0.0);
  for (StateId s = 0; s < mdp.num_states; ++s) joint[s * ages] = mdp.initial[s];

  OccupancyProfile prof;
  prof.marginals.reserve(steps + 1);
  auto push_marginal = [&] {
    std::vector<double> m(mdp.num_states, 0.0);
    for (StateId s = 0; s < mdp.num_states; ++s) {
      for (std::size_t k = 0; k < ages; ++k) m[s] += joint[s * ages + k];
    }
    prof.marginals.push_back(std::move(m));
  };
  push_marginal();
  std::vector<double> next(joint.size());
  for (std::size_t t = 0; t < steps; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (StateId s = 0; s < mdp.num_states; ++s) {
      for (std::size_t k = 0; k < ages; ++k) {
        const double w = joint[s * ages + k];
        if (w == 0.0) continue;
        const auto row = policy.row(t, s, k);
        for (ActionId a = 0; a < mdp.num_actions; ++a) {
          const double wa = w * row[a];
          if (wa == 0.0) continue;
          for (const auto& nx : mdp.successors(s, a)) {
            const double base = wa * nx.prob;
            next[nx.state * ages] += base * h[k];
            if (k + 1 < ages) next[nx.state * ages + k + 1] += base * (1.0 - h[k]);
          }
        }
      }
    }
    joint.swap(next);
    push_marginal();
  }
  return prof;
}

OccupancyProfile simulated_marginals(const TabularMdp& mdp, const AugmentedPolicy& policy,
                                     const MonitorModel& model, std::size_t episodes,
                                     std::uint64_t seed) {
  if (episodes == 0) throw std::invalid_argument("simulated_marginals: zero episodes");
  OccupancyProfile prof;
  prof.marginals.assign(mdp.horizon + 1, std::vector<double>(mdp.num_states, 0.0));
  Rng rng(seed);
  for (std::size_t e = 0; e < episodes; ++e) {
    EpisodeSimulator sim(mdp, model, rng);
    std::size_t t = 0;
    StateId last = sim.state();
    while (!sim.done()) {
      prof.marginals[t][sim.state()] += 1.0;
      const ActionId a = sample_index(policy.row(t, sim.state(), sim.summary()), rng.uniform());
      last = sim.step(a).next_state;
      ++t;
    }
    // After termination the state stays put, matching an absorbing goal.
    for (; t <= mdp.horizon; ++t) prof.marginals[t][last] += 1.0;
  }
  for (auto& m : prof.marginals) {
    for (double& v : m) v /= static_cast<double>(episodes);
  }
  return prof;
}

OccupancyProfile policy_marginals(const TabularMdp& mdp, const AugmentedPolicy& policy,
                                  const MonitorModel& model, std::uint64_t seed) {
  if (model.exact_age()) return augmented_marginals(mdp, policy, model, mdp.horizon);
  return simulated_marginals(mdp, policy, model, 20000, seed);
}

// ---------------------------------------------------------------------------

EpisodeSimulator::EpisodeSimulator(const TabularMdp& mdp, const MonitorModel& model, Rng& rng)
    : mdp_(mdp),
      model_(model),
      rng_(rng),
      belief_(LaggedBelief::initial(model.upper(), model.channel.delay)) {
  s_ = sample_index(mdp_.initial, rng_.uniform());
  if (mdp_.is_goal(s_)) {
    done_ = true;
    success_ = true;
    return;
  }
  begin_tick();
}

void EpisodeSimulator::begin_tick() {
  MonitorTick tick = simulate_monitor(monitor_, model_.hazard, model_.channel, rng_);
  for (const auto& tok : tick.tokens_due) belief_.token_update(model_.channel, tok.value);
  observed_ = tick.observed;
  age_at_draw_ = tick.age_at_draw;
  b_hat_ = belief_.observation_probability(model_.hazard);
  summary_ = model_.summarize(belief_, b_hat_);
}

EpisodeSimulator::Step EpisodeSimulator::step(ActionId action) {
  if (done_) throw std::logic_error("EpisodeSimulator::step after episode end");
  Step out;
  out.reward = mdp_.r(s_, action);
  s_ = sample_index(mdp_.row(s_, action), rng_.uniform());
  out.next_state = s_;
  belief_.predict(model_.hazard);
  ++t_;
  if (mdp_.is_goal(s_)) {
    out.terminal = true;
    done_ = true;
    success_ = true;
  } else if (t_ >= mdp_.horizon) {
    out.truncated = true;
    done_ = true;
  } else {
    begin_tick();
  }
  return out;
}

}  // namespace tomdec
