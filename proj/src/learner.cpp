#include "tomdec/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tomdec {

CriticTable::CriticTable(std::size_t states, std::size_t summaries, std::size_t actions,
                         double rate, std::size_t steps)
    : num_steps(steps),
      num_states(states),
      num_summaries(summaries),
      num_actions(actions),
      q(steps * states * summaries * actions, 0.0),
      q_target(q.size(), 0.0),
      target_rate(rate) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw std::invalid_argument("CriticTable: target rate must be in (0, 1]");
  }
  if (steps == 0) throw std::invalid_argument("CriticTable: num_steps must be positive");
}

void LearnerConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw std::invalid_argument("learner." + field + ": " + msg);
  };
  if (discount >= 1.0) fail("discount", "must be < 1 (negative selects the mdp discount)");
  if (!(critic_lr > 0.0 && critic_lr <= 1.0)) fail("critic_lr", "must be in (0, 1]");
  if (!(target_rate > 0.0 && target_rate <= 1.0)) fail("target_rate", "must be in (0, 1]");
  if (!(lambda_init >= 0.0)) fail("lambda_init", "must be >= 0");
  if (!(lambda_lr > 0.0)) fail("lambda_lr", "must be > 0");
  if (!(epsilon >= 0.0)) fail("epsilon", "must be >= 0");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) fail("ema_decay", "must be in [0, 1)");
  if (!(tau_min > 0.0)) fail("tau_min", "must be > 0");
  if (!(explore_start >= 0.0 && explore_start <= 1.0)) fail("explore_start", "must be in [0, 1]");
  if (!(explore_end >= 0.0 && explore_end <= 1.0)) fail("explore_end", "must be in [0, 1]");
  if (!(explore_fraction > 0.0 && explore_fraction <= 1.0)) {
    fail("explore_fraction", "must be in (0, 1]");
  }
  if (episodes == 0) fail("episodes", "must be positive");
  if (ratio_refresh == 0) fail("ratio_refresh", "must be positive");
  if (ratio_episodes == 0) fail("ratio_episodes", "must be positive");
  if (dual_every == 0) fail("dual_every", "must be positive");
  if (belief_bins == 0) fail("belief_bins", "must be positive");
  if (!(actor_average_min > 0.0 && actor_average_min <= 1.0)) {
    fail("actor_average_min", "must be in (0, 1]");
  }
}

double temperature(const DualState& dual, double b_hat, double tau_min) {
  return std::max(dual.lambda * b_hat, tau_min);
}

double soft_value(std::span<const double> q, std::span<const double> prior, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("soft_value: tau must be positive");
  if (q.size() != prior.size()) throw DimensionError("soft_value: size mismatch");
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (prior[a] > 0.0) m = std::max(m, q[a]);
  }
  double z = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (prior[a] > 0.0) z += prior[a] * std::exp((q[a] - m) / tau);
  }
  return m + tau * std::log(z);
}

double soft_value(const CriticTable& critic, const TabularPolicy& pi_ref, std::size_t t,
                  StateId s, std::size_t x, double tau, bool use_target) {
  return soft_value(use_target ? critic.target_row(t, s, x) : critic.row(t, s, x), pi_ref.row(s),
                    tau);
}

std::vector<double> gibbs_policy(std::span<const double> q, std::span<const double> prior,
                                 double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("gibbs_policy: tau must be positive");
  if (q.size() != prior.size()) throw DimensionError("gibbs_policy: size mismatch");
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (prior[a] > 0.0) m = std::max(m, q[a]);
  }
  std::vector<double> out(q.size(), 0.0);
  double z = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (prior[a] > 0.0) {
      out[a] = prior[a] * std::exp((q[a] - m) / tau);
      z += out[a];
    }
  }
  for (double& v : out) v /= z;
  return out;
}

std::vector<double> gibbs_policy(const CriticTable& critic, const TabularPolicy& pi_ref,
                                 std::size_t t, StateId s, std::size_t x, double tau) {
  return gibbs_policy(critic.row(t, s, x), pi_ref.row(s), tau);
}

double td_target(double reward, double tau, double log_ratio, double discount,
                 double next_soft_value) {
  return reward - tau * log_ratio + discount * next_soft_value;
}

void critic_update(CriticTable& critic, const TabularPolicy& prior, const Transition& tr,
                   double tau_next, double discount, double lr) {
  if (!(lr > 0.0 && lr <= 1.0)) throw std::invalid_argument("critic_update: lr must be in (0, 1]");
  const double v_next =
      tr.terminal ? 0.0
                  : soft_value(critic.target_row(tr.time + 1, tr.next_state, tr.next_summary),
                               prior.row(tr.next_state), tau_next);
  const double y = td_target(tr.reward, tr.penalty_weight, tr.log_ratio, discount, v_next);
  const std::size_t i = critic.index(tr.time, tr.state, tr.summary, tr.action);
  critic.q[i] += lr * (y - critic.q[i]);
  critic.q_target[i] += critic.target_rate * (critic.q[i] - critic.q_target[i]);
}

DualState dual_update(const DualState& dual, double exposure_ema) {
  DualState out = dual;
  out.exposure = exposure_ema;
  out.lambda = std::max(0.0, dual.lambda + dual.step_size * (exposure_ema - dual.epsilon));
  return out;
}

std::size_t greedy_action(std::span<const double> q, double tol) {
  if (q.empty()) throw std::invalid_argument("greedy_action: empty row");
  const double m = *std::max_element(q.begin(), q.end());
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (q[a] >= m - tol) return a;
  }
  return 0;
}

namespace {

double mode_tau(const TrainerMode& mode, const MonitorModel& model, double lambda,
                double tau_min, std::size_t x) {
  if (!mode.dual_temperature) return mode.constant_tau;
  const double b = mode.monitor_aware ? model.summary_b_hat(x) : 1.0;
  return std::max(lambda * b, tau_min);
}

AugmentedPolicy mix_uniform(AugmentedPolicy policy, double explore) {
  if (explore <= 0.0) return policy;
  const double u = explore / static_cast<double>(policy.num_actions);
  for (double& p : policy.probs) p = (1.0 - explore) * p + u;
  return policy;
}

StateRatioTable ratio_for(const TabularMdp& mdp, const AugmentedPolicy& behavior,
                          const TabularPolicy& pi_ref, const MonitorModel& model,
                          const LearnerConfig& config, std::uint64_t seed) {
  const OccupancyProfile reference = state_marginals(mdp, pi_ref, mdp.horizon);
  if (behavior.num_summaries == 1 && behavior.stationary()) {
    return build_state_ratio(state_marginals(mdp, behavior.flatten(), mdp.horizon), reference);
  }
  if (model.exact_age() || behavior.num_summaries == 1) {
    const MonitorModel plain{model.hazard, TokenChannel::noiseless(), model.belief_bins};
    return build_state_ratio(augmented_marginals(mdp, behavior, plain, mdp.horizon), reference);
  }
  return build_state_ratio(
      simulated_marginals(mdp, behavior, model, config.ratio_episodes, seed), reference);
}

// dst <- (1 - w) dst + w src; an empty dst takes src as is.
void average_into(AugmentedPolicy& dst, const AugmentedPolicy& src, double w) {
  if (dst.probs.size() != src.probs.size()) {
    dst = src;
    return;
  }
  for (std::size_t i = 0; i < dst.probs.size(); ++i) {
    dst.probs[i] = (1.0 - w) * dst.probs[i] + w * src.probs[i];
  }
}

}  // namespace

AugmentedPolicy gibbs_table(const CriticTable& critic, const TabularPolicy& prior,
                            const MonitorModel& model, const TrainerMode& mode, double lambda,
                            double tau_min) {
  AugmentedPolicy out(critic.num_states, critic.num_summaries, critic.num_actions,
                      critic.num_steps);
  for (std::size_t t = 0; t < critic.num_steps; ++t) {
    for (StateId s = 0; s < critic.num_states; ++s) {
      for (std::size_t x = 0; x < critic.num_summaries; ++x) {
        const double tau = mode_tau(mode, model, lambda, tau_min, x);
        const auto row = gibbs_policy(critic, prior, t, s, x, tau);
        std::copy(row.begin(), row.end(), out.row(t, s, x).begin());
      }
    }
  }
  return out;
}

TrainResult train_soft_q(const TabularMdp& mdp, const TabularPolicy& pi_ref,
                         const MonitorModel& model, const LearnerConfig& config,
                         const TrainerMode& mode) {
  config.validate();
  if (pi_ref.num_states != mdp.num_states || pi_ref.num_actions != mdp.num_actions) {
    throw DimensionError("train_soft_q: reference policy shape does not match mdp");
  }
  if (!mode.dual_temperature && !(mode.constant_tau > 0.0)) {
    throw std::invalid_argument("train_soft_q: constant temperature must be positive");
  }
  const double gamma = config.discount < 0.0 ? mdp.discount : config.discount;
  const std::size_t summaries = mode.monitor_aware ? model.num_summaries() : 1;
  const std::size_t num_actions = mdp.num_actions;
  const TabularPolicy prior =
      mode.reference_prior ? pi_ref : TabularPolicy::uniform(mdp.num_states, num_actions);
  const bool penalize = mode.dual_temperature && mode.state_penalty;

  TrainResult result;
  const std::size_t steps = config.time_indexed ? mdp.horizon : 1;
  result.critic = CriticTable(mdp.num_states, summaries, num_actions, config.target_rate, steps);
  CriticTable& critic = result.critic;
  std::fill(critic.q.begin(), critic.q.end(), config.q_init);
  std::fill(critic.q_target.begin(), critic.q_target.end(), config.q_init);
  DualState dual{config.lambda_init, config.epsilon, config.lambda_lr, 0.0};
  ExposureLedger ledger(config.ema_decay);
  ledger.set_keep_records(false);
  Rng rng(derive_seed(config.seed, 0x7e41));

  const double anneal_episodes =
      std::max(1.0, config.explore_fraction * static_cast<double>(config.episodes));
  StateRatioTable ratio;
  AugmentedPolicy actor;
  std::size_t refreshes = 0;
  std::vector<double> row(num_actions);
  result.log.reserve(config.episodes);

  for (std::size_t ep = 0; ep < config.episodes; ++ep) {
    const double frac = std::min(1.0, static_cast<double>(ep) / anneal_episodes);
    const double explore = config.explore_start + frac * (config.explore_end - config.explore_start);
    if (ep % config.ratio_refresh == 0) {
      const AugmentedPolicy fresh =
          gibbs_table(critic, prior, model, mode, dual.lambda, config.tau_min);
      const double w = std::max(1.0 / static_cast<double>(refreshes + 1), config.actor_average_min);
      average_into(actor, fresh, w);
      ++refreshes;
      ratio = ratio_for(mdp, mix_uniform(actor, explore), pi_ref, model, config,
                        derive_seed(config.seed, ep + 1));
    }

    EpisodeSimulator sim(mdp, model, rng);
    ledger.begin_episode();
    EpisodeLog log;
    log.episode = ep;
    double psi_sum = 0.0;
    std::size_t steps = 0;
    while (!sim.done()) {
      const std::size_t t = sim.time();
      const StateId s = sim.state();
      const double b = sim.b_hat();
      const std::size_t x = mode.monitor_aware ? sim.summary() : 0;
      const auto target = actor.row(t, s, x);
      for (ActionId a = 0; a < num_actions; ++a) {
        row[a] = (1.0 - explore) * target[a] + explore / static_cast<double>(num_actions);
      }
      const ActionId a = sample_index(row, rng.uniform());

      const EvidenceRecord rec = step_evidence(t, s, b, row, pi_ref.row(s), ratio);
      ledger.add(rec);
      psi_sum += rec.psi;
      ++steps;

      const auto st = sim.step(a);
      log.ret += st.reward;

      Transition tr;
      tr.time = t;
      tr.state = s;
      tr.summary = x;
      tr.action = a;
      tr.reward = st.reward;
      if (mode.shaping_weight > 0.0) {
        tr.reward -= mode.shaping_weight * (rec.log_ratio + std::log(row[a] / pi_ref(s, a)));
      }
      tr.penalty_weight = penalize ? dual.lambda * b : 0.0;
      tr.log_ratio = rec.log_ratio;
      tr.next_state = st.next_state;
      // Truncation is treated like termination: time is not part of the state
      // and the horizon is long relative to the task.
      tr.terminal = st.terminal || st.truncated;
      tr.next_summary = (!tr.terminal && mode.monitor_aware) ? sim.summary() : 0;
      const double tau_next = mode_tau(mode, model, dual.lambda, config.tau_min, tr.next_summary);
      critic_update(critic, prior, tr, tau_next, gamma, config.critic_lr);
    }
    log.success = sim.success();
    log.exposure = steps > 0 ? psi_sum / static_cast<double>(steps) : 0.0;
    log.exposure_ema = ledger.ema();
    if (mode.dual_temperature && (ep + 1) % config.dual_every == 0) {
      dual = dual_update(dual, ledger.ema());
    }
    log.lambda = dual.lambda;
    result.log.push_back(log);
  }

  result.dual = dual;
  result.policy = std::move(actor);
  return result;
}

TrainResult train_online(const TabularMdp& mdp, const TabularPolicy& pi_ref, const GapLaw& law,
                         const TokenChannel& channel, const LearnerConfig& config) {
  law.validate();
  channel.validate();
  const MonitorModel model = MonitorModel::from_gap_law(law, channel, config.belief_bins);
  return train_soft_q(mdp, pi_ref, model, config, TrainerMode{});
}

}  // namespace tomdec
