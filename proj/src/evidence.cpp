#include "tomdec/evidence.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tomdec {

void ExposureLedger::add(const EvidenceRecord& rec) {
  if (!seeded_) {
    ema_ = rec.psi;
    seeded_ = true;
  } else {
    ema_ = decay_ * ema_ + (1.0 - decay_) * rec.psi;
  }
  discounted_sum_ += weight_ * rec.psi;
  weight_ *= discount_;
  if (keep_records_) records_.push_back(rec);
}

void ExposureLedger::begin_episode() {
  discounted_sum_ = 0.0;
  weight_ = 1.0;
  records_.clear();
}

StateRatioTable build_state_ratio(const OccupancyProfile& agent, const OccupancyProfile& reference,
                                  double floor) {
  if (!(floor > 0.0)) throw std::invalid_argument("build_state_ratio: floor must be positive");
  if (agent.marginals.size() != reference.marginals.size() || agent.marginals.empty()) {
    throw DimensionError("build_state_ratio: occupancy profiles differ in length");
  }
  StateRatioTable table;
  table.num_steps = agent.marginals.size();
  table.num_states = agent.marginals.front().size();
  table.floor = floor;
  table.log_ratio.assign(table.num_steps * table.num_states, 0.0);
  table.valid.assign(table.log_ratio.size(), 0);
  table.clipped.assign(table.log_ratio.size(), 0);
  const double log_floor = std::log(floor);
  for (std::size_t t = 0; t < table.num_steps; ++t) {
    const auto& dp = agent.marginals[t];
    const auto& dr = reference.marginals[t];
    if (dp.size() != table.num_states || dr.size() != table.num_states) {
      throw DimensionError("build_state_ratio: marginal sizes differ");
    }
    for (StateId s = 0; s < table.num_states; ++s) {
      const std::size_t i = table.idx(t, s);
      const double log_agent = dp[s] > 0.0 ? std::log(dp[s]) : log_floor;
      if (dr[s] < floor) {
        // Masked: the strict lookup rejects it; the stored value clamps the
        // reference at the floor so accumulated evidence stays finite.
        table.log_ratio[i] = std::max(log_agent, log_floor) - log_floor;
        table.clipped[i] = 1;
        continue;
      }
      table.valid[i] = 1;
      table.log_ratio[i] = log_agent - std::log(dr[s]);
      if (dp[s] <= 0.0) table.clipped[i] = 1;
    }
  }
  return table;
}

StateRatioTable build_state_ratio(const TabularMdp& mdp, const TabularPolicy& pi,
                                  const TabularPolicy& pi_ref, double floor) {
  return build_state_ratio(state_marginals(mdp, pi, mdp.horizon),
                           state_marginals(mdp, pi_ref, mdp.horizon), floor);
}

StateRatioTable build_state_ratio(const TabularMdp& mdp, const AugmentedPolicy& pi,
                                  const TabularPolicy& pi_ref, const MonitorModel& model,
                                  double floor, std::uint64_t seed) {
  const OccupancyProfile reference = state_marginals(mdp, pi_ref, mdp.horizon);
  // A policy that ignores time and monitoring has plain marginals; computing
  // them the same way as the reference keeps log r exactly 0 for pi_ref.
  if (pi.stationary() && pi.num_summaries == 1) {
    return build_state_ratio(state_marginals(mdp, pi.flatten(), mdp.horizon), reference, floor);
  }
  return build_state_ratio(policy_marginals(mdp, pi, model, seed), reference, floor);
}

EvidenceRecord tom_scalar(double b_hat, double log_ratio, double delta) {
  EvidenceRecord rec;
  rec.b_hat = b_hat;
  rec.log_ratio = log_ratio;
  rec.delta = delta;
  rec.psi = b_hat * (log_ratio + delta);
  return rec;
}

double observed_llr(std::span<const double> pi_row, std::span<const double> ref_row,
                    const StateRatioTable& ratio, std::size_t t, StateId s, ActionId a) {
  if (t >= ratio.num_steps || s >= ratio.num_states) {
    throw std::out_of_range("observed_llr: (t, s) outside the ratio table");
  }
  if (!ratio.is_valid(t, s)) {
    throw std::domain_error("observed_llr: state " + std::to_string(s) + " is masked at t=" +
                            std::to_string(t));
  }
  if (ref_row[a] <= 0.0) {
    throw AbsoluteContinuityError("observed_llr: reference assigns zero probability to action");
  }
  if (pi_row[a] <= 0.0) {
    throw std::domain_error("observed_llr: action has zero probability under the agent policy");
  }
  return ratio.at(t, s) + std::log(pi_row[a] / ref_row[a]);
}

double observed_llr(const TabularPolicy& pi, const TabularPolicy& pi_ref,
                    const StateRatioTable& ratio, std::size_t t, StateId s, ActionId a) {
  return observed_llr(pi.row(s), pi_ref.row(s), ratio, t, s, a);
}

EvidenceRecord step_evidence(std::size_t t, StateId s, double b_hat,
                             std::span<const double> pi_row, std::span<const double> ref_row,
                             const StateRatioTable& ratio) {
  EvidenceRecord rec = tom_scalar(b_hat, ratio.lookup(t, s), kl_divergence(pi_row, ref_row));
  rec.time = t;
  return rec;
}

ScoredEpisode run_scored_episode(const TabularMdp& mdp, const AugmentedPolicy& pi,
                                 const TabularPolicy& pi_ref, const MonitorModel& model,
                                 const StateRatioTable& ratio, Rng& rng) {
  ScoredEpisode out;
  EpisodeSimulator sim(mdp, model, rng);
  while (!sim.done()) {
    const StateId s = sim.state();
    const auto row = pi.row(sim.time(), s, sim.summary());
    out.evidence.push_back(step_evidence(sim.time(), s, sim.b_hat(), row, pi_ref.row(s), ratio));
    const ActionId a = sample_index(row, rng.uniform());
    TraceStep step{sim.time(), s, a, mdp.r(s, a), sim.observed(), sim.summary(), sim.b_hat()};
    out.trace.steps.push_back(step);
    sim.step(a);
  }
  out.trace.success = sim.success();
  return out;
}

namespace {

MeanEstimate summarize(const std::vector<double>& xs) {
  MeanEstimate est;
  est.samples = xs.size();
  if (xs.empty()) return est;
  double sum = 0.0;
  for (double x : xs) sum += x;
  est.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - est.mean) * (x - est.mean);
    est.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                            static_cast<double>(xs.size()));
  }
  return est;
}

}  // namespace

MeanEstimate expected_exposure(const TabularMdp& mdp, const AugmentedPolicy& pi,
                               const TabularPolicy& pi_ref, const MonitorModel& model,
                               double discount, std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) throw std::invalid_argument("expected_exposure: zero episodes");
  const StateRatioTable ratio =
      build_state_ratio(mdp, pi, pi_ref, model, kDefaultRatioFloor, derive_seed(seed, 1));
  Rng rng(seed);
  std::vector<double> sums;
  sums.reserve(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    const ScoredEpisode ep = run_scored_episode(mdp, pi, pi_ref, model, ratio, rng);
    double acc = 0.0;
    double w = 1.0;
    for (const auto& rec : ep.evidence) {
      acc += w * rec.psi;
      w *= discount;
    }
    sums.push_back(acc);
  }
  return summarize(sums);
}

MeanEstimate expected_exposure(const TabularMdp& mdp, const TabularPolicy& pi,
                               const TabularPolicy& pi_ref, const MonitorModel& model,
                               double discount, std::size_t episodes, std::uint64_t seed) {
  return expected_exposure(mdp, AugmentedPolicy::lift(pi, model.num_summaries()), pi_ref, model,
                           discount, episodes, seed);
}

RealizedEvidence realized_evidence(const EpisodeTrace& trace, const AugmentedPolicy& pi,
                                   const TabularPolicy& pi_ref, const StateRatioTable& ratio,
                                   double discount) {
  RealizedEvidence out;
  double w = 1.0;
  for (const auto& step : trace.steps) {
    if (step.observed) {
      const std::size_t t = std::min(step.time, ratio.num_steps - 1);
      if (!ratio.is_valid(t, step.state)) {
        out.clipped = true;
      } else {
        out.value += w * observed_llr(pi.row(step.time, step.state, step.summary), pi_ref.row(step.state),
                                      ratio, t, step.state, step.action);
      }
    }
    w *= discount;
  }
  return out;
}

}  // namespace tomdec
