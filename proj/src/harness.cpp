#include "tomdec/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "tomdec/random.hpp"

namespace tomdec {

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

DetectorState detector_step(const DetectorState& state, double contribution, std::size_t time) {
  DetectorState next = state;
  next.cumulative += contribution;
  ++next.observed_steps;
  if (!next.detected && next.cumulative > next.threshold) {
    next.detected = true;
    next.crossing_index = next.observed_steps;
    next.crossing_time = time;
  }
  return next;
}

double upper_quantile(std::vector<double> samples, double rate) {
  if (!(rate > 0.0 && rate < 1.0)) {
    throw std::invalid_argument("upper_quantile: rate must be in (0, 1)");
  }
  if (samples.empty()) throw std::invalid_argument("upper_quantile: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  const auto rank = static_cast<std::size_t>(std::ceil((1.0 - rate) * n));
  return samples[std::clamp<std::size_t>(rank, 1, samples.size()) - 1];
}

double calibrate_threshold(const TabularMdp& mdp, const TabularPolicy& pi_ref,
                           const MonitorModel& model, double false_alarm_rate,
                           std::size_t episodes, std::uint64_t seed, double floor) {
  if (!(false_alarm_rate > 0.0 && false_alarm_rate < 1.0)) {
    throw std::invalid_argument("calibrate_threshold: false-alarm rate must be in (0, 1)");
  }
  if (static_cast<double>(episodes) * false_alarm_rate < 1.0) {
    throw std::invalid_argument("calibrate_threshold: too few episodes for the quantile");
  }
  const AugmentedPolicy pi = AugmentedPolicy::lift(pi_ref, 1);
  const StateRatioTable ratio = build_state_ratio(mdp, pi, pi_ref, model);
  std::vector<double> maxima(episodes, 0.0);
  parallel_for(episodes, [&](std::size_t ep) {
    Rng rng(derive_seed(seed, ep));
    const ScoredEpisode run = run_scored_episode(mdp, pi, pi_ref, model, ratio, rng);
    double cum = 0.0;
    double best = 0.0;
    for (const auto& st : run.trace.steps) {
      if (!st.observed || !ratio.is_valid(std::min(st.time, ratio.num_steps - 1), st.state)) {
        continue;
      }
      cum += observed_llr(pi.row(st.time, st.state, st.summary), pi_ref.row(st.state), ratio,
                          std::min(st.time, ratio.num_steps - 1), st.state, st.action);
      best = std::max(best, cum);
    }
    maxima[ep] = best;
  });
  return std::max(upper_quantile(std::move(maxima), false_alarm_rate), floor);
}

bool top_k_compliant(std::span<const double> acting_row, std::span<const double> ref_row,
                     ActionId a, std::size_t k) {
  if (std::equal(acting_row.begin(), acting_row.end(), ref_row.begin(), ref_row.end())) return true;
  const auto order = ranked_actions(ref_row);
  const auto end = order.begin() + static_cast<std::ptrdiff_t>(std::min(k, order.size()));
  return std::find(order.begin(), end, a) != end;
}

MetricsReport evaluate(const TabularMdp& mdp, const AugmentedPolicy& pi, const TabularPolicy& pi_ref,
                       const MonitorModel& model, const EvalSettings& settings) {
  if (settings.episodes == 0) throw std::invalid_argument("evaluate: episodes must be positive");
  if (settings.top_k < 1) throw std::invalid_argument("evaluate: top_k must be >= 1");
  if (pi.num_states != mdp.num_states || pi.num_actions != mdp.num_actions) {
    throw DimensionError("evaluate: policy shape does not match mdp");
  }
  const StateRatioTable ratio = build_state_ratio(mdp, pi, pi_ref, model, kDefaultRatioFloor,
                                                  derive_seed(settings.seed, 0xa7));
  MetricsReport report;
  report.episodes.resize(settings.episodes);
  std::vector<std::vector<StepRecord>> per_episode(settings.keep_steps ? settings.episodes : 0);

  parallel_for(settings.episodes, [&](std::size_t ep) {
    EpisodeMetrics m;
    m.seed = derive_seed(settings.seed, ep);
    Rng rng(m.seed);
    const ScoredEpisode run = run_scored_episode(mdp, pi, pi_ref, model, ratio, rng);
    DetectorState det;
    det.threshold = settings.threshold;
    double psi_sum = 0.0;
    for (std::size_t i = 0; i < run.trace.steps.size(); ++i) {
      const TraceStep& st = run.trace.steps[i];
      const EvidenceRecord& rec = run.evidence[i];
      m.ret += st.reward;
      psi_sum += rec.psi;
      double realized = 0.0;
      const std::size_t tt = std::min(st.time, ratio.num_steps - 1);
      if (st.observed && ratio.is_valid(tt, st.state)) {
        const auto row = pi.row(st.time, st.state, st.summary);
        realized = observed_llr(row, pi_ref.row(st.state), ratio, tt, st.state, st.action);
        ++m.observed;
        m.kl_sum += rec.log_ratio + rec.delta;
        m.llr_sum += realized;
        if (top_k_compliant(row, pi_ref.row(st.state), st.action, settings.top_k)) ++m.top_k_hits;
        det = detector_step(det, realized, st.time);
      }
      if (settings.keep_steps) {
        per_episode[ep].push_back({ep, st.time, st.state, st.action, st.reward, st.observed,
                                   st.b_hat, rec.log_ratio, rec.delta, rec.psi, realized,
                                   det.cumulative});
      }
    }
    m.steps = run.trace.steps.size();
    m.success = run.trace.success;
    m.exposure = m.steps > 0 ? psi_sum / static_cast<double>(m.steps) : 0.0;
    m.detected = det.detected;
    m.censored = !det.detected;
    m.ttf = det.detected ? det.crossing_time + 1 : mdp.horizon;
    report.episodes[ep] = m;
  });

  // Aggregate in episode order so the result does not depend on scheduling.
  std::size_t observed = 0;
  std::size_t hits = 0;
  double kl = 0.0;
  double llr = 0.0;
  double psi_weighted = 0.0;
  std::size_t steps = 0;
  for (const auto& m : report.episodes) {
    report.mean_return += m.ret;
    report.success_rate += m.success ? 1.0 : 0.0;
    report.mean_ttf += static_cast<double>(m.ttf);
    report.detection_rate += m.detected ? 1.0 : 0.0;
    observed += m.observed;
    hits += m.top_k_hits;
    kl += m.kl_sum;
    llr += m.llr_sum;
    psi_weighted += m.exposure * static_cast<double>(m.steps);
    steps += m.steps;
    report.seeds.push_back(m.seed);
  }
  const double n = static_cast<double>(settings.episodes);
  report.mean_return /= n;
  report.success_rate /= n;
  report.mean_ttf /= n;
  report.detection_rate /= n;
  report.censored_fraction = 1.0 - report.detection_rate;
  report.kl_at_obs = observed > 0 ? kl / static_cast<double>(observed) : 0.0;
  report.llr_at_obs = observed > 0 ? llr / static_cast<double>(observed) : 0.0;
  report.top_k_rate = observed > 0 ? static_cast<double>(hits) / static_cast<double>(observed) : 1.0;
  report.exposure = steps > 0 ? psi_weighted / static_cast<double>(steps) : 0.0;
  for (auto& rows : per_episode) {
    report.steps.insert(report.steps.end(), rows.begin(), rows.end());
  }
  return report;
}

std::vector<CalibrationPoint> calibration_stream(const std::vector<StepRecord>& steps) {
  std::vector<CalibrationPoint> out;
  out.reserve(steps.size());
  for (const auto& st : steps) out.push_back({st.psi, st.realized});
  return out;
}

CalibrationBins calibration_bins(const std::vector<CalibrationPoint>& stream, std::size_t bins) {
  if (stream.empty()) throw std::invalid_argument("calibration_bins: empty stream");
  if (bins == 0) throw std::invalid_argument("calibration_bins: bins must be positive");
  double lo = stream.front().predicted;
  double hi = lo;
  for (const auto& p : stream) {
    lo = std::min(lo, p.predicted);
    hi = std::max(hi, p.predicted);
  }
  CalibrationBins out;
  if (!(hi > lo)) {
    CalibrationBin only{lo, hi, 0.0, 0.0, stream.size()};
    for (const auto& p : stream) {
      only.mean_predicted += p.predicted;
      only.mean_realized += p.realized;
    }
    only.mean_predicted /= static_cast<double>(stream.size());
    only.mean_realized /= static_cast<double>(stream.size());
    out.bins.push_back(only);
    out.degenerate = true;
    out.slope = std::numeric_limits<double>::quiet_NaN();
    out.intercept = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  out.bins.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out.bins[b].lo = lo + width * static_cast<double>(b);
    out.bins[b].hi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (const auto& p : stream) {
    auto b = static_cast<std::size_t>((p.predicted - lo) / width);
    b = std::min(b, bins - 1);
    out.bins[b].mean_predicted += p.predicted;
    out.bins[b].mean_realized += p.realized;
    ++out.bins[b].count;
  }
  double sw = 0.0, sx = 0.0, sy = 0.0;
  std::size_t occupied = 0;
  for (auto& bin : out.bins) {
    if (bin.count == 0) continue;
    ++occupied;
    const double c = static_cast<double>(bin.count);
    bin.mean_predicted /= c;
    bin.mean_realized /= c;
    sw += c;
    sx += c * bin.mean_predicted;
    sy += c * bin.mean_realized;
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& bin : out.bins) {
    if (bin.count == 0) continue;
    const double c = static_cast<double>(bin.count);
    sxx += c * (bin.mean_predicted - mx) * (bin.mean_predicted - mx);
    sxy += c * (bin.mean_predicted - mx) * (bin.mean_realized - my);
  }
  if (occupied < 2 || !(sxx > 0.0)) {
    out.degenerate = true;
    out.slope = std::numeric_limits<double>::quiet_NaN();
    out.intercept = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  return out;
}

SweepTable gap_sweep(const Scenario& scenario, const std::vector<GapPoint>& gaps,
                     const TokenChannel& channel, const LearnerConfig& config,
                     const std::vector<std::uint64_t>& seeds, const EvalSettings& eval) {
  if (gaps.empty()) throw std::invalid_argument("gap_sweep: empty gap list");
  if (seeds.empty()) throw std::invalid_argument("gap_sweep: empty seed list");
  SweepTable table;
  table.rows.resize(gaps.size() * seeds.size());
  parallel_for(table.rows.size(), [&](std::size_t i) {
    const GapPoint gap = gaps[i / seeds.size()];
    const std::uint64_t seed = seeds[i % seeds.size()];
    const GapLaw law = GapLaw::uniform(gap.lower, gap.upper);
    LearnerConfig cfg = config;
    cfg.seed = seed;
    const TrainResult trained = train_online(scenario.mdp, scenario.reference, law, channel, cfg);
    const MonitorModel model = MonitorModel::from_gap_law(law, channel, cfg.belief_bins);
    EvalSettings es = eval;
    es.seed = derive_seed(eval.seed, seed);
    const MetricsReport rep = evaluate(scenario.mdp, trained.policy, scenario.reference, model, es);
    table.rows[i] = {gap, seed, rep.mean_return, rep.exposure, rep.mean_ttf, trained.dual.lambda};
  });
  for (std::size_t g = 0; g < gaps.size(); ++g) {
    SweepSummary sum;
    sum.gap = gaps[g];
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const SweepRow& row = table.rows[g * seeds.size() + k];
      sum.mean_return += row.ret;
      sum.mean_exposure += row.exposure;
      sum.mean_ttf += row.ttf;
    }
    const double n = static_cast<double>(seeds.size());
    sum.mean_return /= n;
    sum.mean_exposure /= n;
    sum.mean_ttf /= n;
    table.summary.push_back(sum);
  }
  return table;
}

BudgetMatch match_budget(const BaselineSpec& spec, const TabularMdp& mdp,
                         const TabularPolicy& pi_ref, const MonitorModel& model,
                         const LearnerConfig& config, const EvalSettings& eval,
                         std::size_t iterations) {
  BaselineSpec probe = spec;
  if (!probe.has_budget_knob()) {
    throw std::invalid_argument("match_budget: " + to_string(spec.kind) + " has no budget knob");
  }
  const auto [lo, hi] = probe.budget_knob_range();
  auto exposure_at = [&](double value) {
    probe.set_budget_knob(value);
    const AugmentedPolicy pi = build_baseline(probe, mdp, pi_ref, model, config);
    return evaluate(mdp, pi, pi_ref, model, eval).exposure;
  };
  const double budget = config.epsilon;
  BudgetMatch best{hi, exposure_at(hi), false};
  if (best.exposure > budget) return best;
  best.feasible = true;
  const double at_lo = exposure_at(lo);
  if (at_lo <= budget) return {lo, at_lo, true};
  double a = lo;
  double b = hi;
  for (std::size_t i = 0; i < iterations; ++i) {
    const double mid = std::sqrt(a * b);
    const double e = exposure_at(mid);
    if (e <= budget) {
      b = mid;
      best = {mid, e, true};
    } else {
      a = mid;
    }
  }
  return best;
}

namespace {

void accumulate(CompareRow& row, const MetricsReport& rep, double w) {
  row.mean_return += w * rep.mean_return;
  row.success_rate += w * rep.success_rate;
  row.kl_at_obs += w * rep.kl_at_obs;
  row.llr_at_obs += w * rep.llr_at_obs;
  row.top_k_rate += w * rep.top_k_rate;
  row.mean_ttf += w * rep.mean_ttf;
  row.exposure += w * rep.exposure;
}

}  // namespace

std::vector<CompareRow> compare_table(const Scenario& scenario, const GapLaw& law,
                                      const TokenChannel& channel,
                                      const std::vector<BaselineSpec>& specs,
                                      const LearnerConfig& config,
                                      const std::vector<std::uint64_t>& seeds,
                                      const EvalSettings& eval) {
  if (specs.empty()) throw std::invalid_argument("compare_table: empty baseline list");
  if (seeds.empty()) throw std::invalid_argument("compare_table: empty seed list");
  const MonitorModel model = MonitorModel::from_gap_law(law, channel, config.belief_bins);
  const std::size_t methods = specs.size() + 1;
  std::vector<CompareRow> rows(methods);
  // Budget-matched knobs are resolved once, on the first seed.
  std::vector<BaselineSpec> resolved = specs;
  for (auto& spec : resolved) {
    if (!spec.match_budget || !spec.has_budget_knob()) continue;
    LearnerConfig cfg = config;
    cfg.seed = seeds.front();
    EvalSettings es = eval;
    es.seed = derive_seed(eval.seed, 0xb0d6e7);
    try {
      spec.set_budget_knob(
          match_budget(spec, scenario.mdp, scenario.reference, model, cfg, es).knob);
    } catch (const std::exception&) {
      // Left at the configured value; the per-seed run reports the error.
    }
  }
  for (std::size_t m = 0; m < specs.size(); ++m) rows[m].method = resolved[m].label();
  rows.back().method = kLearnerName;

  // reports[seed][method]; failures leave an empty optional-like message.
  std::vector<std::vector<MetricsReport>> reports(seeds.size(),
                                                  std::vector<MetricsReport>(methods));
  std::vector<std::vector<std::string>> errors(seeds.size(), std::vector<std::string>(methods));

  parallel_for(seeds.size(), [&](std::size_t k) {
    LearnerConfig cfg = config;
    cfg.seed = seeds[k];
    EvalSettings es = eval;
    es.seed = derive_seed(eval.seed, seeds[k]);
    // The shield, blend and switch wrap the selfish policy; train it once.
    AugmentedPolicy task;
    auto task_policy = [&]() -> const AugmentedPolicy& {
      if (task.probs.empty()) task = selfish(scenario.mdp, scenario.reference, model, cfg).policy;
      return task;
    };
    for (std::size_t m = 0; m < methods; ++m) {
      try {
        AugmentedPolicy pi;
        if (m + 1 == methods) {
          pi = train_soft_q(scenario.mdp, scenario.reference, model, cfg, TrainerMode{}).policy;
        } else {
          const BaselineSpec& spec = resolved[m];
          spec.validate();
          switch (spec.kind) {
            case BaselineKind::Selfish:
              pi = task_policy();
              break;
            case BaselineKind::Shielded:
              pi = shielded(task_policy(), scenario.reference, model, spec.threshold, spec.top_k);
              break;
            case BaselineKind::FixedBlend:
              pi = fixed_blend(task_policy(), scenario.reference, spec.alpha);
              break;
            case BaselineKind::HazardSwitch:
              pi = hazard_switch(task_policy(), scenario.reference, model, spec.threshold);
              break;
            default:
              pi = build_baseline(spec, scenario.mdp, scenario.reference, model, cfg);
          }
        }
        reports[k][m] = evaluate(scenario.mdp, pi, scenario.reference, model, es);
      } catch (const std::exception& e) {
        errors[k][m] = e.what();
      }
    }
  });

  for (std::size_t m = 0; m < methods; ++m) {
    std::size_t ok = 0;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      if (errors[k][m].empty()) {
        ++ok;
      } else if (rows[m].error.empty()) {
        rows[m].error = errors[k][m];
      }
    }
    if (ok == 0) continue;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      if (errors[k][m].empty()) accumulate(rows[m], reports[k][m], 1.0 / static_cast<double>(ok));
    }
  }
  return rows;
}

}  // namespace tomdec
