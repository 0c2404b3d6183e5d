// Command-line entry point: train, eval, compare, sweep, calibrate.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tomdec/baselines.hpp"
#include "tomdec/environments.hpp"
#include "tomdec/harness.hpp"
#include "tomdec/io.hpp"
#include "tomdec/learner.hpp"

namespace {

using namespace tomdec;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::string policy_path;
  std::string baseline;
};

struct Context {
  ExperimentConfig config;
  Scenario scenario;
  MonitorModel model;
  std::string fingerprint;
  std::filesystem::path out;
};

Context prepare(const Options& opt) {
  Context ctx;
  ctx.config = load_config(opt.config_path);
  if (opt.seed) ctx.config.seeds = {*opt.seed};
  if (opt.out) ctx.config.out_dir = *opt.out;
  ctx.config.learner.seed = ctx.config.seeds.front();
  ctx.scenario = build_scenario(ctx.config.scenario);
  ctx.model = MonitorModel::from_gap_law(ctx.config.gap_law, ctx.config.channel,
                                         ctx.config.learner.belief_bins);
  ctx.fingerprint = config_fingerprint(ctx.config);
  ctx.out = ctx.config.out_dir;
  return ctx;
}

EvalSettings eval_settings(const Context& ctx) {
  EvalSettings es;
  es.episodes = ctx.config.eval_episodes;
  es.top_k = ctx.config.top_k;
  es.seed = derive_seed(ctx.config.seeds.front(), 0xe7a1);
  es.threshold = ctx.config.threshold
                     ? *ctx.config.threshold
                     : calibrate_threshold(ctx.scenario.mdp, ctx.scenario.reference, ctx.model,
                                           ctx.config.false_alarm_rate,
                                           ctx.config.calibration_episodes,
                                           derive_seed(ctx.config.seeds.front(), 0xca1));
  return es;
}

// Policy from --policy, or a baseline built from the config by --baseline.
AugmentedPolicy acting_policy(const Options& opt, const Context& ctx) {
  if (!opt.baseline.empty()) {
    BaselineSpec spec;
    try {
      spec.kind = baseline_kind_from_string(opt.baseline);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("--baseline", e.what());
    }
    for (const auto& b : ctx.config.baselines) {
      if (b.kind == spec.kind) {
        spec = b;
        break;
      }
    }
    return build_baseline(spec, ctx.scenario.mdp, ctx.scenario.reference, ctx.model,
                          ctx.config.learner);
  }
  if (opt.policy_path.empty()) throw ConfigError("--policy", "required (or pass --baseline)");
  AugmentedPolicy pi = load_policy(opt.policy_path);
  if (pi.num_states != ctx.scenario.mdp.num_states ||
      pi.num_actions != ctx.scenario.mdp.num_actions) {
    throw ConfigError("policy", "dimensions do not match the configured scenario");
  }
  if (pi.num_summaries != 1 && pi.num_summaries != ctx.model.num_summaries()) {
    throw ConfigError("policy.num_summaries", "does not match the configured monitor");
  }
  return pi;
}

int cmd_train(const Options& opt) {
  const Context ctx = prepare(opt);
  const TrainResult res = train_online(ctx.scenario.mdp, ctx.scenario.reference,
                                       ctx.config.gap_law, ctx.config.channel, ctx.config.learner);
  write_atomic((ctx.out / "policy.json").string(), dump_policy(res.policy));
  write_atomic((ctx.out / "train_log.csv").string(), training_log_csv(res.log, ctx.fingerprint));
  // Averages over the last tenth of training.
  const std::size_t n = res.log.size();
  const std::size_t from = n - std::max<std::size_t>(1, n / 10);
  double ret = 0.0, exposure = 0.0;
  for (std::size_t i = from; i < n; ++i) {
    ret += res.log[i].ret;
    exposure += res.log[i].exposure;
  }
  const double k = static_cast<double>(n - from);
  std::printf("return %s exposure %s lambda %s\n", fmt_num(ret / k).c_str(),
              fmt_num(exposure / k).c_str(), fmt_num(res.dual.lambda).c_str());
  return 0;
}

int cmd_eval(const Options& opt) {
  const Context ctx = prepare(opt);
  const AugmentedPolicy pi = acting_policy(opt, ctx);
  EvalSettings es = eval_settings(ctx);
  es.keep_steps = true;
  const MetricsReport rep = evaluate(ctx.scenario.mdp, pi, ctx.scenario.reference, ctx.model, es);
  write_atomic((ctx.out / "metrics.csv").string(), metrics_csv(rep, ctx.fingerprint));
  write_atomic((ctx.out / "trace.jsonl").string(), trace_jsonl(rep, ctx.fingerprint));
  std::printf("return %s success %s kl_at_obs %s llr_at_obs %s top_k %s ttf %s\n",
              fmt_num(rep.mean_return).c_str(), fmt_num(rep.success_rate).c_str(),
              fmt_num(rep.kl_at_obs).c_str(), fmt_num(rep.llr_at_obs).c_str(),
              fmt_num(rep.top_k_rate).c_str(), fmt_num(rep.mean_ttf).c_str());
  return 0;
}

int cmd_compare(const Options& opt) {
  const Context ctx = prepare(opt);
  if (ctx.config.baselines.empty()) throw ConfigError("baselines", "must be nonempty");
  const auto rows = compare_table(ctx.scenario, ctx.config.gap_law, ctx.config.channel,
                                  ctx.config.baselines, ctx.config.learner, ctx.config.seeds,
                                  eval_settings(ctx));
  write_atomic((ctx.out / "compare.csv").string(), compare_csv(rows, ctx.fingerprint));
  for (const auto& r : rows) {
    std::printf("%-32s return %-10s ttf %-10s exposure %s%s\n", r.method.c_str(),
                fmt_num(r.mean_return).c_str(), fmt_num(r.mean_ttf).c_str(),
                fmt_num(r.exposure).c_str(), r.error.empty() ? "" : ("  error: " + r.error).c_str());
  }
  return 0;
}

int cmd_sweep(const Options& opt) {
  const Context ctx = prepare(opt);
  if (ctx.config.sweep_gaps.empty()) throw ConfigError("sweep.gaps", "must be nonempty");
  const SweepTable table = gap_sweep(ctx.scenario, ctx.config.sweep_gaps, ctx.config.channel,
                                     ctx.config.learner, ctx.config.seeds, eval_settings(ctx));
  write_atomic((ctx.out / "sweep.csv").string(), sweep_csv(table, ctx.fingerprint));
  for (const auto& s : table.summary) {
    std::printf("L=%zu U=%zu return %s exposure %s ttf %s\n", s.gap.lower, s.gap.upper,
                fmt_num(s.mean_return).c_str(), fmt_num(s.mean_exposure).c_str(),
                fmt_num(s.mean_ttf).c_str());
  }
  return 0;
}

int cmd_calibrate(const Options& opt) {
  const Context ctx = prepare(opt);
  const AugmentedPolicy pi = acting_policy(opt, ctx);
  EvalSettings es = eval_settings(ctx);
  es.keep_steps = true;
  const MetricsReport rep = evaluate(ctx.scenario.mdp, pi, ctx.scenario.reference, ctx.model, es);
  const CalibrationBins bins = calibration_bins(calibration_stream(rep.steps));
  write_atomic((ctx.out / "bins.csv").string(), bins_csv(bins, ctx.fingerprint));
  if (bins.degenerate) {
    std::printf("degenerate: all predictions equal\n");
  } else {
    std::printf("slope %s intercept %s\n", fmt_num(bins.slope).c_str(),
                fmt_num(bins.intercept).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deception under intermittent observation: training and evaluation"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Experiment configuration (JSON)")->required();
    sub->add_option("--seed", opt.seed, "Override the configured seed list with one seed");
    sub->add_option("--out", opt.out, "Output directory");
  };
  auto add_policy = [&](CLI::App* sub) {
    sub->add_option("--policy", opt.policy_path, "Policy file to evaluate");
    sub->add_option("--baseline", opt.baseline, "Build and evaluate a baseline instead");
  };

  CLI::App* train = app.add_subcommand("train", "Train the learner");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a policy");
  CLI::App* compare = app.add_subcommand("compare", "Baseline comparison table");
  CLI::App* sweep = app.add_subcommand("sweep", "Gap-length sweep");
  CLI::App* calibrate = app.add_subcommand("calibrate", "Reliability bins for a policy");
  for (CLI::App* sub : {train, eval, compare, sweep, calibrate}) add_common(sub);
  add_policy(eval);
  add_policy(calibrate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*train) return cmd_train(opt);
    if (*eval) return cmd_eval(opt);
    if (*compare) return cmd_compare(opt);
    if (*sweep) return cmd_sweep(opt);
    if (*calibrate) return cmd_calibrate(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
