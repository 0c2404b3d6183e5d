#include "tomdec/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tomdec {

using nlohmann::json;

namespace {

// Field-addressed access into a JSON object; unknown keys are rejected.
class Reader {
public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  bool has(const std::string& key) const { return node_.contains(key); }

  template <class T>
  void opt(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    try {
      out = node_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key), "wrong type");
    }
  }

  template <class T>
  void req(const std::string& key, T& out) {
    if (!node_.contains(key)) throw ConfigError(field(key), "required field missing");
    opt(key, out);
  }

  Reader sub(const std::string& key) {
    seen_.insert(key);
    return Reader(node_.at(key), field(key));
  }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  void finish() const {
    for (const auto& item : node_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(field(item.key()), "unknown field");
    }
  }

private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

// Runs a component validator and re-raises its error as a ConfigError. Messages
// of the form "section.field: ..." keep their field; others go to `prefix`.
template <class F>
void check(const std::string& prefix, F&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    const auto dot = msg.find('.');
    if (colon != std::string::npos && dot < colon && msg.find(' ') > colon) {
      throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
    }
    throw ConfigError(prefix, msg);
  }
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

void read_scenario(Reader r, ExperimentConfig& cfg) {
  std::string kind;
  r.req("kind", kind);
  std::size_t size = 8;
  double floor = 0.01;
  std::size_t layers = 1;
  r.opt("size", size);
  r.opt("floor", floor);
  r.opt("layers", layers);
  if (kind == "perimeter-lap") {
    cfg.scenario = perimeter_lap_spec(size, floor);
  } else if (kind == "avoid-zone") {
    cfg.scenario = avoid_zone_spec(size, floor, layers);
  } else {
    throw ConfigError(r.field("kind"), "must be perimeter-lap or avoid-zone");
  }
  cfg.scenario.layers = layers;
  r.opt("horizon", cfg.scenario.horizon);
  r.opt("discount", cfg.scenario.discount);
  r.opt("step_penalty", cfg.scenario.step_penalty);
  r.opt("goal_reward", cfg.scenario.goal_reward);
  r.finish();
}

void read_monitor(Reader r, ExperimentConfig& cfg) {
  std::size_t lower = 1;
  std::size_t upper = 1;
  r.req("lower", lower);
  r.req("upper", upper);
  if (lower < 1 || upper < lower) throw ConfigError(r.field("upper"), "need 1 <= lower <= upper");
  cfg.gap_law = GapLaw::uniform(lower, upper);
  if (r.has("pmf")) {
    const json& pmf = r.raw("pmf");
    if (pmf.is_string()) {
      if (pmf.get<std::string>() != "uniform") {
        throw ConfigError(r.field("pmf"), "must be \"uniform\" or a list of probabilities");
      }
    } else {
      r.opt("pmf", cfg.gap_law.pmf);
    }
  }
  check(r.field("pmf"), [&] { cfg.gap_law.validate(); });
  r.opt("delay", cfg.channel.delay);
  r.opt("rho1", cfg.channel.rho1);
  r.opt("rho0", cfg.channel.rho0);
  check(r.field("channel"), [&] { cfg.channel.validate(); });
  r.finish();
}

void read_learner(Reader r, LearnerConfig& l) {
  r.req("epsilon", l.epsilon);
  r.opt("discount", l.discount);
  r.opt("critic_lr", l.critic_lr);
  r.opt("q_init", l.q_init);
  r.opt("target_rate", l.target_rate);
  r.opt("lambda_init", l.lambda_init);
  r.opt("lambda_lr", l.lambda_lr);
  r.opt("ema_decay", l.ema_decay);
  r.opt("tau_min", l.tau_min);
  r.opt("explore_start", l.explore_start);
  r.opt("explore_end", l.explore_end);
  r.opt("explore_fraction", l.explore_fraction);
  r.opt("episodes", l.episodes);
  r.opt("ratio_refresh", l.ratio_refresh);
  r.opt("ratio_episodes", l.ratio_episodes);
  r.opt("dual_every", l.dual_every);
  r.opt("belief_bins", l.belief_bins);
  r.opt("time_indexed", l.time_indexed);
  r.opt("actor_average_min", l.actor_average_min);
  r.finish();
  check("learner", [&] { l.validate(); });
}

BaselineSpec read_baseline(Reader r) {
  BaselineSpec b;
  std::string kind;
  r.req("kind", kind);
  try {
    b.kind = baseline_kind_from_string(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.field("kind"), e.what());
  }
  r.opt("weight", b.weight);
  r.opt("tau", b.tau);
  r.opt("alpha", b.alpha);
  r.opt("threshold", b.threshold);
  r.opt("top_k", b.top_k);
  r.opt("clone_samples", b.clone_samples);
  r.opt("smoothing", b.smoothing);
  r.opt("match_budget", b.match_budget);
  r.finish();
  return b;
}

json baseline_json(const BaselineSpec& b) {
  return {{"kind", to_string(b.kind)},        {"weight", b.weight},
          {"tau", b.tau},                     {"alpha", b.alpha},
          {"threshold", b.threshold},         {"top_k", b.top_k},
          {"clone_samples", b.clone_samples}, {"smoothing", b.smoothing},
          {"match_budget", b.match_budget}};
}

std::string header(const std::string& fingerprint) { return "# fingerprint " + fingerprint + "\n"; }

}  // namespace

void ExperimentConfig::validate() const {
  check("scenario", [&] { scenario.validate(); });
  check("monitor", [&] { gap_law.validate(); });
  check("monitor", [&] { channel.validate(); });
  check("learner", [&] { learner.validate(); });
  for (std::size_t i = 0; i < baselines.size(); ++i) {
    check("baselines[" + std::to_string(i) + "]", [&] { baselines[i].validate(); });
  }
  if (threshold && !std::isfinite(*threshold)) throw ConfigError("detector.threshold", "must be finite");
  if (!(false_alarm_rate > 0.0 && false_alarm_rate < 1.0)) {
    throw ConfigError("detector.false_alarm_rate", "must be in (0, 1)");
  }
  if (static_cast<double>(calibration_episodes) * false_alarm_rate < 1.0) {
    throw ConfigError("detector.calibration_episodes", "too few for the false-alarm rate");
  }
  if (eval_episodes == 0) throw ConfigError("eval.episodes", "must be positive");
  if (top_k < 1) throw ConfigError("eval.top_k", "must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds", "must be nonempty");
  for (std::size_t i = 0; i < sweep_gaps.size(); ++i) {
    const auto& g = sweep_gaps[i];
    if (g.lower < 1 || g.upper < g.lower) {
      throw ConfigError("sweep.gaps[" + std::to_string(i) + "]", "need 1 <= lower <= upper");
    }
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "syntax error at line " + std::to_string(line_of(text, e.byte)) + ": " +
                              e.what());
  }
  ExperimentConfig cfg;
  Reader root(doc, "");
  int version = 0;
  root.req("schema_version", version);
  if (version != kConfigSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version " + std::to_string(version));
  }
  if (!root.has("scenario")) throw ConfigError("scenario", "required field missing");
  read_scenario(root.sub("scenario"), cfg);
  if (root.has("monitor")) read_monitor(root.sub("monitor"), cfg);
  if (!root.has("learner")) throw ConfigError("learner", "required field missing");
  read_learner(root.sub("learner"), cfg.learner);
  if (root.has("baselines")) {
    const json& list = root.raw("baselines");
    if (!list.is_array()) throw ConfigError("baselines", "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      cfg.baselines.push_back(read_baseline(Reader(list[i], "baselines[" + std::to_string(i) + "]")));
    }
  }
  if (root.has("detector")) {
    Reader d = root.sub("detector");
    if (d.has("threshold")) {
      double thr = 0.0;
      d.opt("threshold", thr);
      cfg.threshold = thr;
    }
    d.opt("false_alarm_rate", cfg.false_alarm_rate);
    d.opt("calibration_episodes", cfg.calibration_episodes);
    d.finish();
  }
  if (root.has("eval")) {
    Reader e = root.sub("eval");
    e.opt("episodes", cfg.eval_episodes);
    e.opt("top_k", cfg.top_k);
    e.finish();
  }
  root.opt("seeds", cfg.seeds);
  if (root.has("sweep")) {
    Reader s = root.sub("sweep");
    std::vector<std::vector<std::size_t>> gaps;
    s.req("gaps", gaps);
    for (std::size_t i = 0; i < gaps.size(); ++i) {
      if (gaps[i].size() != 2) {
        throw ConfigError("sweep.gaps[" + std::to_string(i) + "]", "expected [lower, upper]");
      }
      cfg.sweep_gaps.push_back({gaps[i][0], gaps[i][1]});
    }
    s.finish();
  }
  root.opt("out", cfg.out_dir);
  root.finish();
  cfg.validate();
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError("", e.what());
  }
  return parse_config(text);
}

std::string dump_config(const ExperimentConfig& c) {
  const ScenarioSpec& s = c.scenario;
  json doc;
  doc["schema_version"] = kConfigSchemaVersion;
  doc["scenario"] = {{"kind", s.kind},           {"size", s.size},
                     {"floor", s.floor},         {"layers", s.layers},
                     {"horizon", s.horizon},     {"discount", s.discount},
                     {"step_penalty", s.step_penalty}, {"goal_reward", s.goal_reward}};
  doc["monitor"] = {{"lower", c.gap_law.lower}, {"upper", c.gap_law.upper},
                    {"pmf", c.gap_law.pmf},     {"delay", c.channel.delay},
                    {"rho1", c.channel.rho1},   {"rho0", c.channel.rho0}};
  const LearnerConfig& l = c.learner;
  doc["learner"] = {{"epsilon", l.epsilon},
                    {"discount", l.discount},
                    {"critic_lr", l.critic_lr},
                    {"q_init", l.q_init},
                    {"target_rate", l.target_rate},
                    {"lambda_init", l.lambda_init},
                    {"lambda_lr", l.lambda_lr},
                    {"ema_decay", l.ema_decay},
                    {"tau_min", l.tau_min},
                    {"explore_start", l.explore_start},
                    {"explore_end", l.explore_end},
                    {"explore_fraction", l.explore_fraction},
                    {"episodes", l.episodes},
                    {"ratio_refresh", l.ratio_refresh},
                    {"ratio_episodes", l.ratio_episodes},
                    {"dual_every", l.dual_every},
                    {"belief_bins", l.belief_bins},
                    {"time_indexed", l.time_indexed},
                    {"actor_average_min", l.actor_average_min}};
  doc["baselines"] = json::array();
  for (const auto& b : c.baselines) doc["baselines"].push_back(baseline_json(b));
  doc["detector"] = {{"false_alarm_rate", c.false_alarm_rate},
                     {"calibration_episodes", c.calibration_episodes}};
  if (c.threshold) doc["detector"]["threshold"] = *c.threshold;
  doc["eval"] = {{"episodes", c.eval_episodes}, {"top_k", c.top_k}};
  doc["seeds"] = c.seeds;
  if (!c.sweep_gaps.empty()) {
    json gaps = json::array();
    for (const auto& g : c.sweep_gaps) gaps.push_back({g.lower, g.upper});
    doc["sweep"] = {{"gaps", gaps}};
  }
  doc["out"] = c.out_dir;
  return doc.dump(2) + "\n";
}

std::string config_fingerprint(const ExperimentConfig& config) {
  // FNV-1a over the canonical dump, without the output directory so moving
  // outputs does not change the fingerprint.
  ExperimentConfig canon = config;
  canon.out_dir.clear();
  const std::string text = dump_config(canon);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dump_policy(const AugmentedPolicy& p) {
  json doc = {{"format", "tomdec-policy"}, {"version", 1},
              {"num_steps", p.num_steps},  {"num_states", p.num_states},
              {"num_summaries", p.num_summaries}, {"num_actions", p.num_actions},
              {"probs", p.probs}};
  return doc.dump() + "\n";
}

AugmentedPolicy parse_policy(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "policy syntax error at line " + std::to_string(line_of(text, e.byte)));
  }
  Reader r(doc, "policy");
  std::string format;
  int version = 0;
  r.req("format", format);
  r.req("version", version);
  if (format != "tomdec-policy" || version != 1) throw ConfigError("policy.format", "unsupported");
  AugmentedPolicy p;
  r.req("num_steps", p.num_steps);
  r.req("num_states", p.num_states);
  r.req("num_summaries", p.num_summaries);
  r.req("num_actions", p.num_actions);
  r.req("probs", p.probs);
  r.finish();
  if (p.num_steps == 0 || p.num_summaries == 0 || p.num_actions == 0 ||
      p.probs.size() != p.num_steps * p.num_states * p.num_summaries * p.num_actions) {
    throw ConfigError("policy.probs", "size does not match the declared dimensions");
  }
  for (std::size_t row = 0; row * p.num_actions < p.probs.size(); ++row) {
    double sum = 0.0;
    for (std::size_t a = 0; a < p.num_actions; ++a) {
      const double q = p.probs[row * p.num_actions + a];
      if (!(q >= 0.0)) throw ConfigError("policy.probs", "negative or NaN entry");
      sum += q;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ConfigError("policy.probs", "row " + std::to_string(row) + " does not sum to 1");
    }
  }
  return p;
}

AugmentedPolicy load_policy(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError("policy", e.what());
  }
  return parse_policy(text);
}

std::string dump_mdp(const TabularMdp& m) {
  std::vector<int> goal(m.goal.begin(), m.goal.end());
  json doc = {{"format", "tomdec-mdp"},     {"version", 1},
              {"num_states", m.num_states}, {"num_actions", m.num_actions},
              {"horizon", m.horizon},       {"discount", m.discount},
              {"transition", m.transition}, {"reward", m.reward},
              {"initial", m.initial},       {"goal", goal}};
  return doc.dump() + "\n";
}

TabularMdp parse_mdp(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "mdp syntax error at line " + std::to_string(line_of(text, e.byte)));
  }
  Reader r(doc, "mdp");
  std::string format;
  int version = 0;
  r.req("format", format);
  r.req("version", version);
  if (format != "tomdec-mdp" || version != 1) throw ConfigError("mdp.format", "unsupported");
  std::size_t states = 0, actions = 0, horizon = 1;
  double discount = 0.99;
  r.req("num_states", states);
  r.req("num_actions", actions);
  r.req("horizon", horizon);
  r.req("discount", discount);
  TabularMdp m(states, actions, horizon, discount);
  r.req("transition", m.transition);
  r.req("reward", m.reward);
  r.req("initial", m.initial);
  std::vector<int> goal;
  r.opt("goal", goal);
  r.finish();
  m.goal.assign(goal.begin(), goal.end());
  const auto problems = validate_mdp(m);
  if (!problems.empty()) throw ConfigError("mdp." + problems.front().field, problems.front().message);
  m.index_successors();
  return m;
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string fmt_num(double value) {
  if (value == 0.0) return "0";  // folds -0 into 0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

std::string metrics_csv(const MetricsReport& rep, const std::string& fingerprint) {
  std::string out = header(fingerprint);
  out += "episode,seed,return,success,steps,observed,exposure,kl_at_obs,llr_at_obs,top_k_rate,"
         "detected,ttf,censored\n";
  for (std::size_t i = 0; i < rep.episodes.size(); ++i) {
    const EpisodeMetrics& m = rep.episodes[i];
    const double n = static_cast<double>(m.observed);
    out += std::to_string(i) + "," + std::to_string(m.seed) + "," + fmt_num(m.ret) + "," +
           (m.success ? "1" : "0") + "," + std::to_string(m.steps) + "," +
           std::to_string(m.observed) + "," + fmt_num(m.exposure) + "," +
           fmt_num(m.observed ? m.kl_sum / n : 0.0) + "," +
           fmt_num(m.observed ? m.llr_sum / n : 0.0) + "," +
           fmt_num(m.observed ? static_cast<double>(m.top_k_hits) / n : 1.0) + "," +
           (m.detected ? "1" : "0") + "," + std::to_string(m.ttf) + "," +
           (m.censored ? "1" : "0") + "\n";
  }
  out += "mean,," + fmt_num(rep.mean_return) + "," + fmt_num(rep.success_rate) + ",,," +
         fmt_num(rep.exposure) + "," + fmt_num(rep.kl_at_obs) + "," + fmt_num(rep.llr_at_obs) +
         "," + fmt_num(rep.top_k_rate) + "," + fmt_num(rep.detection_rate) + "," +
         fmt_num(rep.mean_ttf) + "," + fmt_num(rep.censored_fraction) + "\n";
  return out;
}

std::string trace_jsonl(const MetricsReport& rep, const std::string& fingerprint) {
  std::string out = json({{"fingerprint", fingerprint}}).dump() + "\n";
  for (const auto& s : rep.steps) {
    json rec = {{"episode", s.episode},     {"time", s.time},
                {"state", s.state},         {"action", s.action},
                {"reward", s.reward},       {"observed", s.observed},
                {"b_hat", s.b_hat},         {"log_ratio", s.log_ratio},
                {"delta", s.delta},         {"psi", s.psi},
                {"cumulative_llr", s.cumulative_llr}};
    out += rec.dump() + "\n";
  }
  return out;
}

std::string compare_csv(const std::vector<CompareRow>& rows, const std::string& fingerprint) {
  std::string out = header(fingerprint);
  out += "method,return,success_rate,kl_at_obs,llr_at_obs,top_k_rate,ttf,exposure,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    out += r.method + "," + fmt_num(r.mean_return) + "," + fmt_num(r.success_rate) + "," +
           fmt_num(r.kl_at_obs) + "," + fmt_num(r.llr_at_obs) + "," + fmt_num(r.top_k_rate) +
           "," + fmt_num(r.mean_ttf) + "," + fmt_num(r.exposure) + "," + err + "\n";
  }
  return out;
}

std::string sweep_csv(const SweepTable& table, const std::string& fingerprint) {
  std::string out = header(fingerprint);
  out += "lower,upper,seed,return,exposure,ttf,lambda\n";
  for (const auto& r : table.rows) {
    out += std::to_string(r.gap.lower) + "," + std::to_string(r.gap.upper) + "," +
           std::to_string(r.seed) + "," + fmt_num(r.ret) + "," + fmt_num(r.exposure) + "," +
           fmt_num(r.ttf) + "," + fmt_num(r.lambda) + "\n";
  }
  return out;
}

std::string bins_csv(const CalibrationBins& bins, const std::string& fingerprint) {
  std::string out = header(fingerprint);
  out += "# slope " + (bins.degenerate ? std::string("undefined") : fmt_num(bins.slope)) +
         " intercept " + (bins.degenerate ? std::string("undefined") : fmt_num(bins.intercept)) +
         (bins.degenerate ? " degenerate" : "") + "\n";
  out += "lo,hi,mean_predicted,mean_realized,count\n";
  for (const auto& b : bins.bins) {
    out += fmt_num(b.lo) + "," + fmt_num(b.hi) + "," + fmt_num(b.mean_predicted) + "," +
           fmt_num(b.mean_realized) + "," + std::to_string(b.count) + "\n";
  }
  return out;
}

std::string training_log_csv(const std::vector<EpisodeLog>& log, const std::string& fingerprint) {
  std::string out = header(fingerprint);
  out += "episode,return,exposure,lambda,exposure_ema,success\n";
  for (const auto& e : log) {
    out += std::to_string(e.episode) + "," + fmt_num(e.ret) + "," + fmt_num(e.exposure) + "," +
           fmt_num(e.lambda) + "," + fmt_num(e.exposure_ema) + "," + (e.success ? "1" : "0") +
           "\n";
  }
  return out;
}

}  // namespace tomdec
