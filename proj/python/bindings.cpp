// Python bindings for the core library.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tomdec/baselines.hpp"
#include "tomdec/environments.hpp"
#include "tomdec/harness.hpp"
#include "tomdec/io.hpp"
#include "tomdec/learner.hpp"
#include "tomdec/monitoring.hpp"

namespace py = pybind11;
using namespace tomdec;

namespace {

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["mean_return"] = r.mean_return;
  d["success_rate"] = r.success_rate;
  d["kl_at_obs"] = r.kl_at_obs;
  d["llr_at_obs"] = r.llr_at_obs;
  d["top_k_rate"] = r.top_k_rate;
  d["mean_ttf"] = r.mean_ttf;
  d["detection_rate"] = r.detection_rate;
  d["censored_fraction"] = r.censored_fraction;
  d["exposure"] = r.exposure;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Monitoring-aware policies under intermittent supervision";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FilterContradiction>(m, "FilterContradiction", PyExc_RuntimeError);

  py::class_<GapLaw>(m, "GapLaw")
      .def_static("uniform", &GapLaw::uniform, py::arg("lower"), py::arg("upper"))
      .def_readonly("lower", &GapLaw::lower)
      .def_readonly("upper", &GapLaw::upper)
      .def_readonly("pmf", &GapLaw::pmf)
      .def("prob", &GapLaw::prob);

  py::class_<TokenChannel>(m, "TokenChannel")
      .def(py::init([](std::size_t delay, double rho1, double rho0) {
             TokenChannel c{delay, rho1, rho0};
             c.validate();
             return c;
           }),
           py::arg("delay") = 1, py::arg("rho1") = 1.0, py::arg("rho0") = 0.0)
      .def_static("noiseless", &TokenChannel::noiseless, py::arg("delay") = 1)
      .def_readonly("delay", &TokenChannel::delay)
      .def_readonly("rho1", &TokenChannel::rho1)
      .def_readonly("rho0", &TokenChannel::rho0);

  m.def("uniform_hazard", [](std::size_t lower, std::size_t upper) {
    return uniform_hazard(lower, upper).hazard;
  });
  m.def("hazard_from_gap_law", [](const GapLaw& law) { return hazard_from_gap_law(law).hazard; });

  py::class_<MonitorModel>(m, "MonitorModel")
      .def_static("from_gap_law", &MonitorModel::from_gap_law, py::arg("law"), py::arg("channel"),
                  py::arg("belief_bins") = 10)
      .def("num_summaries", &MonitorModel::num_summaries)
      .def_property_readonly("hazard", [](const MonitorModel& mm) { return mm.hazard.hazard; });

  py::class_<TabularPolicy>(m, "TabularPolicy")
      .def_readonly("num_states", &TabularPolicy::num_states)
      .def_readonly("num_actions", &TabularPolicy::num_actions)
      .def("row", [](const TabularPolicy& p, StateId s) {
        const auto r = p.row(s);
        return std::vector<double>(r.begin(), r.end());
      });

  py::class_<AugmentedPolicy>(m, "AugmentedPolicy")
      .def_readonly("num_states", &AugmentedPolicy::num_states)
      .def_readonly("num_summaries", &AugmentedPolicy::num_summaries)
      .def_readonly("num_actions", &AugmentedPolicy::num_actions)
      .def("row", [](const AugmentedPolicy& p, StateId s, std::size_t x) {
        const auto r = p.row(s, x);
        return std::vector<double>(r.begin(), r.end());
      })
      .def("to_json", &dump_policy)
      .def_static("from_json", &parse_policy);

  py::class_<TabularMdp>(m, "TabularMdp")
      .def_readonly("num_states", &TabularMdp::num_states)
      .def_readonly("num_actions", &TabularMdp::num_actions)
      .def_readonly("horizon", &TabularMdp::horizon)
      .def_readonly("discount", &TabularMdp::discount);

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("mdp", &Scenario::mdp)
      .def_readonly("reference", &Scenario::reference);

  m.def("perimeter_lap", &build_perimeter_lap, py::arg("size") = 8, py::arg("floor") = 0.01);
  m.def("avoid_zone", &build_avoid_zone, py::arg("size") = 8, py::arg("floor") = 0.01,
        py::arg("layers") = 1);

  m.def("soft_value", [](const std::vector<double>& q, const std::vector<double>& prior,
                         double tau) { return soft_value(q, prior, tau); });
  m.def("gibbs_policy", [](const std::vector<double>& q, const std::vector<double>& prior,
                           double tau) { return gibbs_policy(q, prior, tau); });

  py::class_<LearnerConfig>(m, "LearnerConfig")
      .def(py::init<>())
      .def_readwrite("epsilon", &LearnerConfig::epsilon)
      .def_readwrite("discount", &LearnerConfig::discount)
      .def_readwrite("critic_lr", &LearnerConfig::critic_lr)
      .def_readwrite("lambda_init", &LearnerConfig::lambda_init)
      .def_readwrite("lambda_lr", &LearnerConfig::lambda_lr)
      .def_readwrite("tau_min", &LearnerConfig::tau_min)
      .def_readwrite("episodes", &LearnerConfig::episodes)
      .def_readwrite("seed", &LearnerConfig::seed)
      .def("validate", &LearnerConfig::validate);

  m.def(
      "train",
      [](const Scenario& sc, const GapLaw& law, const TokenChannel& ch, const LearnerConfig& cfg) {
        py::gil_scoped_release release;
        TrainResult res = train_online(sc.mdp, sc.reference, law, ch, cfg);
        return std::make_pair(std::move(res.policy), res.dual.lambda);
      },
      py::arg("scenario"), py::arg("law"), py::arg("channel"), py::arg("config"),
      "Train the learner; returns (policy, final lambda).");

  m.def(
      "calibrate_threshold",
      [](const Scenario& sc, const MonitorModel& model, double rate, std::size_t episodes,
         std::uint64_t seed) {
        return calibrate_threshold(sc.mdp, sc.reference, model, rate, episodes, seed);
      },
      py::arg("scenario"), py::arg("model"), py::arg("false_alarm_rate") = 0.05,
      py::arg("episodes") = 2000, py::arg("seed") = 1);

  m.def(
      "evaluate",
      [](const Scenario& sc, const AugmentedPolicy& pi, const MonitorModel& model,
         std::size_t episodes, double threshold, std::size_t top_k, std::uint64_t seed) {
        EvalSettings es;
        es.episodes = episodes;
        es.threshold = threshold;
        es.top_k = top_k;
        es.seed = seed;
        MetricsReport rep;
        {
          py::gil_scoped_release release;
          rep = evaluate(sc.mdp, pi, sc.reference, model, es);
        }
        return report_dict(rep);
      },
      py::arg("scenario"), py::arg("policy"), py::arg("model"), py::arg("episodes") = 1000,
      py::arg("threshold") = kMinDetectionThreshold, py::arg("top_k") = 3, py::arg("seed") = 1);

  m.def(
      "baseline",
      [](const std::string& kind, const Scenario& sc, const MonitorModel& model,
         const LearnerConfig& cfg) {
        BaselineSpec spec;
        spec.kind = baseline_kind_from_string(kind);
        return build_baseline(spec, sc.mdp, sc.reference, model, cfg);
      },
      py::arg("kind"), py::arg("scenario"), py::arg("model"), py::arg("config") = LearnerConfig{});

  m.def("config_fingerprint", [](const std::string& text) {
    return config_fingerprint(parse_config(text));
  });
  m.def("validate_config", [](const std::string& text) { parse_config(text); });
}
