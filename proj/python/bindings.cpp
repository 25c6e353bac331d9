#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "alsim/acquisition.hpp"
#include "alsim/harness.hpp"
#include "alsim/ingest.hpp"
#include "alsim/pools.hpp"
#include "alsim/synthgen.hpp"

namespace py = pybind11;
using namespace alsim;

namespace {

py::dict class_metrics_dict(const ClassMetrics& m) {
  py::dict d;
  d["ap"] = m.ap;
  d["ap_per_threshold"] = m.ap_per_threshold;
  d["num_ground_truth"] = m.num_ground_truth;
  d["num_detections"] = m.num_detections;
  if (m.tp) {
    d["tp"] = py::dict(py::arg("ate") = m.tp->ate, py::arg("ase") = m.tp->ase, py::arg("aoe") = m.tp->aoe,
                       py::arg("ave") = m.tp->ave, py::arg("aae") = m.tp->aae);
  } else {
    d["tp"] = py::none();
  }
  return d;
}

py::dict eval_dict(const EvalReport& r) {
  py::dict d;
  for (Metric m : kAllMetrics) d[py::str(std::string(to_string(m)))] = metric_value(r, m);
  py::dict per_class;
  for (ClassId c : kAllClasses)
    per_class[py::str(std::string(detection_name(c)))] = class_metrics_dict(r.per_class[index_of(c)]);
  d["per_class"] = per_class;
  return d;
}

py::object json_loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

ExperimentConfig config_from(const std::string& text, std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg = parse_config(text);
  if (seed) cfg.seed = *seed;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_alsim, m) {
  m.doc() = "Native core of the alsim active-learning simulator";

  // Instances carry the error kind ("config", "io", ...) as `.kind`.
  static PyObject* base_error = PyErr_NewException("alsim._alsim.AlsimError", PyExc_RuntimeError, nullptr);
  m.attr("AlsimError") = py::handle(base_error);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(base_error)(std::string(e.kind()) + ": " + e.what());
      exc.attr("kind") = e.kind();
      PyErr_SetObject(base_error, exc.ptr());
    }
  });

  m.def("class_names", [] {
    std::vector<std::string> out;
    for (ClassId c : kAllClasses) out.emplace_back(detection_name(c));
    return out;
  });
  m.def("class_frequency_table", [] {
    const ClassProbs t = class_frequency_table();
    return std::vector<double>(t.begin(), t.end());
  });

  m.def("entropy_bits", [](const std::vector<double>& p) { return entropy_bits(p); }, py::arg("posterior"));
  m.def("least_confidence_score", [](const std::vector<double>& p) { return least_confidence_score(p); },
        py::arg("posterior"));
  m.def("margin_score", [](const std::vector<double>& p) { return margin_score(p); }, py::arg("posterior"));
  m.def("random_select",
        [](const std::vector<SceneId>& ids, std::size_t k, std::uint64_t seed) { return random_select(ids, k, seed); },
        py::arg("unlabeled"), py::arg("k"), py::arg("seed"));

  m.def("weeks_to_fraction", [](double w) { return weeks_to_fraction(w); }, py::arg("weeks"));
  m.def("round_scene_count", &round_scene_count, py::arg("x"));

  m.def(
      "generate_dataset",
      [](const std::string& config_text, std::optional<std::uint64_t> seed, const std::filesystem::path& out) {
        const GenConfig g = config_from(config_text, seed).effective_gen();
        const Dataset d = generate_dataset(g);
        write_dataset(out, g, d);
        const auto counts = class_counts(d);
        return std::vector<std::uint64_t>(counts.begin(), counts.end());
      },
      py::arg("config_text") = "", py::arg("seed") = py::none(), py::arg("out"),
      "Writes a dataset file and returns per-class object counts.");

  m.def(
      "run_experiment",
      [](const std::string& config_text, const std::string& method, std::optional<std::uint64_t> seed,
         std::optional<std::filesystem::path> output_dir, bool write_models, std::optional<int> stop_after_round) {
        const ExperimentConfig cfg = config_from(config_text, seed);
        RunOptions opts;
        opts.output_dir = output_dir;
        opts.write_models = write_models;
        opts.write_scores = output_dir.has_value();
        opts.stop_after_round = stop_after_round;
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg, parse_method(method), opts);
        }
        if (output_dir) emit_report(r, ReportFormat::Both, *output_dir);
        return json_loads(report_json(r));
      },
      py::arg("config_text") = "", py::arg("method") = "entropy", py::arg("seed") = py::none(),
      py::arg("output_dir") = py::none(), py::arg("write_models") = false, py::arg("stop_after_round") = py::none(),
      "Runs every round and returns the report as a dict.");

  m.def(
      "resume",
      [](const std::filesystem::path& dir) {
        RunOptions opts;
        opts.output_dir = dir;
        RunReport r;
        {
          py::gil_scoped_release release;
          r = resume(dir / kCheckpointFile, opts);
        }
        emit_report(r, ReportFormat::Both, dir);
        return json_loads(report_json(r));
      },
      py::arg("output_dir"));

  m.def(
      "compare_reports",
      [](const std::filesystem::path& a, const std::filesystem::path& b) {
        const ComparisonSummary s = compare(read_report(a), read_report(b));
        py::dict d;
        d["wins_a"] = s.wins_a;
        d["wins_b"] = s.wins_b;
        d["total_cells"] = s.total_cells;
        d["final_ap_gap_a"] = s.a.final_ap_gap;
        d["final_ap_gap_b"] = s.b.final_ap_gap;
        return d;
      },
      py::arg("report_a"), py::arg("report_b"));

  m.def("export_annotations",
        [](const std::filesystem::path& dataset, const std::filesystem::path& out) {
          export_annotations(read_dataset(dataset).scenes, out);
        },
        py::arg("dataset"), py::arg("out"));

  m.def(
      "evaluate_external",
      [](const std::filesystem::path& annotations, const std::filesystem::path& results) {
        return eval_dict(evaluate_external(load_annotations(annotations), load_results(results)));
      },
      py::arg("annotations"), py::arg("results"));
}
