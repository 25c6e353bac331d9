// alsim: command-line driver for the active learning simulator.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "alsim/harness.hpp"
#include "alsim/ingest.hpp"
#include "alsim/json_io.hpp"

namespace fs = std::filesystem;
using namespace alsim;

namespace {

struct StageError : std::runtime_error {
  StageError(std::string stage, const std::string& what) : std::runtime_error(what), stage(std::move(stage)) {}
  std::string stage;
};

// Runs `fn`, tagging any library error with `stage`.
template <typename F>
auto staged(const std::string& stage, F&& fn) {
  try {
    return fn();
  } catch (const RunError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, fmt::format("{} error: {}", e.kind(), e.what()));
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

ExperimentConfig config_from(const std::string& path) {
  return staged("config", [&] { return path.empty() ? ExperimentConfig{} : load_config(path); });
}

fs::path out_dir(const std::string& flag) { return flag.empty() ? output_directory("alsim_out") : fs::path(flag); }

ReportFormat parse_format(const std::string& s) {
  if (s == "text") return ReportFormat::Text;
  if (s == "json") return ReportFormat::Json;
  return ReportFormat::Both;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"alsim: pool-based active learning simulator for long-tailed 3D detection"};
  app.require_subcommand(1);

  // generate
  std::string gen_config, gen_out;
  std::optional<std::uint64_t> gen_seed;
  auto* generate = app.add_subcommand("generate", "Generate a synthetic dataset file");
  generate->add_option("--config", gen_config, "Config file");
  generate->add_option("--seed", gen_seed, "Master seed (overrides [run] seed)");
  generate->add_option("-o,--out", gen_out, "Dataset file to write")->required();

  // run
  std::string run_method = "entropy", run_config, run_out, run_format = "both";
  std::optional<std::uint64_t> run_seed;
  int replicas = 1;
  std::optional<int> stop_after;
  bool no_models = false;
  auto* run = app.add_subcommand("run", "Run the multi-round protocol");
  run->add_option("--method", run_method, "entropy | random | least-confidence | margin");
  run->add_option("--seed", run_seed, "Master seed (overrides [run] seed)");
  run->add_option("--config", run_config, "Config file");
  run->add_option("--replicas", replicas, "Number of consecutive seeds to run")->check(CLI::PositiveNumber);
  run->add_option("-o,--out", run_out, "Output directory (default $ALSIM_OUTPUT_DIR or ./alsim_out)");
  run->add_option("--format", run_format, "text | json | both")->check(CLI::IsMember({"text", "json", "both"}));
  run->add_option("--stop-after", stop_after, "Stop after checkpointing this round (0-based)");
  run->add_flag("--no-models", no_models, "Skip per-round model files");

  // resume
  std::string resume_path, resume_format = "both";
  auto* resume_cmd = app.add_subcommand("resume", "Continue an interrupted run from its checkpoint");
  resume_cmd->add_option("checkpoint", resume_path, "checkpoint.json or the run directory")->required();
  resume_cmd->add_option("--format", resume_format, "text | json | both")
      ->check(CLI::IsMember({"text", "json", "both"}));

  // compare
  std::string cmp_a, cmp_b, cmp_out;
  bool cmp_plots = false;
  auto* compare_cmd = app.add_subcommand("compare", "Compare two run reports cell by cell");
  compare_cmd->add_option("report_a", cmp_a)->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("report_b", cmp_b)->required()->check(CLI::ExistingFile);
  compare_cmd->add_flag("--plots", cmp_plots, "Write SVG charts");
  compare_cmd->add_option("-o,--out", cmp_out, "Directory for plots and comparison.txt");

  // evaluate
  std::string ev_gt, ev_results, ev_json;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a results file against annotations");
  evaluate_cmd->add_option("annotations", ev_gt, "Annotation file")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("results", ev_results, "Results file")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--json", ev_json, "Also write the metrics as JSON");

  // report
  std::vector<std::string> rep_paths;
  std::string rep_out;
  auto* report_cmd = app.add_subcommand("report", "Render tables (and charts for two reports)");
  report_cmd->add_option("reports", rep_paths, "One or two report.json files")
      ->required()
      ->expected(1, 2)
      ->check(CLI::ExistingFile);
  report_cmd->add_option("-o,--out", rep_out, "Output directory");

  // export
  std::string exp_dataset, exp_out;
  auto* export_cmd = app.add_subcommand("export", "Write a dataset file as external annotations");
  export_cmd->add_option("dataset", exp_dataset)->required()->check(CLI::ExistingFile);
  export_cmd->add_option("-o,--out", exp_out, "Annotation file to write")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      ExperimentConfig cfg = config_from(gen_config);
      if (gen_seed) cfg.seed = *gen_seed;
      staged("generate", [&] {
        const GenConfig g = cfg.effective_gen();
        const Dataset data = generate_dataset(g);
        write_dataset(gen_out, g, data);
        std::uint64_t objects = 0;
        for (const auto& s : data) objects += s.objects.size();
        fmt::print("wrote {} scenes, {} objects to {}\n", data.size(), objects, gen_out);
        return 0;
      });
    } else if (*run) {
      ExperimentConfig cfg = config_from(run_config);
      if (run_seed) cfg.seed = *run_seed;
      const AcquisitionMethod method = staged("config", [&] { return parse_method(run_method); });
      const fs::path base = out_dir(run_out);
      std::vector<RunReport> reports;
      for (int r = 0; r < replicas; ++r) {
        ExperimentConfig c = cfg;
        c.seed = cfg.seed + static_cast<std::uint64_t>(r);
        const fs::path dir = replicas == 1 ? base : base / fmt::format("{}_seed{}", to_string(method), c.seed);
        RunOptions opt;
        opt.output_dir = dir;
        opt.write_models = !no_models;
        opt.stop_after_round = stop_after;
        RunReport rep = run_experiment(c, method, opt);
        staged("report", [&] { return emit_report(rep, parse_format(run_format), dir); });
        std::cout << format_report_table(rep);
        if (!rep.complete) fmt::print("stopped; continue with: alsim resume {}\n", (dir / kCheckpointFile).string());
        reports.push_back(std::move(rep));
      }
      if (replicas > 1) {
        const std::string agg = format_aggregate(aggregate(reports));
        std::cout << '\n' << agg;
        staged("report", [&] {
          std::ofstream(base / fmt::format("aggregate_{}.txt", to_string(method))) << agg;
          return 0;
        });
      }
    } else if (*resume_cmd) {
      fs::path cp = resume_path;
      if (fs::is_directory(cp)) cp /= kCheckpointFile;
      RunReport rep = resume(cp);
      staged("report", [&] { return emit_report(rep, parse_format(resume_format), cp.parent_path()); });
      std::cout << format_report_table(rep);
    } else if (*compare_cmd) {
      const RunReport a = staged("load", [&] { return read_report(cmp_a); });
      const RunReport b = staged("load", [&] { return read_report(cmp_b); });
      const ComparisonSummary s = staged("compare", [&] { return compare(a, b); });
      const std::string table = format_comparison_table(a, b, s);
      std::cout << table;
      if (cmp_plots || !cmp_out.empty()) {
        const fs::path dir = out_dir(cmp_out);
        staged("report", [&] {
          fs::create_directories(dir);
          std::ofstream(dir / "comparison.txt") << table;
          if (cmp_plots)
            for (const auto& p : emit_plots(s, dir)) fmt::print("wrote {}\n", p.string());
          return 0;
        });
      }
    } else if (*evaluate_cmd) {
      const auto gt = staged("load", [&] { return load_annotations(ev_gt); });
      const auto res = staged("load", [&] { return load_results(ev_results); });
      const EvalReport rep = staged("evaluate", [&] { return evaluate_external(gt, res); });
      if (gt.dropped_count() > 0)
        fmt::print(stderr, "note: {} annotation records with unknown classes were skipped\n", gt.dropped_count());
      std::cout << format_eval_report(rep);
      if (!ev_json.empty())
        staged("report", [&] {
          std::ofstream os(ev_json);
          if (!os) throw IoError(fmt::format("cannot open '{}' for writing", ev_json));
          os << json(rep).dump(1) << '\n';
          return 0;
        });
    } else if (*report_cmd) {
      std::vector<RunReport> reps;
      for (const auto& p : rep_paths) reps.push_back(staged("load", [&] { return read_report(p); }));
      const fs::path dir = out_dir(rep_out);
      if (reps.size() == 1) {
        staged("report", [&] { return emit_report(reps[0], ReportFormat::Text, dir); });
        std::cout << format_report_table(reps[0]);
      } else {
        const ComparisonSummary s = staged("compare", [&] { return compare(reps[0], reps[1]); });
        const std::string table = format_comparison_table(reps[0], reps[1], s);
        std::cout << table;
        staged("report", [&] {
          fs::create_directories(dir);
          std::ofstream(dir / "comparison.txt") << table;
          for (const auto& p : emit_plots(s, dir)) fmt::print("wrote {}\n", p.string());
          return 0;
        });
      }
    } else if (*export_cmd) {
      staged("export", [&] {
        const auto loaded = read_dataset(fs::path(exp_dataset));
        export_annotations(loaded.scenes, exp_out);
        fmt::print("wrote {} samples to {}\n", loaded.scenes.size(), exp_out);
        return 0;
      });
    }
  } catch (const RunError& e) {
    fmt::print(stderr, "alsim: error [stage={} round={}]: {}\n", e.failure().stage, e.failure().round_index,
               e.failure().message);
    return 2;
  } catch (const StageError& e) {
    fmt::print(stderr, "alsim: error [stage={}]: {}\n", e.stage, e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "alsim: error [stage=unknown]: {}\n", e.what());
    return 1;
  }
  return 0;
}
