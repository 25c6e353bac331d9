#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alsim/acquisition.hpp"
#include "alsim/detector.hpp"
#include "alsim/errors.hpp"
#include "alsim/metrics.hpp"
#include "alsim/pools.hpp"
#include "alsim/synthgen.hpp"

namespace alsim {

inline constexpr int kReportSchemaVersion = 1;

/// Everything a run depends on.
struct ExperimentConfig {
  GenConfig gen;
  TrainConfig train;
  BudgetSchedule budget;
  AcquisitionConfig acquisition;
  std::size_t validation_count = 150;
  std::uint64_t seed = 0;
  /// When false the generator seed is derived from the master seed, so
  /// replicas draw different datasets.
  bool fixed_dataset_seed = false;
  /// Load scenes from a dataset file instead of generating them.
  std::optional<std::filesystem::path> dataset_path;

  void validate() const;
  /// The generator configuration actually used for this master seed.
  GenConfig effective_gen() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Reads a key-value config with [synthgen], [train], [budget],
/// [acquisition] and [run] sections. Unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

struct RoundResult {
  int round_index = 0;
  double pool_fraction = 0.0;
  std::size_t labeled_scenes = 0;
  /// Scenes that entered the labeled pool for this round (the initial random
  /// pool at round 0).
  std::vector<SceneId> selected_scene_ids;
  /// Cumulative labeled objects per class.
  std::array<std::uint64_t, kNumClasses> class_counts{};
  EvalReport eval;
  /// Kept out of the canonical report so reruns stay byte-identical.
  double wall_clock_seconds = 0.0;

  bool operator==(const RoundResult& o) const;
};

struct RunFailure {
  int round_index = 0;
  std::string stage;
  std::string message;
  bool operator==(const RunFailure&) const = default;
};

struct RunReport {
  int schema_version = kReportSchemaVersion;
  AcquisitionMethod method = AcquisitionMethod::Entropy;
  std::uint64_t seed = 0;
  ExperimentConfig config;
  std::vector<RoundResult> rounds;
  bool complete = false;
  std::optional<RunFailure> failure;

  bool operator==(const RunReport&) const = default;
};

/// Raised when a stage fails; carries the partial report.
class RunError : public Error {
 public:
  RunError(RunReport partial, const RunFailure& f);
  const char* kind() const noexcept override { return "run"; }
  const RunReport& partial() const { return partial_; }
  const RunFailure& failure() const { return *partial_.failure; }

 private:
  RunReport partial_;
};

struct RunOptions {
  /// Directory for the checkpoint, per-round model files and score dumps.
  std::optional<std::filesystem::path> output_dir;
  bool write_models = true;
  bool write_scores = true;
  /// Stop (as if interrupted) once this round is checkpointed.
  std::optional<int> stop_after_round;
};

/// Runs the multi-round protocol. All randomness is derived from
/// config.seed; the acquisition method only affects selection.
RunReport run_experiment(const ExperimentConfig& config, AcquisitionMethod method,
                         const RunOptions& options = {});

/// Continues a run from `output_dir/checkpoint.json`.
RunReport resume(const std::filesystem::path& checkpoint_path, const RunOptions& options = {});

inline constexpr const char* kCheckpointFile = "checkpoint.json";

// ---------------------------------------------------------------------------
// Comparison

enum class Metric { mAP, mATE, mASE, mAOE, mAVE, mAAE, NDS };
inline constexpr std::array<Metric, 7> kAllMetrics = {Metric::mAP,  Metric::mATE, Metric::mASE, Metric::mAOE,
                                                      Metric::mAVE, Metric::mAAE, Metric::NDS};
std::string_view to_string(Metric m);
bool higher_is_better(Metric m);
double metric_value(const EvalReport& r, Metric m);

struct MetricCell {
  int round_index = 0;
  Metric metric = Metric::mAP;
  double value_a = 0.0;
  double value_b = 0.0;
  int winner = -1;  // 0 for a, 1 for b, -1 for a tie
};

struct MethodSeries {
  std::string method;
  std::vector<double> pool_fraction;
  std::vector<std::array<double, kNumClasses>> class_ap;  // per round
  /// Per round, cumulative labeled objects per class normalized to sum 1.
  std::vector<std::array<double, kNumClasses>> class_distribution;
  double final_ap_gap = 0.0;  // best minus worst class AP at the last round
};

struct ComparisonSummary {
  std::vector<MetricCell> cells;
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t total_cells = 0;
  MethodSeries a, b;
};

/// Throws ComparisonError when schedules or seeds differ.
ComparisonSummary compare(const RunReport& a, const RunReport& b);

// ---------------------------------------------------------------------------
// Output

/// Round | Pool | mAP | mATE | mASE | mAOE | mAVE | mAAE | NDS
std::string format_report_table(const RunReport& report);
/// Paired method columns per metric, plus the per-class object-count table.
std::string format_comparison_table(const RunReport& a, const RunReport& b, const ComparisonSummary& s);
std::string format_eval_report(const EvalReport& report);

std::string report_json(const RunReport& report);
RunReport read_report(const std::filesystem::path& path);

enum class ReportFormat { Text, Json, Both };
/// Writes report.txt / report.json (and timings.json) into `dir`.
std::vector<std::filesystem::path> emit_report(const RunReport& report, ReportFormat format,
                                               const std::filesystem::path& dir);
/// One SVG per class (AP vs pool fraction, both methods) and one stacked
/// class-distribution chart per method.
std::vector<std::filesystem::path> emit_plots(const ComparisonSummary& summary,
                                              const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Replicas

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};
struct ReplicaAggregate {
  std::string method;
  std::size_t replicas = 0;
  /// [round][metric]
  std::vector<std::array<MeanStd, 7>> rounds;
};
ReplicaAggregate aggregate(const std::vector<RunReport>& reports);
std::string format_aggregate(const ReplicaAggregate& agg);

/// Output directory: $ALSIM_OUTPUT_DIR when set, else `fallback`.
std::filesystem::path output_directory(const std::filesystem::path& fallback);

}  // namespace alsim
