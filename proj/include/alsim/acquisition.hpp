#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "alsim/detector.hpp"
#include "alsim/types.hpp"

namespace alsim {

enum class AcquisitionMethod { Entropy, Random, LeastConfidence, Margin };
enum class AggregationMode { Sum, Mean, Max };

std::string_view to_string(AcquisitionMethod m);
std::string_view to_string(AggregationMode m);
/// Accepts "entropy", "random", "least-confidence"/"least_confidence", "margin".
AcquisitionMethod parse_method(std::string_view s);
AggregationMode parse_aggregation(std::string_view s);

struct AcquisitionConfig {
  AcquisitionMethod method = AcquisitionMethod::Entropy;
  AggregationMode aggregation = AggregationMode::Sum;
  /// Score over the 11-way posterior (foreground scaled by 1 - background,
  /// plus background) instead of the renormalized foreground posterior.
  bool include_background = false;

  bool operator==(const AcquisitionConfig&) const = default;
};

struct AcquisitionScore {
  SceneId scene_id = 0;
  double score = 0.0;
  AcquisitionMethod method = AcquisitionMethod::Entropy;
  std::size_t num_detections = 0;

  bool operator==(const AcquisitionScore&) const = default;
};

/// Throws ValidationError unless `p` is a simplex (entries >= 0, sum within
/// 1e-6 of one).
void check_simplex(std::span<const double> p);

/// Shannon entropy in bits, with 0 log 0 = 0.
double entropy_bits(std::span<const double> posterior);
/// 1 - max p.
double least_confidence_score(std::span<const double> posterior);
/// 1 - (top1 - top2).
double margin_score(std::span<const double> posterior);

/// Per-detection uncertainty under an uncertainty method. Throws
/// ValidationError for detections without a full posterior.
double detection_uncertainty(const Detection& det, AcquisitionMethod method, bool include_background);

/// Aggregates per-detection uncertainties of one scene. `scene_id` is used
/// when the list is empty. Throws ValidationError on mixed scene ids.
AcquisitionScore score_scene(std::span<const Detection> detections, AggregationMode mode,
                             SceneId scene_id, AcquisitionMethod method = AcquisitionMethod::Entropy,
                             bool include_background = false);

/// Highest scores first; ties by ascending scene id. Throws SelectionError if
/// k exceeds the number of scores.
std::vector<SceneId> select_top_k(std::span<const AcquisitionScore> scores, std::size_t k);

/// Uniform sample without replacement, deterministic under seed and
/// independent of the input order.
std::vector<SceneId> random_select(std::span<const SceneId> unlabeled, std::size_t k, std::uint64_t seed);

/// Columnar text dump: scene_id, method, score, num_detections.
void write_scores(std::ostream& os, std::span<const AcquisitionScore> scores);
void write_scores(const std::filesystem::path& path, std::span<const AcquisitionScore> scores);

}  // namespace alsim
