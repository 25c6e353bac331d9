#include "alsim/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

#include "alsim/errors.hpp"
#include "alsim/rng.hpp"

namespace alsim {

std::string_view to_string(AcquisitionMethod m) {
  switch (m) {
    case AcquisitionMethod::Entropy: return "entropy";
    case AcquisitionMethod::Random: return "random";
    case AcquisitionMethod::LeastConfidence: return "least-confidence";
    case AcquisitionMethod::Margin: return "margin";
  }
  return "?";
}

std::string_view to_string(AggregationMode m) {
  switch (m) {
    case AggregationMode::Sum: return "sum";
    case AggregationMode::Mean: return "mean";
    case AggregationMode::Max: return "max";
  }
  return "?";
}

AcquisitionMethod parse_method(std::string_view s) {
  if (s == "entropy") return AcquisitionMethod::Entropy;
  if (s == "random") return AcquisitionMethod::Random;
  if (s == "least-confidence" || s == "least_confidence") return AcquisitionMethod::LeastConfidence;
  if (s == "margin") return AcquisitionMethod::Margin;
  throw ConfigError(fmt::format("unknown acquisition method '{}'", s));
}

AggregationMode parse_aggregation(std::string_view s) {
  if (s == "sum") return AggregationMode::Sum;
  if (s == "mean") return AggregationMode::Mean;
  if (s == "max") return AggregationMode::Max;
  throw ConfigError(fmt::format("unknown aggregation mode '{}'", s));
}

void check_simplex(std::span<const double> p) {
  if (p.empty()) throw ValidationError("empty probability vector");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(fmt::format("invalid probability {}", v));
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw ValidationError(fmt::format("probabilities sum to {:.9f}, not 1", sum));
}

double entropy_bits(std::span<const double> posterior) {
  check_simplex(posterior);
  double h = 0.0;
  for (double v : posterior)
    if (v > 0.0) h -= v * std::log2(v);
  return std::max(0.0, h);
}

double least_confidence_score(std::span<const double> posterior) {
  check_simplex(posterior);
  return 1.0 - *std::max_element(posterior.begin(), posterior.end());
}

double margin_score(std::span<const double> posterior) {
  check_simplex(posterior);
  double top1 = -1.0, top2 = 0.0;
  for (double v : posterior) {
    if (v > top1) {
      top2 = std::max(top2, top1);
      top1 = v;
    } else if (v > top2) {
      top2 = v;
    }
  }
  return 1.0 - (top1 - top2);
}

double detection_uncertainty(const Detection& det, AcquisitionMethod method, bool include_background) {
  if (!det.has_full_posterior)
    throw ValidationError(fmt::format(
        "detection {}/{} carries no class-probability vector; uncertainty acquisition needs full posteriors",
        det.scene_id, det.candidate_id));
  std::array<double, kNumOutputs> full{};
  std::span<const double> p(det.posterior.probs);
  if (include_background) {
    const double fg = 1.0 - det.posterior.background_prob;
    for (std::size_t k = 0; k < kNumClasses; ++k) full[k] = det.posterior.probs[k] * fg;
    full[kBackgroundIndex] = det.posterior.background_prob;
    p = full;
  }
  switch (method) {
    case AcquisitionMethod::Entropy: return entropy_bits(p);
    case AcquisitionMethod::LeastConfidence: return least_confidence_score(p);
    case AcquisitionMethod::Margin: return margin_score(p);
    case AcquisitionMethod::Random: break;
  }
  throw ConfigError("random acquisition has no per-detection score");
}

AcquisitionScore score_scene(std::span<const Detection> detections, AggregationMode mode,
                             SceneId scene_id, AcquisitionMethod method, bool include_background) {
  AcquisitionScore s;
  s.scene_id = detections.empty() ? scene_id : detections.front().scene_id;
  s.method = method;
  s.num_detections = detections.size();
  double sum = 0.0, mx = 0.0;
  for (const Detection& d : detections) {
    if (d.scene_id != s.scene_id)
      throw ValidationError(fmt::format("score_scene got detections from scenes {} and {}", s.scene_id, d.scene_id));
    const double u = detection_uncertainty(d, method, include_background);
    sum += u;
    mx = std::max(mx, u);
  }
  switch (mode) {
    case AggregationMode::Sum: s.score = sum; break;
    case AggregationMode::Mean: s.score = detections.empty() ? 0.0 : sum / static_cast<double>(detections.size()); break;
    case AggregationMode::Max: s.score = mx; break;
  }
  return s;
}

std::vector<SceneId> select_top_k(std::span<const AcquisitionScore> scores, std::size_t k) {
  if (k > scores.size())
    throw SelectionError(fmt::format("cannot select {} scenes from {} scored", k, scores.size()));
  std::vector<const AcquisitionScore*> ptrs;
  ptrs.reserve(scores.size());
  for (const auto& s : scores) ptrs.push_back(&s);
  auto better = [](const AcquisitionScore* a, const AcquisitionScore* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->scene_id < b->scene_id;
  };
  std::partial_sort(ptrs.begin(), ptrs.begin() + static_cast<std::ptrdiff_t>(k), ptrs.end(), better);
  std::vector<SceneId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(ptrs[i]->scene_id);
  return out;
}

std::vector<SceneId> random_select(std::span<const SceneId> unlabeled, std::size_t k, std::uint64_t seed) {
  if (k > unlabeled.size())
    throw SelectionError(fmt::format("cannot select {} scenes from {} unlabeled", k, unlabeled.size()));
  std::vector<SceneId> ids(unlabeled.begin(), unlabeled.end());
  std::sort(ids.begin(), ids.end());
  Rng rng(derive_seed(seed, {stream::kRandomSelect}));
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(k);
  return ids;
}

void write_scores(std::ostream& os, std::span<const AcquisitionScore> scores) {
  os << "scene_id\tmethod\tscore\tnum_detections\n";
  for (const auto& s : scores)
    os << fmt::format("{}\t{}\t{:.17g}\t{}\n", s.scene_id, to_string(s.method), s.score, s.num_detections);
}

void write_scores(const std::filesystem::path& path, std::span<const AcquisitionScore> scores) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  write_scores(os, scores);
}

}  // namespace alsim
