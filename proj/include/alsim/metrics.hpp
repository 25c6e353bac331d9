#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "alsim/detector.hpp"
#include "alsim/types.hpp"

namespace alsim {

/// Center-distance match thresholds in meters, and the one used for the
/// true-positive error metrics.
inline constexpr std::array<double, 4> kMatchThresholds = {0.5, 1.0, 2.0, 4.0};
inline constexpr double kTpErrorThreshold = 2.0;
inline constexpr double kMinRecall = 0.1;
inline constexpr double kMinPrecision = 0.1;

struct MatchEntry {
  std::size_t detection_index = 0;  // into the detection span given to match()
  double confidence = 0.0;
  bool is_true_positive = false;
  std::optional<ObjectId> matched_object;
};

struct MatchResult {
  ClassId cls = ClassId::Car;
  double threshold_m = 0.0;
  /// Detections of the class in the order they were matched (non-increasing
  /// confidence, ties by scene id then candidate id).
  std::vector<MatchEntry> entries;
  std::size_t num_ground_truth = 0;
};

struct TpErrors {
  double ate = 0.0;  // m
  double ase = 0.0;  // 1 - aligned IoU
  double aoe = 0.0;  // rad
  double ave = 0.0;  // m/s
  double aae = 0.0;  // 1 - attribute accuracy

  bool operator==(const TpErrors&) const = default;
};

struct ClassMetrics {
  std::array<double, kMatchThresholds.size()> ap_per_threshold{};
  double ap = 0.0;  // mean over thresholds
  std::size_t num_ground_truth = 0;
  std::size_t num_detections = 0;
  std::optional<TpErrors> tp;  // absent when there is no true positive at 2 m

  bool operator==(const ClassMetrics&) const = default;
};

struct EvalReport {
  std::array<ClassMetrics, kNumClasses> per_class{};
  double mAP = 0.0;
  double mATE = 1.0;
  double mASE = 1.0;
  double mAOE = 1.0;
  double mAVE = 1.0;
  double mAAE = 1.0;
  double NDS = 0.0;

  bool operator==(const EvalReport&) const = default;
};

struct EvalOptions {
  /// Classes whose attribute error enters mAAE. Real nuScenes cones and
  /// barriers carry no attribute and are switched off by the ingest module.
  std::array<bool, kNumClasses> evaluate_attribute;
  EvalOptions() { evaluate_attribute.fill(true); }
};

/// Greedy confidence-ordered matching of detections predicted as `cls` to
/// ground-truth objects of `cls` in the same scene, with 2D center distance
/// strictly below `threshold_m`. Throws ValidationError for detections whose
/// scene is not in `ground_truth`.
MatchResult match(std::span<const Detection> detections, std::span<const Scene> ground_truth,
                  ClassId cls, double threshold_m);

/// Precision-recall area above the minimum precision, over recalls above the
/// minimum recall, on a 101-point grid with precision interpolated as the
/// maximum to the right; normalized to [0, 1].
double average_precision(const MatchResult& match);

/// Mean TP errors at the given match. nullopt when no true positive exists.
std::optional<TpErrors> tp_errors(const MatchResult& match, std::span<const Detection> detections,
                                  std::span<const Scene> ground_truth);

double center_distance_2d(const Box3D& a, const Box3D& b);
double scale_error(const Box3D& pred, const Box3D& gt);
double yaw_error(double yaw_pred, double yaw_gt);
double velocity_error(const Box3D& pred, const Box3D& gt);

/// nuScenes-style composite: (5 mAP + sum of (1 - min(1, err))) / 10.
double nds(double mAP, const TpErrors& mean_errors);

EvalReport evaluate(std::span<const Detection> detections, std::span<const Scene> ground_truth,
                    const EvalOptions& options = {});

/// Spread between the best and worst per-class AP over classes with ground
/// truth.
double ap_spread(const EvalReport& report);

}  // namespace alsim
