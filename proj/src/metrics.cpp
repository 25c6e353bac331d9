#include "alsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "alsim/errors.hpp"

namespace alsim {

namespace {

using SceneIndex = std::unordered_map<SceneId, std::size_t>;

SceneIndex index_scenes(std::span<const Scene> scenes) {
  SceneIndex idx;
  idx.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i)
    if (!idx.emplace(scenes[i].scene_id, i).second)
      throw ValidationError(fmt::format("ground truth lists scene {} twice", scenes[i].scene_id));
  return idx;
}

std::size_t scene_of(const SceneIndex& idx, const Detection& d) {
  auto it = idx.find(d.scene_id);
  if (it == idx.end())
    throw ValidationError(fmt::format("detection {}/{} references unknown scene", d.scene_id, d.candidate_id));
  return it->second;
}

const GroundTruthObject* find_object(const Scene& s, ObjectId id) {
  for (const auto& o : s.objects)
    if (o.object_id == id) return &o;
  return nullptr;
}

}  // namespace

double center_distance_2d(const Box3D& a, const Box3D& b) {
  return std::hypot(a.center_x - b.center_x, a.center_y - b.center_y);
}

double scale_error(const Box3D& p, const Box3D& g) {
  const double iou = (std::min(p.width, g.width) / std::max(p.width, g.width)) *
                     (std::min(p.length, g.length) / std::max(p.length, g.length)) *
                     (std::min(p.height, g.height) / std::max(p.height, g.height));
  return 1.0 - iou;
}

double yaw_error(double yaw_pred, double yaw_gt) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double d = std::fmod(std::abs(yaw_pred - yaw_gt), two_pi);
  return std::min(d, two_pi - d);
}

double velocity_error(const Box3D& p, const Box3D& g) {
  return std::hypot(p.velocity_x - g.velocity_x, p.velocity_y - g.velocity_y);
}

MatchResult match(std::span<const Detection> detections, std::span<const Scene> ground_truth,
                  ClassId cls, double threshold_m) {
  const SceneIndex idx = index_scenes(ground_truth);
  MatchResult out;
  out.cls = cls;
  out.threshold_m = threshold_m;

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    scene_of(idx, detections[i]);  // validates the scene id
    if (detections[i].predicted_class == cls) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Detection& da = detections[a];
    const Detection& db = detections[b];
    if (da.confidence != db.confidence) return da.confidence > db.confidence;
    if (da.scene_id != db.scene_id) return da.scene_id < db.scene_id;
    return da.candidate_id < db.candidate_id;
  });

  // taken[scene][object index]
  std::vector<std::vector<char>> taken(ground_truth.size());
  for (std::size_t s = 0; s < ground_truth.size(); ++s) {
    taken[s].assign(ground_truth[s].objects.size(), 0);
    for (const auto& o : ground_truth[s].objects) out.num_ground_truth += o.cls == cls ? 1 : 0;
  }

  out.entries.reserve(order.size());
  for (std::size_t di : order) {
    const Detection& d = detections[di];
    const std::size_t s = idx.at(d.scene_id);
    const auto& objs = ground_truth[s].objects;
    std::optional<std::size_t> best;
    double best_dist = threshold_m;
    for (std::size_t k = 0; k < objs.size(); ++k) {
      if (objs[k].cls != cls || taken[s][k]) continue;
      const double dist = center_distance_2d(d.predicted_box, objs[k].box);
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    MatchEntry e;
    e.detection_index = di;
    e.confidence = d.confidence;
    if (best) {
      taken[s][*best] = 1;
      e.is_true_positive = true;
      e.matched_object = objs[*best].object_id;
    }
    out.entries.push_back(e);
  }
  return out;
}

double average_precision(const MatchResult& m) {
  if (m.num_ground_truth == 0 || m.entries.empty()) return 0.0;
  const std::size_t n = m.entries.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += m.entries[i].is_true_positive ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(m.num_ground_truth);
  }
  // Maximum precision to the right.
  for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);

  constexpr int kGrid = 100;
  const int first = static_cast<int>(std::lround(kGrid * kMinRecall)) + 1;
  double acc = 0.0;
  for (int j = first; j <= kGrid; ++j) {
    const double r = static_cast<double>(j) / kGrid;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it == recall.end()) break;  // recall never reaches r, nor any larger grid point
    const double p = precision[static_cast<std::size_t>(it - recall.begin())];
    acc += std::max(0.0, p - kMinPrecision);
  }
  const double mean = acc / static_cast<double>(kGrid - first + 1);
  return mean / (1.0 - kMinPrecision);
}

std::optional<TpErrors> tp_errors(const MatchResult& m, std::span<const Detection> detections,
                                  std::span<const Scene> ground_truth) {
  const SceneIndex idx = index_scenes(ground_truth);
  TpErrors sum;
  std::size_t n = 0;
  for (const MatchEntry& e : m.entries) {
    if (!e.is_true_positive) continue;
    const Detection& d = detections[e.detection_index];
    const GroundTruthObject* g = find_object(ground_truth[idx.at(d.scene_id)], *e.matched_object);
    if (!g) throw ValidationError("match refers to an object missing from the ground truth");
    sum.ate += center_distance_2d(d.predicted_box, g->box);
    sum.ase += scale_error(d.predicted_box, g->box);
    sum.aoe += yaw_error(d.predicted_box.yaw, g->box.yaw);
    sum.ave += velocity_error(d.predicted_box, g->box);
    sum.aae += d.predicted_attribute == g->attribute ? 0.0 : 1.0;
    ++n;
  }
  if (n == 0) return std::nullopt;
  const double k = static_cast<double>(n);
  return TpErrors{sum.ate / k, sum.ase / k, sum.aoe / k, sum.ave / k, sum.aae / k};
}

double nds(double mAP, const TpErrors& e) {
  double s = 5.0 * mAP;
  for (double err : {e.ate, e.ase, e.aoe, e.ave, e.aae}) s += 1.0 - std::min(1.0, err);
  return s / 10.0;
}

EvalReport evaluate(std::span<const Detection> detections, std::span<const Scene> ground_truth,
                    const EvalOptions& options) {
  const SceneIndex idx = index_scenes(ground_truth);
  for (const Detection& d : detections) scene_of(idx, d);

  EvalReport rep;
  double ap_sum = 0.0;
  std::size_t ap_classes = 0;
  std::array<double, 5> err_sum{};
  std::array<std::size_t, 5> err_n{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    ClassMetrics& cm = rep.per_class[c];
    const ClassId cls = class_at(c);
    for (std::size_t t = 0; t < kMatchThresholds.size(); ++t) {
      const MatchResult mr = match(detections, ground_truth, cls, kMatchThresholds[t]);
      cm.num_ground_truth = mr.num_ground_truth;
      cm.num_detections = mr.entries.size();
      cm.ap_per_threshold[t] = average_precision(mr);
      if (kMatchThresholds[t] == kTpErrorThreshold) cm.tp = tp_errors(mr, detections, ground_truth);
    }
    cm.ap = std::accumulate(cm.ap_per_threshold.begin(), cm.ap_per_threshold.end(), 0.0) /
            static_cast<double>(kMatchThresholds.size());
    if (cm.num_ground_truth == 0) continue;
    ap_sum += cm.ap;
    ++ap_classes;
    if (cm.tp) {
      const std::array<double, 5> v = {cm.tp->ate, cm.tp->ase, cm.tp->aoe, cm.tp->ave, cm.tp->aae};
      for (std::size_t k = 0; k < 4; ++k) {
        err_sum[k] += v[k];
        ++err_n[k];
      }
      if (options.evaluate_attribute[c]) {
        err_sum[4] += v[4];
        ++err_n[4];
      }
    }
  }
  rep.mAP = ap_classes ? ap_sum / static_cast<double>(ap_classes) : 0.0;
  // A metric with no true positive anywhere takes the worst bounded value.
  auto mean_or_one = [&](std::size_t k) { return err_n[k] ? err_sum[k] / static_cast<double>(err_n[k]) : 1.0; };
  rep.mATE = mean_or_one(0);
  rep.mASE = mean_or_one(1);
  rep.mAOE = mean_or_one(2);
  rep.mAVE = mean_or_one(3);
  rep.mAAE = mean_or_one(4);
  rep.NDS = nds(rep.mAP, TpErrors{rep.mATE, rep.mASE, rep.mAOE, rep.mAVE, rep.mAAE});
  return rep;
}

double ap_spread(const EvalReport& report) {
  double lo = 1.0, hi = 0.0;
  bool any = false;
  for (const auto& cm : report.per_class) {
    if (cm.num_ground_truth == 0) continue;
    lo = std::min(lo, cm.ap);
    hi = std::max(hi, cm.ap);
    any = true;
  }
  return any ? hi - lo : 0.0;
}

}  // namespace alsim
