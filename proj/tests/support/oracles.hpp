#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. Deliberately naive and independent of the library internals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "alsim/detector.hpp"
#include "alsim/metrics.hpp"
#include "alsim/types.hpp"

namespace oracle {

inline double entropy_bits(const std::vector<double>& p) {
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    h = h - p[i] * (std::log(p[i]) / std::log(2.0));
  }
  return h;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  double top = logits[0];
  for (double v : logits) top = std::max(top, v);
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

/// Uniform point on the simplex (normalized exponentials), with some entries
/// zeroed to exercise the 0 log 0 convention.
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n, bool allow_zeros = true) {
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution zero(0.2);
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& v : p) {
    v = allow_zeros && zero(rng) ? 0.0 : e(rng);
    s += v;
  }
  if (s == 0.0) {
    p[0] = 1.0;
    s = 1.0;
  }
  for (auto& v : p) v /= s;
  return p;
}

// ---------------------------------------------------------------------------
// Detection metrics

struct Match {
  std::vector<std::size_t> order;  // detection indices in processing order
  std::vector<bool> tp;
  std::vector<std::optional<alsim::ObjectId>> matched;
  std::size_t npos = 0;
};

inline bool ranks_before(const alsim::Detection& a, const alsim::Detection& b) {
  if (a.confidence > b.confidence) return true;
  if (a.confidence < b.confidence) return false;
  if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
  return a.candidate_id < b.candidate_id;
}

inline Match match(const std::vector<alsim::Detection>& dets, const std::vector<alsim::Scene>& gt,
                   alsim::ClassId cls, double threshold) {
  Match m;
  for (const auto& s : gt)
    for (const auto& o : s.objects)
      if (o.cls == cls) ++m.npos;

  // Selection sort by rank: independent of the library's sort.
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (dets[i].predicted_class == cls) pending.push_back(i);
  while (!pending.empty()) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < pending.size(); ++k)
      if (ranks_before(dets[pending[k]], dets[pending[best]])) best = k;
    m.order.push_back(pending[best]);
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(best));
  }

  std::vector<alsim::ObjectId> used;
  for (std::size_t di : m.order) {
    const auto& d = dets[di];
    std::optional<alsim::ObjectId> pick;
    double pick_dist = 0.0;
    for (const auto& s : gt) {
      if (s.scene_id != d.scene_id) continue;
      for (const auto& o : s.objects) {
        if (o.cls != cls || std::find(used.begin(), used.end(), o.object_id) != used.end()) continue;
        const double dist = std::sqrt(std::pow(d.predicted_box.center_x - o.box.center_x, 2) +
                                      std::pow(d.predicted_box.center_y - o.box.center_y, 2));
        if (dist >= threshold) continue;
        if (!pick || dist < pick_dist) {
          pick = o.object_id;
          pick_dist = dist;
        }
      }
    }
    m.tp.push_back(pick.has_value());
    m.matched.push_back(pick);
    if (pick) used.push_back(*pick);
  }
  return m;
}

/// (1 / 0.81) * sum over the recall grid r = 0.11 .. 1.00 (step 0.01) of
/// max(0, p(r) - 0.1) * 0.01, where p(r) is the best precision at recall >= r.
inline double average_precision(const Match& m) {
  if (m.npos == 0) return 0.0;
  std::vector<double> prec, rec;
  double tp = 0.0, fp = 0.0;
  for (bool t : m.tp) {
    (t ? tp : fp) += 1.0;
    prec.push_back(tp / (tp + fp));
    rec.push_back(tp / static_cast<double>(m.npos));
  }
  double integral = 0.0;
  for (int j = 11; j <= 100; ++j) {
    const double r = j / 100.0;
    double p = 0.0;
    for (std::size_t k = 0; k < prec.size(); ++k)
      if (rec[k] >= r) p = std::max(p, prec[k]);
    integral += 0.01 * std::max(0.0, p - 0.1);
  }
  return integral / 0.81;
}

struct Tp {
  double ate, ase, aoe, ave, aae;
};

inline std::optional<Tp> tp_errors(const Match& m, const std::vector<alsim::Detection>& dets,
                                   const std::vector<alsim::Scene>& gt) {
  std::vector<Tp> rows;
  for (std::size_t i = 0; i < m.order.size(); ++i) {
    if (!m.tp[i]) continue;
    const auto& d = dets[m.order[i]];
    const alsim::GroundTruthObject* g = nullptr;
    for (const auto& s : gt)
      for (const auto& o : s.objects)
        if (o.object_id == *m.matched[i]) g = &o;
    const auto& p = d.predicted_box;
    const auto& b = g->box;
    Tp t{};
    t.ate = std::hypot(p.center_x - b.center_x, p.center_y - b.center_y);
    double overlap = 1.0;
    for (auto [x, y] : {std::pair{p.width, b.width}, std::pair{p.length, b.length}, std::pair{p.height, b.height}})
      overlap *= std::min(x, y) / std::max(x, y);
    t.ase = 1.0 - overlap;
    double dy = std::abs(p.yaw - b.yaw);
    while (dy > 2.0 * std::numbers::pi) dy -= 2.0 * std::numbers::pi;
    t.aoe = std::min(dy, 2.0 * std::numbers::pi - dy);
    t.ave = std::hypot(p.velocity_x - b.velocity_x, p.velocity_y - b.velocity_y);
    t.aae = d.predicted_attribute == g->attribute ? 0.0 : 1.0;
    rows.push_back(t);
  }
  if (rows.empty()) return std::nullopt;
  Tp mean{0, 0, 0, 0, 0};
  for (const auto& r : rows) {
    mean.ate += r.ate / rows.size();
    mean.ase += r.ase / rows.size();
    mean.aoe += r.aoe / rows.size();
    mean.ave += r.ave / rows.size();
    mean.aae += r.aae / rows.size();
  }
  return mean;
}

inline double nds(double map, const Tp& e) {
  const double terms[5] = {e.ate, e.ase, e.aoe, e.ave, e.aae};
  double s = 5.0 * map;
  for (double t : terms) s += t >= 1.0 ? 0.0 : 1.0 - t;
  return s / 10.0;
}

struct Report {
  std::array<double, alsim::kNumClasses> ap{};
  double map = 0.0;
  Tp mean{1, 1, 1, 1, 1};
  double nds = 0.0;
};

inline Report evaluate(const std::vector<alsim::Detection>& dets, const std::vector<alsim::Scene>& gt) {
  Report r;
  std::vector<double> aps;
  std::vector<Tp> errs;
  for (std::size_t c = 0; c < alsim::kNumClasses; ++c) {
    const auto cls = alsim::class_at(c);
    double total = 0.0;
    std::optional<Tp> tp;
    std::size_t npos = 0;
    for (double thr : {0.5, 1.0, 2.0, 4.0}) {
      const Match m = match(dets, gt, cls, thr);
      npos = m.npos;
      total += average_precision(m);
      if (thr == 2.0) tp = tp_errors(m, dets, gt);
    }
    r.ap[c] = total / 4.0;
    if (npos == 0) continue;
    aps.push_back(r.ap[c]);
    if (tp) errs.push_back(*tp);
  }
  for (double a : aps) r.map += a / static_cast<double>(aps.size());
  if (!errs.empty()) {
    r.mean = Tp{0, 0, 0, 0, 0};
    for (const auto& e : errs) {
      r.mean.ate += e.ate / errs.size();
      r.mean.ase += e.ase / errs.size();
      r.mean.aoe += e.aoe / errs.size();
      r.mean.ave += e.ave / errs.size();
      r.mean.aae += e.aae / errs.size();
    }
  }
  r.nds = nds(r.map, r.mean);
  return r;
}

// ---------------------------------------------------------------------------
// Random micro-scenes: few objects in a small area so that matches, near
// misses and competing detections all occur.

struct MicroCase {
  std::vector<alsim::Scene> gt;
  std::vector<alsim::Detection> dets;
};

inline MicroCase random_micro_case(std::mt19937_64& rng, int num_scenes = 2, int max_objects = 5,
                                   int max_dets = 5) {
  std::uniform_int_distribution<int> n_obj(0, max_objects), n_det(0, max_dets), cls3(0, 2);
  std::uniform_real_distribution<double> pos(-3.0, 3.0), jitter(-2.5, 2.5), size(0.5, 4.0),
      yaw(-std::numbers::pi, std::numbers::pi), vel(-3.0, 3.0), conf(0.0, 1.0);
  std::bernoulli_distribution coin(0.5), tie(0.15), near(0.7);
  MicroCase mc;
  for (int s = 0; s < num_scenes; ++s) {
    alsim::Scene scene;
    scene.scene_id = static_cast<alsim::SceneId>(10 + 3 * s);
    const int n = n_obj(rng);
    for (int k = 0; k < n; ++k) {
      alsim::GroundTruthObject o;
      o.object_id = (static_cast<alsim::ObjectId>(scene.scene_id) << 16) | static_cast<alsim::ObjectId>(k);
      o.cls = alsim::class_at(static_cast<std::size_t>(cls3(rng)));
      o.box = alsim::Box3D{pos(rng), pos(rng), 0.5, size(rng), size(rng), size(rng), yaw(rng), vel(rng), vel(rng)};
      o.attribute = coin(rng);
      scene.objects.push_back(o);
    }
    const int m = n_det(rng);
    for (int k = 0; k < m; ++k) {
      alsim::Detection d;
      d.scene_id = scene.scene_id;
      d.candidate_id = static_cast<std::uint32_t>(k);
      d.predicted_class = alsim::class_at(static_cast<std::size_t>(cls3(rng)));
      d.confidence = tie(rng) && !mc.dets.empty() ? mc.dets.back().confidence : conf(rng);
      alsim::Box3D b{pos(rng), pos(rng), 0.5, size(rng), size(rng), size(rng), yaw(rng), vel(rng), vel(rng)};
      if (!scene.objects.empty() && near(rng)) {
        std::uniform_int_distribution<std::size_t> pick(0, scene.objects.size() - 1);
        const auto& o = scene.objects[pick(rng)];
        b.center_x = o.box.center_x + jitter(rng);
        b.center_y = o.box.center_y + jitter(rng);
      }
      d.predicted_box = b;
      d.predicted_attribute = coin(rng);
      d.posterior.probs.fill(0.0);
      d.posterior.probs[alsim::index_of(d.predicted_class)] = 1.0;
      mc.dets.push_back(d);
    }
    mc.gt.push_back(std::move(scene));
  }
  return mc;
}

}  // namespace oracle
