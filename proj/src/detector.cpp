#include "alsim/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include "alsim/errors.hpp"
#include "alsim/rng.hpp"

namespace alsim {

namespace {

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

Eigen::VectorXd augmented(std::span<const double> feature) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(feature.size()) + 1);
  for (std::size_t i = 0; i < feature.size(); ++i) x(static_cast<Eigen::Index>(i)) = feature[i];
  x(x.size() - 1) = 1.0;
  return x;
}

Eigen::VectorXd box_targets(const Box3D& b) {
  Eigen::VectorXd t(kBoxTargets);
  t << b.center_x, b.center_y, b.center_z, b.width, b.length, b.height, std::sin(b.yaw),
      std::cos(b.yaw);
  return t;
}

// Threshold on predicted speed maximizing training accuracy for
// "attribute = speed > threshold". Ties go to the smallest threshold.
double fit_speed_threshold(std::vector<std::pair<double, bool>> samples) {
  if (samples.empty()) return std::numeric_limits<double>::infinity();
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  std::size_t positives = 0;
  for (const auto& s : samples) positives += s.second ? 1 : 0;

  // Threshold below everything: all predicted positive.
  std::size_t best_correct = positives;
  double best = samples.front().first - 1.0;
  std::size_t neg_below = 0, pos_below = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (samples[i].second ? pos_below : neg_below) += 1;
    if (i + 1 < n && samples[i + 1].first == samples[i].first) continue;
    const std::size_t correct = neg_below + (positives - pos_below);
    if (correct > best_correct) {
      best_correct = correct;
      best = i + 1 < n ? 0.5 * (samples[i].first + samples[i + 1].first)
                       : std::numeric_limits<double>::infinity();
    }
  }
  return best;
}

void write_matrix(std::ostream& os, std::string_view name, const Eigen::MatrixXd& m) {
  os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << fmt::format("{:.17g}", m(r, c));
    os << '\n';
  }
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& is) : is_(is) {}

  std::string word() {
    std::string w;
    if (!(is_ >> w)) throw ParseError(fmt::format("model file truncated after token {}", count_));
    ++count_;
    return w;
  }
  void expect(std::string_view w) {
    const auto got = word();
    if (got != w) throw ParseError(fmt::format("model file: expected '{}' at token {}, got '{}'", w, count_, got));
  }
  double real() {
    const auto w = word();
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size()) throw ParseError(fmt::format("model file: bad number '{}' at token {}", w, count_));
    return v;
  }
  long integer() {
    const auto w = word();
    char* end = nullptr;
    const long v = std::strtol(w.c_str(), &end, 10);
    if (end != w.c_str() + w.size()) throw ParseError(fmt::format("model file: bad integer '{}' at token {}", w, count_));
    return v;
  }
  Eigen::MatrixXd matrix(std::string_view name) {
    expect(name);
    const long rows = integer(), cols = integer();
    if (rows < 0 || cols < 0 || rows > 4096 || cols > 4096)
      throw ParseError(fmt::format("model file: implausible shape {}x{} for {}", rows, cols, name));
    Eigen::MatrixXd m(rows, cols);
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) m(r, c) = real();
    return m;
  }

 private:
  std::istream& is_;
  std::size_t count_ = 0;
};

}  // namespace

bool ClassRegressor::operator==(const ClassRegressor& o) const {
  return trained == o.trained && num_samples == o.num_samples && same_matrix(box, o.box) &&
         same_matrix(velocity, o.velocity) && attribute_threshold == o.attribute_threshold;
}

bool DetectorModel::operator==(const DetectorModel& o) const {
  return feature_dim == o.feature_dim && same_matrix(class_weights, o.class_weights) &&
         regressors == o.regressors && global == o.global && epochs_trained == o.epochs_trained &&
         epoch_losses == o.epoch_losses;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(ridge_lambda > 0.0)) throw ConfigError("ridge_lambda must be positive");
  if (!(clutter_rate >= 0.0)) throw ConfigError("clutter_rate must be non-negative");
  for (double p : {observation_prob, background_threshold})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("probabilities must lie in [0, 1]");
}

DetectorModel DetectorModel::zeros(int feature_dim) {
  DetectorModel m;
  m.feature_dim = feature_dim;
  m.class_weights = Eigen::MatrixXd::Zero(kNumOutputs, feature_dim + 1);
  return m;
}

OutputProbs softmax(std::span<const double, kNumOutputs> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  OutputProbs p{};
  double z = 0.0;
  for (int k = 0; k < kNumOutputs; ++k) z += (p[k] = std::exp(logits[k] - mx));
  for (double& v : p) v /= z;
  return p;
}

OutputProbs predict_proba(const DetectorModel& model, std::span<const double> feature) {
  if (static_cast<Eigen::Index>(feature.size()) + 1 != model.class_weights.cols() ||
      model.class_weights.rows() != kNumOutputs)
    throw ShapeError(fmt::format("feature of dimension {} does not fit a {}x{} weight matrix",
                                 feature.size(), model.class_weights.rows(), model.class_weights.cols()));
  const Eigen::VectorXd logits = model.class_weights * augmented(feature);
  std::array<double, kNumOutputs> l{};
  for (int k = 0; k < kNumOutputs; ++k) l[k] = logits(k);
  return softmax(l);
}

ClassPosterior foreground_posterior(const OutputProbs& p) {
  ClassPosterior post;
  post.background_prob = p[kBackgroundIndex];
  double fg = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) fg += p[k];
  for (std::size_t k = 0; k < kNumClasses; ++k)
    post.probs[k] = fg > 0.0 ? p[k] / fg : 1.0 / static_cast<double>(kNumClasses);
  return post;
}

ClassId argmax_class(const ClassProbs& probs) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumClasses; ++k)
    if (probs[k] > probs[best]) best = k;
  return class_at(best);
}

double cross_entropy(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& inputs,
                     std::span<const int> labels, Eigen::MatrixXd* gradient) {
  const Eigen::Index n = inputs.rows();
  if (static_cast<std::size_t>(n) != labels.size() || inputs.cols() != weights.cols())
    throw ShapeError("cross_entropy: inputs, labels and weights disagree in shape");
  if (n == 0) throw TrainingError("cross_entropy over an empty batch");
  Eigen::MatrixXd logits = inputs * weights.transpose();  // n x K
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto row = logits.row(i);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp().matrix();
    const double z = row.sum();
    row /= z;
    loss -= std::log(std::max(row(labels[i]), 1e-300));
    if (gradient) row(labels[i]) -= 1.0;
  }
  if (gradient) *gradient = logits.transpose() * inputs / static_cast<double>(n);
  return loss / static_cast<double>(n);
}

Eigen::MatrixXd fit_softmax(const Eigen::MatrixXd& features, std::span<const int> labels,
                            int num_outputs, const TrainConfig& config,
                            std::vector<double>* epoch_losses) {
  const Eigen::Index n = features.rows(), d = features.cols();
  if (n == 0) throw TrainingError("no training samples");
  if (static_cast<std::size_t>(n) != labels.size()) throw ShapeError("fit_softmax: label count mismatch");
  for (int y : labels)
    if (y < 0 || y >= num_outputs) throw TrainingError(fmt::format("label {} out of range", y));

  // Inputs are centered and scaled by the pooled within-class spread.
  const Eigen::RowVectorXd mean = features.colwise().mean();
  Eigen::MatrixXd class_sum = Eigen::MatrixXd::Zero(num_outputs, d);
  Eigen::VectorXd class_n = Eigen::VectorXd::Zero(num_outputs);
  for (Eigen::Index i = 0; i < n; ++i) {
    class_sum.row(labels[static_cast<std::size_t>(i)]) += features.row(i);
    class_n(labels[static_cast<std::size_t>(i)]) += 1.0;
  }
  Eigen::RowVectorXd scale = Eigen::RowVectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    scale += (features.row(i) - class_sum.row(y) / class_n(y)).array().square().matrix();
  }
  scale = (scale / static_cast<double>(n)).array().sqrt().matrix();
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(scale(j) > 1e-12)) scale(j) = 1.0;

  Eigen::MatrixXd z(n, d + 1);
  z.leftCols(d) = (features.rowwise() - mean).array().rowwise() / scale.array();
  z.col(d).setOnes();

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(num_outputs, d + 1);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<Eigen::Index>(config.batch_size);
  Eigen::MatrixXd xb, grad;
  std::vector<int> yb;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, {stream::kTrainShuffle, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = config.learning_rate / std::sqrt(static_cast<double>(epoch));
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index m = std::min(batch, n - start);
      xb.resize(m, d + 1);
      yb.resize(static_cast<std::size_t>(m));
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto src = order[static_cast<std::size_t>(start + i)];
        xb.row(i) = z.row(src);
        yb[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(src)];
      }
      cross_entropy(w, xb, yb, &grad);
      w -= lr * grad;
    }
    if (!all_finite(w)) throw TrainingError(fmt::format("classifier weights diverged in epoch {}", epoch));
    if (epoch_losses) epoch_losses->push_back(cross_entropy(w, z, labels));
  }

  // Fold the standardization into the weights.
  Eigen::MatrixXd raw(num_outputs, d + 1);
  raw.leftCols(d) = w.leftCols(d).array().rowwise() / scale.array();
  raw.col(d) = w.col(d) - raw.leftCols(d) * mean.transpose();
  return raw;
}

Eigen::MatrixXd fit_ridge(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                          double lambda) {
  const Eigen::Index n = features.rows(), d = features.cols();
  if (n == 0) throw TrainingError("ridge fit with no samples");
  if (targets.rows() != n) throw ShapeError("fit_ridge: feature and target rows differ");
  const Eigen::RowVectorXd xm = features.colwise().mean();
  const Eigen::RowVectorXd ym = targets.colwise().mean();
  const Eigen::MatrixXd xc = features.rowwise() - xm;
  const Eigen::MatrixXd yc = targets.rowwise() - ym;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += lambda;
  const Eigen::MatrixXd coef = gram.ldlt().solve(xc.transpose() * yc);  // d x m

  Eigen::MatrixXd out(targets.cols(), d + 1);
  out.leftCols(d) = coef.transpose();
  out.col(d) = ym.transpose() - coef.transpose() * xm.transpose();
  if (!all_finite(out)) throw TrainingError("ridge solution is not finite");
  return out;
}

std::vector<Candidate> propose_candidates(const Scene& scene, const FeatureModel& features,
                                          const TrainConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(scene.scene_id)}));
  std::bernoulli_distribution observe(config.observation_prob);
  std::vector<Candidate> out;
  out.reserve(scene.objects.size() + 4);
  std::uint32_t next_id = 0;
  for (const auto& obj : scene.objects) {
    if (!observe(rng)) continue;
    if (static_cast<int>(obj.feature.size()) != features.feature_dim())
      throw ShapeError(fmt::format("object {} has feature dimension {}, expected {}", obj.object_id,
                                   obj.feature.size(), features.feature_dim()));
    Candidate c;
    c.candidate_id = next_id++;
    c.feature = obj.feature;
    c.matched_object = obj.object_id;
    c.true_class = obj.cls;
    c.observed_box = obj.box;
    out.push_back(std::move(c));
  }
  std::poisson_distribution<int> clutter(config.clutter_rate);
  const int n_clutter = config.clutter_rate > 0.0 ? clutter(rng) : 0;
  for (int k = 0; k < n_clutter; ++k) {
    Candidate c;
    c.candidate_id = next_id++;
    c.observed_box = random_clutter_box(rng);
    c.feature = features.background_feature(c.observed_box, rng);
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

ClassRegressor fit_regressor(const std::vector<const GroundTruthObject*>& objs, int d, double lambda) {
  ClassRegressor r;
  r.num_samples = objs.size();
  if (objs.empty()) return r;
  const auto n = static_cast<Eigen::Index>(objs.size());
  Eigen::MatrixXd x(n, d), yb(n, kBoxTargets), yv(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = *objs[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) x(i, j) = o.feature[static_cast<std::size_t>(j)];
    yb.row(i) = box_targets(o.box).transpose();
    yv(i, 0) = o.box.velocity_x;
    yv(i, 1) = o.box.velocity_y;
  }
  r.box = fit_ridge(x, yb, lambda);
  r.velocity = fit_ridge(x, yv, lambda);
  r.trained = true;

  std::vector<std::pair<double, bool>> speeds;
  speeds.reserve(objs.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd xa(d + 1);
    xa.head(d) = x.row(i).transpose();
    xa(d) = 1.0;
    speeds.emplace_back((r.velocity * xa).norm(), objs[static_cast<std::size_t>(i)]->attribute);
  }
  r.attribute_threshold = fit_speed_threshold(std::move(speeds));
  return r;
}

}  // namespace

DetectorModel train(const DetectorModel& model, std::span<const Scene> labeled_scenes,
                    const FeatureModel& features, const TrainConfig& config) {
  config.validate();
  if (labeled_scenes.empty()) throw TrainingError("cannot train on an empty labeled set");
  const int d = features.feature_dim();
  if (model.feature_dim != 0 && model.feature_dim != d)
    throw ShapeError(fmt::format("model expects feature dimension {}, data has {}", model.feature_dim, d));

  // Classifier samples: every proposed candidate, clutter labeled background.
  std::vector<Candidate> cands;
  for (const Scene& s : labeled_scenes) {
    auto cs = propose_candidates(s, features, config, derive_seed(config.seed, {stream::kTrainCandidates}));
    std::move(cs.begin(), cs.end(), std::back_inserter(cands));
  }
  if (cands.empty()) throw TrainingError("labeled scenes produced no training candidates");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(cands.size()), d);
  std::vector<int> y(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    for (int j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) = cands[i].feature[static_cast<std::size_t>(j)];
    y[i] = cands[i].true_class ? static_cast<int>(index_of(*cands[i].true_class)) : kBackgroundIndex;
  }

  DetectorModel out = DetectorModel::zeros(d);
  out.class_weights = fit_softmax(x, y, kNumOutputs, config, &out.epoch_losses);
  out.epochs_trained = config.epochs;

  // Regressors: every labeled ground-truth object of the class.
  std::array<std::vector<const GroundTruthObject*>, kNumClasses> by_class;
  std::vector<const GroundTruthObject*> all;
  for (const Scene& s : labeled_scenes)
    for (const auto& o : s.objects) {
      if (static_cast<int>(o.feature.size()) != d)
        throw ShapeError(fmt::format("object {} has feature dimension {}, expected {}", o.object_id,
                                     o.feature.size(), d));
      by_class[index_of(o.cls)].push_back(&o);
      all.push_back(&o);
    }
  out.global = fit_regressor(all, d, config.ridge_lambda);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    out.regressors[c] = fit_regressor(by_class[c], d, config.ridge_lambda);
  return out;
}

Regression regress(const DetectorModel& model, ClassId cls, std::span<const double> feature) {
  const ClassRegressor* r = &model.regressors[index_of(cls)];
  if (!r->trained) r = &model.global;
  Regression out;
  if (!r->trained) return out;
  const Eigen::VectorXd x = augmented(feature);
  const Eigen::VectorXd b = r->box * x;
  const Eigen::VectorXd v = r->velocity * x;
  constexpr double kMinSize = 0.01;
  out.box.center_x = b(0);
  out.box.center_y = b(1);
  out.box.center_z = b(2);
  out.box.width = std::max(kMinSize, b(3));
  out.box.length = std::max(kMinSize, b(4));
  out.box.height = std::max(kMinSize, b(5));
  out.box.yaw = normalize_yaw(std::atan2(b(6), b(7)));
  out.box.velocity_x = v(0);
  out.box.velocity_y = v(1);
  out.attribute = v.norm() > r->attribute_threshold;
  return out;
}

std::vector<Detection> infer_scene(const DetectorModel& model, const Scene& scene,
                                   const FeatureModel& features, const TrainConfig& config,
                                   std::uint64_t seed) {
  if (model.epochs_trained < 1) throw InferenceError("model has not been trained");
  std::vector<Detection> out;
  for (const Candidate& c : propose_candidates(scene, features, config, seed)) {
    const OutputProbs p = predict_proba(model, c.feature);
    if (p[kBackgroundIndex] > config.background_threshold) continue;
    Detection det;
    det.scene_id = scene.scene_id;
    det.candidate_id = c.candidate_id;
    det.posterior = foreground_posterior(p);
    det.predicted_class = argmax_class(det.posterior.probs);
    det.confidence = std::clamp(
        (1.0 - det.posterior.background_prob) * det.posterior.probs[index_of(det.predicted_class)], 0.0, 1.0);
    const Regression reg = regress(model, det.predicted_class, c.feature);
    det.predicted_box = reg.box;
    det.predicted_attribute = reg.attribute;
    out.push_back(det);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint file

void write_model(std::ostream& os, const DetectorModel& model) {
  os << "alsim-model " << kModelSchemaVersion << '\n';
  os << "feature_dim " << model.feature_dim << '\n';
  os << "epochs_trained " << model.epochs_trained << '\n';
  os << "epoch_losses " << model.epoch_losses.size();
  for (double l : model.epoch_losses) os << ' ' << fmt::format("{:.17g}", l);
  os << '\n';
  write_matrix(os, "class_weights", model.class_weights);
  auto write_reg = [&](std::string_view name, const ClassRegressor& r) {
    os << "regressor " << name << " trained " << (r.trained ? 1 : 0) << " samples " << r.num_samples
       << " attribute_threshold " << fmt::format("{:.17g}", r.attribute_threshold) << '\n';
    if (r.trained) {
      write_matrix(os, "box", r.box);
      write_matrix(os, "velocity", r.velocity);
    }
  };
  write_reg("global", model.global);
  for (std::size_t c = 0; c < kNumClasses; ++c) write_reg(detection_name(class_at(c)), model.regressors[c]);
  os << "end\n";
}

void write_model(const std::filesystem::path& path, const DetectorModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  write_model(os, model);
  if (!os) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

DetectorModel read_model(std::istream& is) {
  TokenReader in(is);
  in.expect("alsim-model");
  if (const long v = in.integer(); v != kModelSchemaVersion)
    throw ParseError(fmt::format("model file: unsupported version {}", v));
  DetectorModel m;
  in.expect("feature_dim");
  m.feature_dim = static_cast<int>(in.integer());
  in.expect("epochs_trained");
  m.epochs_trained = static_cast<int>(in.integer());
  in.expect("epoch_losses");
  const long nl = in.integer();
  if (nl < 0 || nl > 100000) throw ParseError("model file: implausible epoch_losses count");
  for (long i = 0; i < nl; ++i) m.epoch_losses.push_back(in.real());
  m.class_weights = in.matrix("class_weights");
  if (m.class_weights.rows() != kNumOutputs || m.class_weights.cols() != m.feature_dim + 1)
    throw ParseError("model file: class_weights shape does not match feature_dim");
  auto read_reg = [&](std::string_view name) {
    in.expect("regressor");
    in.expect(name);
    ClassRegressor r;
    in.expect("trained");
    r.trained = in.integer() != 0;
    in.expect("samples");
    r.num_samples = static_cast<std::size_t>(in.integer());
    in.expect("attribute_threshold");
    r.attribute_threshold = in.real();
    if (r.trained) {
      r.box = in.matrix("box");
      r.velocity = in.matrix("velocity");
      if (r.box.rows() != kBoxTargets || r.box.cols() != m.feature_dim + 1 || r.velocity.rows() != 2 ||
          r.velocity.cols() != m.feature_dim + 1)
        throw ParseError(fmt::format("model file: regressor '{}' has the wrong shape", name));
    }
    return r;
  };
  m.global = read_reg("global");
  for (std::size_t c = 0; c < kNumClasses; ++c) m.regressors[c] = read_reg(detection_name(class_at(c)));
  in.expect("end");
  return m;
}

DetectorModel read_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return read_model(is);
}

}  // namespace alsim
