#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "alsim/detector.hpp"
#include "alsim/errors.hpp"
#include "oracles.hpp"

using namespace alsim;

namespace {

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Two isotropic Gaussians in `d` dims whose means are `gap` apart along axis 0.
void two_gaussians(std::mt19937_64& rng, int n, int d, double gap, Eigen::MatrixXd& x, std::vector<int>& y) {
  std::normal_distribution<double> z(0.0, 1.0);
  x.resize(n, d);
  y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    for (int j = 0; j < d; ++j) x(i, j) = z(rng) + 3.0;
    x(i, 0) += y[static_cast<std::size_t>(i)] == 1 ? gap : 0.0;
  }
}

Dataset small_dataset(int scenes, std::uint64_t seed, std::optional<ClassId> only = std::nullopt) {
  GenConfig g;
  g.num_scenes = scenes;
  g.seed = seed;
  if (only) {
    g.class_frequencies.fill(0.0);
    g.class_frequencies[index_of(*only)] = 1.0;
  }
  return generate_dataset(g);
}

}  // namespace

TEST_CASE("softmax: oracle, shift invariance and extreme logits") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  for (int t = 0; t < 200; ++t) {
    std::array<double, kNumOutputs> l{};
    for (double& v : l) v = u(rng);
    const OutputProbs p = softmax(l);
    const auto want = oracle::softmax(std::vector<double>(l.begin(), l.end()));
    double sum = 0.0;
    for (int k = 0; k < kNumOutputs; ++k) {
      CHECK(std::isfinite(p[k]));
      CHECK(p[k] == doctest::Approx(want[static_cast<std::size_t>(k)]).epsilon(1e-12));
      sum += p[k];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    auto shifted = l;
    for (double& v : shifted) v += 123.25;
    const OutputProbs q = softmax(shifted);
    for (int k = 0; k < kNumOutputs; ++k) CHECK(q[k] == doctest::Approx(p[k]).epsilon(1e-9));
  }
}

TEST_CASE("predict_proba: zero weights give the uniform posterior") {
  const DetectorModel m = DetectorModel::zeros(20);
  const std::vector<double> f(20, 0.7);
  for (double p : predict_proba(m, f)) CHECK(p == doctest::Approx(1.0 / 11.0).epsilon(1e-15));
  const std::vector<double> wrong(19, 0.0);
  CHECK_THROWS_AS(predict_proba(m, wrong), ShapeError);
}

TEST_CASE("foreground_posterior and argmax") {
  OutputProbs p{};
  p[2] = 0.3;
  p[5] = 0.3;
  p[kBackgroundIndex] = 0.4;
  const ClassPosterior post = foreground_posterior(p);
  CHECK(post.background_prob == 0.4);
  CHECK(post.probs[2] == doctest::Approx(0.5));
  CHECK(std::accumulate(post.probs.begin(), post.probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(argmax_class(post.probs) == class_at(2));  // tie goes to the lower index
}

TEST_CASE("cross_entropy: analytic gradient matches central differences") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 6), rows(1, 12), outs(2, 11);
  for (int inst = 0; inst < 50; ++inst) {
    const int d = dim(rng), n = rows(rng), k = outs(rng);
    Eigen::MatrixXd x(n, d + 1), w(k, d + 1);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = z(rng);
      x(i, d) = 1.0;
    }
    for (int i = 0; i < k; ++i)
      for (int j = 0; j <= d; ++j) w(i, j) = z(rng);
    std::vector<int> y(static_cast<std::size_t>(n));
    std::uniform_int_distribution<int> lab(0, k - 1);
    for (int& v : y) v = lab(rng);

    Eigen::MatrixXd grad;
    cross_entropy(w, x, y, &grad);
    Eigen::MatrixXd fd(k, d + 1);
    constexpr double h = 1e-5;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j <= d; ++j) {
        Eigen::MatrixXd wp = w, wm = w;
        wp(i, j) += h;
        wm(i, j) -= h;
        fd(i, j) = (cross_entropy(wp, x, y) - cross_entropy(wm, x, y)) / (2.0 * h);
      }
    const double rel = (grad - fd).norm() / std::max(grad.norm() + fd.norm(), 1e-12);
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("cross_entropy: shape and empty-batch errors") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3), x = Eigen::MatrixXd::Ones(2, 3);
  const std::vector<int> one = {0};
  CHECK_THROWS_AS(cross_entropy(w, x, one), ShapeError);
  const std::vector<int> none;
  CHECK_THROWS_AS(cross_entropy(w, Eigen::MatrixXd(0, 3), none), TrainingError);
}

TEST_CASE("fit_softmax: well-separated classes approach the Bayes classifier") {
  std::mt19937_64 rng(3);
  constexpr double gap = 4.0;
  Eigen::MatrixXd x, xt;
  std::vector<int> y, yt;
  two_gaussians(rng, 200, 5, gap, x, y);
  two_gaussians(rng, 4000, 5, gap, xt, yt);
  TrainConfig cfg;
  std::vector<double> losses;
  const Eigen::MatrixXd w = fit_softmax(x, y, 2, cfg, &losses);
  CHECK(losses.size() == 6);
  CHECK(losses.back() < losses.front());

  int correct = 0;
  for (Eigen::Index i = 0; i < xt.rows(); ++i) {
    Eigen::VectorXd a(xt.cols() + 1);
    a.head(xt.cols()) = xt.row(i).transpose();
    a(xt.cols()) = 1.0;
    const Eigen::VectorXd logits = w * a;
    correct += (logits(1) > logits(0) ? 1 : 0) == yt[static_cast<std::size_t>(i)];
  }
  const double acc = correct / static_cast<double>(xt.rows());
  const double bayes = standard_normal_cdf(gap / 2.0);
  CHECK(acc >= 0.95);
  CHECK(acc >= bayes - 0.02);
}

TEST_CASE("fit_softmax: deterministic under the seed") {
  std::mt19937_64 rng(4);
  Eigen::MatrixXd x;
  std::vector<int> y;
  two_gaussians(rng, 100, 3, 2.0, x, y);
  TrainConfig cfg;
  CHECK(fit_softmax(x, y, 2, cfg) == fit_softmax(x, y, 2, cfg));
  const std::vector<int> bad(100, 5);
  CHECK_THROWS_AS(fit_softmax(x, bad, 2, cfg), TrainingError);
}

TEST_CASE("fit_ridge: recovers an exact affine map") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(80, 4), a(2, 4);
  for (int i = 0; i < 80; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = z(rng);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = z(rng);
  Eigen::MatrixXd yv = x * a.transpose();
  yv.col(0).array() += 3.0;
  yv.col(1).array() -= 1.0;
  const Eigen::MatrixXd w = fit_ridge(x, yv, 1e-10);
  CHECK((w.leftCols(4) - a).norm() < 1e-6);
  CHECK(w(0, 4) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(w(1, 4) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK_THROWS_AS(fit_ridge(Eigen::MatrixXd(0, 4), Eigen::MatrixXd(0, 2), 1e-3), TrainingError);
}

TEST_CASE("propose_candidates: noiseless, blind and clutter rate") {
  const Dataset data = small_dataset(5, 8);
  const FeatureModel fm{GenConfig{}};
  TrainConfig cfg;
  cfg.observation_prob = 1.0;
  cfg.clutter_rate = 0.0;
  for (const Scene& s : data) {
    const auto c = propose_candidates(s, fm, cfg, 1);
    REQUIRE(c.size() == s.objects.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
      CHECK(c[k].matched_object == s.objects[k].object_id);
      CHECK(c[k].true_class == s.objects[k].cls);
      CHECK(c[k].feature == s.objects[k].feature);
      CHECK(c[k].observed_box == s.objects[k].box);
    }
  }
  cfg.observation_prob = 0.0;
  for (const Scene& s : data) CHECK(propose_candidates(s, fm, cfg, 1).empty());

  cfg.clutter_rate = 2.0;
  std::size_t clutter = 0;
  constexpr int kScenes = 10000;
  for (int i = 0; i < kScenes; ++i) {
    Scene empty;
    empty.scene_id = static_cast<SceneId>(i);
    for (const auto& c : propose_candidates(empty, fm, cfg, 99)) {
      CHECK_FALSE(c.true_class.has_value());
      ++clutter;
    }
  }
  CHECK(std::abs(clutter / static_cast<double>(kScenes) - 2.0) <= 0.1);
}

TEST_CASE("train and infer: contracts") {
  const FeatureModel fm{GenConfig{}};
  TrainConfig cfg;
  const DetectorModel zero = DetectorModel::zeros(fm.feature_dim());
  CHECK_THROWS_AS(train(zero, std::vector<Scene>{}, fm, cfg), TrainingError);

  const Dataset data = small_dataset(40, 21);
  CHECK_THROWS_AS(infer_scene(zero, data[0], fm, cfg, 1), InferenceError);

  const DetectorModel m = train(zero, std::span(data).first(30), fm, cfg);
  CHECK(m.epochs_trained == 6);
  CHECK(m.epoch_losses.size() == 6);
  CHECK(m == train(zero, std::span(data).first(30), fm, cfg));

  TrainConfig quiet = cfg;
  quiet.clutter_rate = 0.0;
  CHECK(infer_scene(m, Scene{77, {}}, fm, quiet, 1).empty());

  std::size_t emitted = 0, correct = 0;
  for (std::size_t i = 30; i < data.size(); ++i)
    for (const Detection& d : infer_scene(m, data[i], fm, cfg, 5)) {
      ++emitted;
      CHECK(std::accumulate(d.posterior.probs.begin(), d.posterior.probs.end(), 0.0) ==
            doctest::Approx(1.0).epsilon(1e-9));
      CHECK(d.confidence >= 0.0);
      CHECK(d.confidence <= 1.0);
      CHECK(d.posterior.background_prob <= cfg.background_threshold);
      CHECK(d.scene_id == data[i].scene_id);
      for (const auto& o : data[i].objects)
        if (d.predicted_class == o.cls && std::hypot(d.predicted_box.center_x - o.box.center_x,
                                                     d.predicted_box.center_y - o.box.center_y) < 2.0)
          ++correct;
    }
  CHECK(emitted > 0);
  CHECK(correct > emitted / 2);
}

TEST_CASE("train: doubling one class's samples does not hurt its box regression") {
  const FeatureModel fm{GenConfig{}};
  TrainConfig cfg;
  const Dataset val = small_dataset(20, 500, ClassId::Truck);
  auto mse = [&](const DetectorModel& m) {
    double s = 0.0;
    std::size_t n = 0;
    for (const Scene& sc : val)
      for (const auto& o : sc.objects) {
        const Box3D b = regress(m, ClassId::Truck, o.feature).box;
        s += std::pow(b.center_x - o.box.center_x, 2) + std::pow(b.center_y - o.box.center_y, 2) +
             std::pow(b.width - o.box.width, 2) + std::pow(b.length - o.box.length, 2);
        ++n;
      }
    return s / static_cast<double>(n);
  };
  double single = 0.0, doubled = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GenConfig g;
    g.num_scenes = 4;
    g.seed = 1000 + seed;
    g.objects_per_scene.kind = ObjectCountDist::Kind::Fixed;
    g.objects_per_scene.mean = 8;
    g.class_frequencies.fill(0.0);
    g.class_frequencies[index_of(ClassId::Truck)] = 1.0;
    const Dataset d = generate_dataset(g);
    const DetectorModel zero = DetectorModel::zeros(fm.feature_dim());
    single += mse(train(zero, std::span(d).first(2), fm, cfg));
    doubled += mse(train(zero, d, fm, cfg));
  }
  CHECK(doubled <= single);
}

TEST_CASE("model file round trip") {
  const FeatureModel fm{GenConfig{}};
  const Dataset data = small_dataset(10, 3);
  const DetectorModel m = train(DetectorModel::zeros(fm.feature_dim()), data, fm, TrainConfig{});
  std::stringstream ss;
  write_model(ss, m);
  CHECK(read_model(ss) == m);

  std::istringstream bad("alsim-model 9\n");
  CHECK_THROWS_AS(read_model(bad), ParseError);
  std::istringstream truncated("alsim-model 1\nfeature_dim 20\n");
  CHECK_THROWS_AS(read_model(truncated), ParseError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.observation_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
