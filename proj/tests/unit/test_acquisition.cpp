#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "alsim/acquisition.hpp"
#include "alsim/errors.hpp"
#include "oracles.hpp"

using namespace alsim;

namespace {

Detection with_posterior(SceneId scene, const std::vector<double>& p) {
  Detection d;
  d.scene_id = scene;
  std::copy(p.begin(), p.end(), d.posterior.probs.begin());
  return d;
}

std::vector<double> one_hot(std::size_t k) {
  std::vector<double> p(kNumClasses, 0.0);
  p[k] = 1.0;
  return p;
}

}  // namespace

TEST_CASE("entropy: closed forms") {
  const std::vector<double> uniform(kNumClasses, 0.1);
  CHECK(std::abs(entropy_bits(uniform) - std::log2(10.0)) <= 1e-12);
  CHECK(std::abs(entropy_bits(uniform) - 3.321928) <= 1e-6);
  CHECK(entropy_bits(one_hot(3)) == 0.0);
  std::vector<double> binary(kNumClasses, 0.0);
  binary[0] = binary[1] = 0.5;
  CHECK(std::abs(entropy_bits(binary) - 1.0) <= 1e-12);
}

TEST_CASE("entropy: matches term-by-term summation on random simplexes") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto p = oracle::random_simplex(rng, kNumClasses);
    CHECK(std::abs(entropy_bits(p) - oracle::entropy_bits(p)) <= 1e-12);
  }
}

TEST_CASE("entropy: bounds, permutation invariance and concavity") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    auto p = oracle::random_simplex(rng, kNumClasses);
    const auto q = oracle::random_simplex(rng, kNumClasses);
    const double h = entropy_bits(p);
    CHECK(h >= 0.0);
    CHECK(h <= std::log2(10.0) + 1e-12);

    std::vector<double> mix(kNumClasses);
    for (std::size_t k = 0; k < kNumClasses; ++k) mix[k] = 0.5 * p[k] + 0.5 * q[k];
    CHECK(entropy_bits(mix) >= 0.5 * h + 0.5 * entropy_bits(q) - 1e-12);

    std::shuffle(p.begin(), p.end(), rng);
    CHECK(entropy_bits(p) == doctest::Approx(h).epsilon(1e-12));
  }
}

TEST_CASE("entropy: non-simplex input is rejected") {
  std::vector<double> p(kNumClasses, 0.1);
  p[0] = 0.2;
  CHECK_THROWS_AS(entropy_bits(p), ValidationError);
  p[0] = -0.1;
  p[1] = 0.3;
  CHECK_THROWS_AS(entropy_bits(p), ValidationError);
  CHECK_THROWS_AS(entropy_bits(std::vector<double>{}), ValidationError);
}

TEST_CASE("least confidence and margin") {
  CHECK(least_confidence_score(one_hot(2)) == 0.0);
  CHECK(margin_score(one_hot(2)) == 0.0);
  const std::vector<double> uniform(kNumClasses, 0.1);
  CHECK(least_confidence_score(uniform) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(margin_score(uniform) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto p = oracle::random_simplex(rng, kNumClasses);
    double top1 = -1.0, top2 = -1.0;
    for (double v : p) {
      if (v > top1) {
        top2 = top1;
        top1 = v;
      } else if (v > top2) {
        top2 = v;
      }
    }
    CHECK(least_confidence_score(p) == doctest::Approx(1.0 - top1).epsilon(1e-12));
    CHECK(margin_score(p) == doctest::Approx(1.0 - (top1 - top2)).epsilon(1e-12));
  }
}

TEST_CASE("score_scene: aggregation modes") {
  for (auto mode : {AggregationMode::Sum, AggregationMode::Mean, AggregationMode::Max}) {
    const AcquisitionScore s = score_scene({}, mode, 42);
    CHECK(s.score == 0.0);
    CHECK(s.scene_id == 42);
    CHECK(s.num_detections == 0);
  }
  std::vector<double> binary(kNumClasses, 0.0);
  binary[4] = binary[7] = 0.5;
  const std::vector<Detection> two = {with_posterior(3, binary), with_posterior(3, binary)};
  CHECK(score_scene(two, AggregationMode::Sum, 3).score == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(score_scene(two, AggregationMode::Mean, 3).score == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(score_scene(two, AggregationMode::Max, 3).score == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(score_scene(two, AggregationMode::Sum, 3).num_detections == 2);
}

TEST_CASE("score_scene: sum mode equals a brute-force loop") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> count(0, 30);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Detection> dets;
    double want = 0.0, want_max = 0.0;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const auto p = oracle::random_simplex(rng, kNumClasses);
      dets.push_back(with_posterior(8, p));
      want += oracle::entropy_bits(p);
      want_max = std::max(want_max, oracle::entropy_bits(p));
    }
    CHECK(std::abs(score_scene(dets, AggregationMode::Sum, 8).score - want) <= 1e-9);
    CHECK(std::abs(score_scene(dets, AggregationMode::Max, 8).score - want_max) <= 1e-12);
    const double mean = n ? want / n : 0.0;
    CHECK(std::abs(score_scene(dets, AggregationMode::Mean, 8).score - mean) <= 1e-9);
  }
}

TEST_CASE("score_scene: errors") {
  const std::vector<Detection> mixed = {with_posterior(1, one_hot(0)), with_posterior(2, one_hot(0))};
  CHECK_THROWS_AS(score_scene(mixed, AggregationMode::Sum, 1), ValidationError);

  Detection file_only = with_posterior(1, one_hot(0));
  file_only.has_full_posterior = false;
  const std::vector<Detection> v = {file_only};
  CHECK_THROWS_AS(score_scene(v, AggregationMode::Sum, 1), ValidationError);
}

TEST_CASE("score_scene: background-inclusive entropy uses the 11-way posterior") {
  Detection d = with_posterior(1, one_hot(0));
  d.posterior.background_prob = 0.5;
  CHECK(detection_uncertainty(d, AcquisitionMethod::Entropy, false) == 0.0);
  CHECK(detection_uncertainty(d, AcquisitionMethod::Entropy, true) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("select_top_k: ordering and ties") {
  std::vector<AcquisitionScore> scores;
  for (SceneId id : {9u, 3u, 7u, 1u}) scores.push_back({id, 0.5, AcquisitionMethod::Entropy, 1});
  CHECK(select_top_k(scores, 0).empty());
  CHECK(select_top_k(scores, 2) == std::vector<SceneId>{1, 3});
  CHECK_THROWS_AS(select_top_k(scores, 5), SelectionError);

  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> level(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<AcquisitionScore> s;
    std::vector<SceneId> ids(40);
    std::iota(ids.begin(), ids.end(), 100u);
    std::shuffle(ids.begin(), ids.end(), rng);
    for (SceneId id : ids) s.push_back({id, level(rng) * 0.25, AcquisitionMethod::Entropy, 0});
    auto sorted = s;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.score != b.score ? a.score > b.score : a.scene_id < b.scene_id;
    });
    const std::size_t k = static_cast<std::size_t>(trial % 41);
    std::vector<SceneId> want;
    for (std::size_t i = 0; i < k; ++i) want.push_back(sorted[i].scene_id);
    CHECK(select_top_k(s, k) == want);
  }
}

TEST_CASE("random_select: determinism, permutation and uniformity") {
  std::vector<SceneId> pool(20);
  std::iota(pool.begin(), pool.end(), 0u);
  CHECK(random_select(pool, 5, 77) == random_select(pool, 5, 77));
  CHECK_THROWS_AS(random_select(pool, 21, 1), SelectionError);

  auto all = random_select(pool, 20, 3);
  std::sort(all.begin(), all.end());
  CHECK(all == pool);

  auto reversed = pool;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(random_select(reversed, 6, 99) == random_select(pool, 6, 99));

  // Each id is picked with probability k/n = 1/4.
  constexpr int kTrials = 10000;
  std::map<SceneId, int> hits;
  for (int t = 0; t < kTrials; ++t) {
    const auto pick = random_select(pool, 5, static_cast<std::uint64_t>(t));
    CHECK(std::set<SceneId>(pick.begin(), pick.end()).size() == 5);
    for (SceneId id : pick) ++hits[id];
  }
  const double mean = kTrials * 0.25;
  const double sigma = std::sqrt(kTrials * 0.25 * 0.75);
  for (SceneId id : pool) CHECK(std::abs(hits[id] - mean) <= 3.0 * sigma + 1e-9);
}

TEST_CASE("method names round trip") {
  for (auto m : {AcquisitionMethod::Entropy, AcquisitionMethod::Random, AcquisitionMethod::LeastConfidence,
                 AcquisitionMethod::Margin})
    CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_method("least_confidence") == AcquisitionMethod::LeastConfidence);
  CHECK_THROWS_AS(parse_method("bald"), ConfigError);
  for (auto m : {AggregationMode::Sum, AggregationMode::Mean, AggregationMode::Max})
    CHECK(parse_aggregation(to_string(m)) == m);
}

TEST_CASE("write_scores: one row per scene") {
  std::vector<AcquisitionScore> s = {{1, 0.5, AcquisitionMethod::Entropy, 2}, {4, 1.25, AcquisitionMethod::Entropy, 3}};
  std::ostringstream os;
  write_scores(os, s);
  const std::string text = os.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
