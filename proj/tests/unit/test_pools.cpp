#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "alsim/errors.hpp"
#include "alsim/pools.hpp"

using namespace alsim;

namespace {

std::vector<Scene> empty_scenes(std::size_t n) {
  std::vector<Scene> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].scene_id = static_cast<SceneId>(i);
  return out;
}

}  // namespace

TEST_CASE("weeks_to_fraction: annotation budget table") {
  const double table[10] = {2.52, 5.04, 7.56, 10.08, 12.60, 15.12, 17.64, 20.16, 22.68, 25.20};
  for (int w = 1; w <= 10; ++w) {
    const double pct = 100.0 * weeks_to_fraction(w);
    CHECK(std::round(pct * 100.0) / 100.0 == table[w - 1]);
    CHECK(std::abs(pct - table[w - 1]) < 1e-9);
  }
  CHECK(weeks_to_fraction(100) == 1.0);
}

TEST_CASE("round_scene_count: half to even") {
  CHECK(round_scene_count(0.5) == 0);
  CHECK(round_scene_count(1.5) == 2);
  CHECK(round_scene_count(2.5) == 2);
  CHECK(round_scene_count(2.4999) == 2);
  CHECK(round_scene_count(0.35 * 700) == 245);
  CHECK(round_scene_count(0.0) == 0);
}

TEST_CASE("init_split: sizes") {
  const auto scenes = empty_scenes(850);
  const PoolState st = init_split(scenes, 150, 0.10, 1);
  CHECK(st.validation.size() == 150);
  CHECK(st.train_pool_size() == 700);
  CHECK(st.labeled.size() == 70);
  CHECK(st.round_index == 0);
  check_pool_invariants(st);

  const PoolState zero = init_split(scenes, 150, 0.0, 1);
  CHECK(zero.labeled.empty());
  CHECK(zero.unlabeled.size() == 700);

  CHECK_THROWS_AS(init_split(scenes, 850, 0.1, 1), ConfigError);
  CHECK(init_split(scenes, 150, 0.10, 1) == st);
  CHECK_FALSE(init_split(scenes, 150, 0.10, 2) == st);
}

TEST_CASE("transfer: moves, errors and exhaustion") {
  const auto scenes = empty_scenes(50);
  const PoolState st = init_split(scenes, 10, 0.2, 3);

  const PoolState same = transfer(st, {});
  CHECK(same.labeled == st.labeled);
  CHECK(same.unlabeled == st.unlabeled);
  CHECK(same.round_index == 1);

  const PoolState all = transfer(st, st.unlabeled);
  CHECK(all.unlabeled.empty());
  CHECK(all.labeled.size() == 40);

  const std::vector<SceneId> bad = {st.unlabeled[0], st.validation[0]};
  try {
    transfer(st, bad);
    FAIL("expected SelectionError");
  } catch (const SelectionError& e) {
    CHECK(std::string(e.what()).find(std::to_string(st.validation[0])) != std::string::npos);
  }
  const std::vector<SceneId> dup = {st.unlabeled[0], st.unlabeled[0]};
  CHECK_THROWS_AS(transfer(st, dup), SelectionError);
}

TEST_CASE("transfer: disjointness and conservation under random sequences") {
  std::mt19937_64 rng(17);
  const auto scenes = empty_scenes(300);
  for (int trial = 0; trial < 50; ++trial) {
    PoolState st = init_split(scenes, 40, 0.1, static_cast<std::uint64_t>(trial));
    const std::set<SceneId> validation(st.validation.begin(), st.validation.end());
    while (!st.unlabeled.empty()) {
      std::uniform_int_distribution<std::size_t> how_many(0, std::min<std::size_t>(st.unlabeled.size(), 30));
      std::vector<SceneId> pick = st.unlabeled;
      std::shuffle(pick.begin(), pick.end(), rng);
      pick.resize(how_many(rng));
      const PoolState next = transfer(st, pick);
      CHECK(next.labeled.size() == st.labeled.size() + pick.size());
      CHECK(next.unlabeled.size() == st.unlabeled.size() - pick.size());
      CHECK(next.train_pool_size() == 260);
      CHECK(std::set<SceneId>(next.validation.begin(), next.validation.end()) == validation);
      check_pool_invariants(next);
      st = next;
    }
  }
}

TEST_CASE("round targets") {
  const BudgetSchedule def;
  CHECK(round_cumulative_target(def, 0, 700) == 70);
  CHECK(round_cumulative_target(def, 5, 700) == 245);
  CHECK(round_target_count(def, 1, 700, 70) == 35);
  CHECK(round_target_count(def, 1, 700, 200) == 0);
  CHECK_THROWS_AS(round_cumulative_target(def, 6, 700), ConfigError);
  CHECK_THROWS_AS(round_cumulative_target(def, -1, 700), ConfigError);

  BudgetSchedule flat;
  flat.increment_fraction = 0.0;
  for (int r = 0; r < flat.num_rounds; ++r) {
    CHECK(round_cumulative_target(flat, r, 700) == 70);
    CHECK(round_target_count(flat, r, 700, 70) == 0);
  }

  // Increments sum to the cumulative target.
  std::size_t labeled = round_cumulative_target(def, 0, 700);
  for (int r = 1; r < def.num_rounds; ++r) labeled += round_target_count(def, r, 700, labeled);
  CHECK(labeled == 245);
}

TEST_CASE("schedule validation") {
  BudgetSchedule s;
  CHECK_NOTHROW(s.validate());
  s.num_rounds = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = BudgetSchedule{};
  s.increment_fraction = 0.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("check_pool_invariants: overlap is rejected") {
  PoolState st;
  st.labeled = {1, 2};
  st.unlabeled = {2, 3};
  CHECK_THROWS_AS(check_pool_invariants(st), ValidationError);
  st.unlabeled = {3, 4};
  st.validation = {0};
  CHECK_NOTHROW(check_pool_invariants(st));
}
