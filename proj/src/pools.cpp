#include "alsim/pools.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>

#include <fmt/format.h>

#include "alsim/errors.hpp"
#include "alsim/rng.hpp"

namespace alsim {

void BudgetSchedule::validate() const {
  auto in_unit = [](double f) { return f > 0.0 && f <= 1.0; };
  if (!(initial_fraction >= 0.0 && initial_fraction <= 1.0))
    throw ConfigError(fmt::format("initial_fraction {} outside [0, 1]", initial_fraction));
  if (!(increment_fraction >= 0.0 && increment_fraction <= 1.0))
    throw ConfigError(fmt::format("increment_fraction {} outside [0, 1]", increment_fraction));
  if (num_rounds < 1) throw ConfigError("num_rounds must be at least 1");
  if (!in_unit(fraction_per_week))
    throw ConfigError(fmt::format("fraction_per_week {} outside (0, 1]", fraction_per_week));
  if (round_fraction(num_rounds - 1) > 1.0 + 1e-12)
    throw ConfigError(fmt::format("schedule reaches {:.4f} of the pool by its last round",
                                  round_fraction(num_rounds - 1)));
}

std::size_t round_scene_count(double x) {
  // Snap away representation noise (0.35 * 700 = 244.99999999999997) before
  // the tie-to-even rounding.
  const double snapped = std::round(x * 1e6) / 1e6;
  const int old = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(snapped);
  std::fesetround(old);
  return r <= 0.0 ? 0 : static_cast<std::size_t>(r);
}

PoolState init_split(std::span<const Scene> dataset, std::size_t validation_count,
                     double initial_fraction, std::uint64_t seed) {
  if (validation_count >= dataset.size())
    throw ConfigError(fmt::format("validation_count {} must be smaller than the dataset ({} scenes)",
                                  validation_count, dataset.size()));
  if (!(initial_fraction >= 0.0 && initial_fraction <= 1.0))
    throw ConfigError(fmt::format("initial_fraction {} outside [0, 1]", initial_fraction));

  std::vector<SceneId> ids;
  ids.reserve(dataset.size());
  for (const Scene& s : dataset) ids.push_back(s.scene_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ConfigError("dataset contains duplicate scene ids");

  Rng rng(derive_seed(seed, {stream::kSplit}));
  std::shuffle(ids.begin(), ids.end(), rng);

  const std::size_t remaining = ids.size() - validation_count;
  const std::size_t n_labeled = std::min(remaining, round_scene_count(initial_fraction * remaining));

  PoolState st;
  st.validation.assign(ids.begin(), ids.begin() + validation_count);
  st.labeled.assign(ids.begin() + validation_count, ids.begin() + validation_count + n_labeled);
  st.unlabeled.assign(ids.begin() + validation_count + n_labeled, ids.end());
  std::sort(st.validation.begin(), st.validation.end());
  std::sort(st.labeled.begin(), st.labeled.end());
  std::sort(st.unlabeled.begin(), st.unlabeled.end());
  return st;
}

double weeks_to_fraction(double weeks, double fraction_per_week) {
  return std::min(1.0, weeks * fraction_per_week);
}

PoolState transfer(const PoolState& state, std::span<const SceneId> selected) {
  std::vector<SceneId> moving(selected.begin(), selected.end());
  std::sort(moving.begin(), moving.end());
  if (auto dup = std::adjacent_find(moving.begin(), moving.end()); dup != moving.end())
    throw SelectionError(fmt::format("scene {} selected more than once", *dup));
  for (SceneId id : selected)
    if (!std::binary_search(state.unlabeled.begin(), state.unlabeled.end(), id))
      throw SelectionError(fmt::format("scene {} is not in the unlabeled pool", id));

  PoolState next;
  next.validation = state.validation;
  std::set_union(state.labeled.begin(), state.labeled.end(), moving.begin(), moving.end(),
                 std::back_inserter(next.labeled));
  std::set_difference(state.unlabeled.begin(), state.unlabeled.end(), moving.begin(), moving.end(),
                      std::back_inserter(next.unlabeled));
  next.round_index = state.round_index + 1;
  return next;
}

std::size_t round_cumulative_target(const BudgetSchedule& schedule, int round_index,
                                    std::size_t train_pool_size) {
  if (round_index < 0 || round_index >= schedule.num_rounds)
    throw ConfigError(fmt::format("round {} outside schedule of {} rounds", round_index,
                                  schedule.num_rounds));
  const double frac = std::min(1.0, schedule.round_fraction(round_index));
  return std::min(train_pool_size, round_scene_count(frac * static_cast<double>(train_pool_size)));
}

std::size_t round_target_count(const BudgetSchedule& schedule, int round_index,
                               std::size_t train_pool_size, std::size_t labeled_count) {
  const std::size_t target = round_cumulative_target(schedule, round_index, train_pool_size);
  return target > labeled_count ? target - labeled_count : 0;
}

void check_pool_invariants(const PoolState& st) {
  for (const auto* v : {&st.labeled, &st.unlabeled, &st.validation})
    if (!std::is_sorted(v->begin(), v->end()) || std::adjacent_find(v->begin(), v->end()) != v->end())
      throw ValidationError("pool sets must be sorted and duplicate-free");
  std::vector<SceneId> tmp;
  std::set_intersection(st.labeled.begin(), st.labeled.end(), st.unlabeled.begin(),
                        st.unlabeled.end(), std::back_inserter(tmp));
  std::set_intersection(st.labeled.begin(), st.labeled.end(), st.validation.begin(),
                        st.validation.end(), std::back_inserter(tmp));
  std::set_intersection(st.unlabeled.begin(), st.unlabeled.end(), st.validation.begin(),
                        st.validation.end(), std::back_inserter(tmp));
  if (!tmp.empty()) throw ValidationError(fmt::format("scene {} appears in two pools", tmp.front()));
}

}  // namespace alsim
