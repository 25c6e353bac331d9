#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "alsim/types.hpp"

namespace alsim {

/// Labeled / unlabeled / validation partition of the scene ids. Each set is
/// kept sorted ascending; transitions return new values.
struct PoolState {
  std::vector<SceneId> labeled;
  std::vector<SceneId> unlabeled;
  std::vector<SceneId> validation;
  int round_index = 0;

  std::size_t train_pool_size() const { return labeled.size() + unlabeled.size(); }
  bool operator==(const PoolState&) const = default;
};

struct BudgetSchedule {
  double initial_fraction = 0.10;
  double increment_fraction = 0.05;
  int num_rounds = 6;
  double fraction_per_week = 0.0252;

  void validate() const;
  /// Cumulative fraction of the train pool labeled at the given round.
  double round_fraction(int round_index) const {
    return initial_fraction + round_index * increment_fraction;
  }
  bool operator==(const BudgetSchedule&) const = default;
};

/// Round-half-to-even on a non-negative real scene count.
std::size_t round_scene_count(double x);

/// Samples the validation set, then labels round(initial_fraction * rest) of
/// the remaining scenes. Everything else is unlabeled.
PoolState init_split(std::span<const Scene> dataset, std::size_t validation_count,
                     double initial_fraction, std::uint64_t seed);

/// Annotation weeks to train-pool fraction, capped at 1.
double weeks_to_fraction(double weeks, double fraction_per_week = 0.0252);

/// Moves `selected` from unlabeled to labeled and advances the round.
/// Throws SelectionError naming the first id that is not unlabeled.
PoolState transfer(const PoolState& state, std::span<const SceneId> selected);

/// Number of scenes to select so that the labeled set reaches the cumulative
/// target of `round_index`. Zero when the labeled set is already there.
std::size_t round_target_count(const BudgetSchedule& schedule, int round_index,
                               std::size_t train_pool_size, std::size_t labeled_count);

/// Cumulative target (in scenes) for a round.
std::size_t round_cumulative_target(const BudgetSchedule& schedule, int round_index,
                                    std::size_t train_pool_size);

/// Throws ValidationError if the sets overlap or are unsorted.
void check_pool_invariants(const PoolState& state);

}  // namespace alsim
