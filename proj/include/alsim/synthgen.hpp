#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "alsim/rng.hpp"
#include "alsim/types.hpp"

namespace alsim {

/// Number of box parameters carried by the feature encoding:
/// x, y, z, w, l, h, sin(yaw), cos(yaw), vx, vy.
inline constexpr int kBoxEncodingDim = 10;

struct ObjectCountDist {
  enum class Kind { Poisson, Fixed };
  Kind kind = Kind::Poisson;
  double mean = 20.0;
  int min_count = 1;
  int max_count = 60;

  bool operator==(const ObjectCountDist&) const = default;
};

struct GenConfig {
  int num_scenes = 850;
  ObjectCountDist objects_per_scene;
  ClassProbs class_frequencies;
  int feature_dim = 20;
  double class_separation = 2.0;
  double feature_noise_sigma = 1.0;
  double box_encoding_noise_sigma = 0.1;
  std::uint64_t seed = 0;

  GenConfig();
  /// Throws ConfigError when the frequencies are not a simplex or a count is
  /// out of range.
  void validate() const;

  bool operator==(const GenConfig&) const = default;
};

/// Raw class frequencies in percent, most to least frequent per the class
/// order. They sum to 97.27.
inline constexpr std::array<double, kNumClasses> kRawClassFrequencyPercent = {
    42.30, 19.05, 13.04, 8.40, 7.59, 2.13, 1.4, 1.26, 1.08, 1.02};

/// The raw frequencies normalized to a simplex.
ClassProbs class_frequency_table();

/// Per-class geometry priors used for sampling boxes.
struct ClassProfile {
  double width, length, height;  // mean size, meters
  double size_rel_sigma;
  double moving_prob;
  double speed_mean, speed_sigma;  // m/s when moving
};
const ClassProfile& class_profile(ClassId c);

/// Fixed observation geometry shared by every dataset with the same feature
/// dimension and separation: class signatures plus the box encoding matrix.
class FeatureModel {
 public:
  FeatureModel(int feature_dim, double class_separation,
               double feature_noise_sigma, double box_encoding_noise_sigma);
  explicit FeatureModel(const GenConfig& config);

  int feature_dim() const { return feature_dim_; }
  int signature_dim() const { return feature_dim_ - kBoxEncodingDim; }

  /// Noiseless class signature (length signature_dim()).
  Eigen::VectorXd signature(ClassId c) const { return signatures_.col(static_cast<int>(index_of(c))); }
  /// The 10 box parameters in encoding order.
  static Eigen::VectorXd box_parameters(const Box3D& box);
  const Eigen::MatrixXd& encoding_matrix() const { return encoding_; }

  std::vector<double> object_feature(ClassId c, const Box3D& box, Rng& rng) const;
  /// Feature of a clutter candidate: signature drawn around a background
  /// center opposite the class signatures, box encoding of the clutter box.
  std::vector<double> background_feature(const Box3D& box, Rng& rng) const;

 private:
  void encode_box_into(const Box3D& box, Rng& rng, std::span<double> out) const;

  int feature_dim_;
  double noise_sigma_;
  double box_noise_sigma_;
  Eigen::MatrixXd signatures_;  // signature_dim x kNumClasses
  Eigen::VectorXd background_center_;
  Eigen::MatrixXd encoding_;    // kBoxEncodingDim x kBoxEncodingDim
};

/// Random clutter box: uniform position, broad size range, zero velocity.
Box3D random_clutter_box(Rng& rng);

Dataset generate_dataset(const GenConfig& config);

/// Line-delimited dataset file: a header record followed by one scene per line.
inline constexpr int kDatasetSchemaVersion = 1;
void write_dataset(std::ostream& os, const GenConfig& config, const Dataset& data);
void write_dataset(const std::filesystem::path& path, const GenConfig& config,
                   const Dataset& data);
struct LoadedDataset {
  GenConfig config;
  Dataset scenes;
};
LoadedDataset read_dataset(std::istream& is);
LoadedDataset read_dataset(const std::filesystem::path& path);

/// Counts of objects per class across a dataset (or a subset of scenes).
std::array<std::uint64_t, kNumClasses> class_counts(std::span<const Scene> scenes);

}  // namespace alsim
