#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "alsim/synthgen.hpp"
#include "alsim/types.hpp"

namespace alsim {

/// Softmax outputs: the foreground classes followed by background.
inline constexpr int kNumOutputs = static_cast<int>(kNumClasses) + 1;
inline constexpr int kBackgroundIndex = static_cast<int>(kNumClasses);
/// Regressed box parameters: x, y, z, w, l, h, sin(yaw), cos(yaw).
inline constexpr int kBoxTargets = 8;

using OutputProbs = std::array<double, kNumOutputs>;

struct TrainConfig {
  int epochs = 6;
  double learning_rate = 0.1;  // decayed as lr / sqrt(epoch)
  int batch_size = 64;
  double ridge_lambda = 1e-3;
  double clutter_rate = 2.0;
  double observation_prob = 0.98;
  double background_threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct Candidate {
  std::uint32_t candidate_id = 0;
  std::vector<double> feature;
  std::optional<ObjectId> matched_object;
  std::optional<ClassId> true_class;  // nullopt for clutter
  Box3D observed_box;
};

struct ClassPosterior {
  ClassProbs probs{};  // foreground classes, renormalized
  double background_prob = 0.0;
};

struct Detection {
  SceneId scene_id = 0;
  std::uint32_t candidate_id = 0;
  ClassPosterior posterior;
  ClassId predicted_class = ClassId::Car;
  double confidence = 0.0;
  Box3D predicted_box;
  bool predicted_attribute = false;
  /// False for detections reconstructed from files without class
  /// probabilities; such posteriors are one-hot and unusable for acquisition.
  bool has_full_posterior = true;
};

/// Ridge-fitted affine maps from feature to box and velocity, plus a speed
/// threshold for the binary attribute.
struct ClassRegressor {
  bool trained = false;
  std::size_t num_samples = 0;
  Eigen::MatrixXd box;       // kBoxTargets x (d + 1)
  Eigen::MatrixXd velocity;  // 2 x (d + 1)
  double attribute_threshold = std::numeric_limits<double>::infinity();

  bool operator==(const ClassRegressor& o) const;
};

struct DetectorModel {
  int feature_dim = 0;
  Eigen::MatrixXd class_weights;  // kNumOutputs x (d + 1), bias in last column
  std::array<ClassRegressor, kNumClasses> regressors;
  /// Fallback used by classes without labeled samples.
  ClassRegressor global;
  int epochs_trained = 0;
  std::vector<double> epoch_losses;

  static DetectorModel zeros(int feature_dim);
  bool operator==(const DetectorModel& o) const;
};

/// Numerically stable softmax (log-sum-exp shift).
OutputProbs softmax(std::span<const double, kNumOutputs> logits);

/// softmax(class_weights * [feature; 1]). Throws ShapeError on a dimension
/// mismatch.
OutputProbs predict_proba(const DetectorModel& model, std::span<const double> feature);

/// Splits a full posterior into foreground-renormalized probabilities plus the
/// background mass.
ClassPosterior foreground_posterior(const OutputProbs& p);

/// Argmax with ties going to the lower class index.
ClassId argmax_class(const ClassProbs& probs);

/// Mean cross-entropy of softmax(W x_i) against labels over the rows of
/// `inputs` (each row already carries the trailing 1). When `gradient` is
/// non-null it receives dLoss/dW.
double cross_entropy(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& inputs,
                     std::span<const int> labels, Eigen::MatrixXd* gradient = nullptr);

/// Mini-batch gradient descent from zero weights on standardized inputs.
/// Returns weights expressed in the raw input space, so that predictions are
/// softmax(W [x; 1]). Per-epoch mean losses are appended to `epoch_losses`.
Eigen::MatrixXd fit_softmax(const Eigen::MatrixXd& features, std::span<const int> labels,
                            int num_outputs, const TrainConfig& config,
                            std::vector<double>* epoch_losses = nullptr);

/// Ridge regression with an unpenalized intercept. Returns an
/// outputs x (d + 1) map applied as W [x; 1].
Eigen::MatrixXd fit_ridge(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                          double lambda);

std::vector<Candidate> propose_candidates(const Scene& scene, const FeatureModel& features,
                                          const TrainConfig& config, std::uint64_t seed);

/// Retrains `model` from scratch on the labeled scenes. Throws TrainingError on
/// an empty set.
DetectorModel train(const DetectorModel& model, std::span<const Scene> labeled_scenes,
                    const FeatureModel& features, const TrainConfig& config);

/// Predicted box, velocity and attribute for one feature under a class.
struct Regression {
  Box3D box;
  bool attribute = false;
};
Regression regress(const DetectorModel& model, ClassId cls, std::span<const double> feature);

std::vector<Detection> infer_scene(const DetectorModel& model, const Scene& scene,
                                   const FeatureModel& features, const TrainConfig& config,
                                   std::uint64_t seed);

/// Flat text checkpoint of a model; doubles are written with round-trip
/// precision.
inline constexpr int kModelSchemaVersion = 1;
void write_model(std::ostream& os, const DetectorModel& model);
void write_model(const std::filesystem::path& path, const DetectorModel& model);
DetectorModel read_model(std::istream& is);
DetectorModel read_model(const std::filesystem::path& path);

}  // namespace alsim
