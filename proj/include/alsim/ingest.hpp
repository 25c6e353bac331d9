#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "alsim/detector.hpp"
#include "alsim/metrics.hpp"
#include "alsim/types.hpp"

namespace alsim {

inline constexpr int kExternalSchemaVersion = 1;

/// One box record in the nuScenes devkit layout.
struct ExternalBox {
  std::array<double, 3> translation{};
  std::array<double, 3> size{};      // width, length, height
  std::array<double, 4> rotation{};  // quaternion w, x, y, z
  double yaw = 0.0;                  // derived from rotation
  std::array<double, 2> velocity{};
  ClassId cls = ClassId::Car;
  std::string attribute_name;

  bool operator==(const ExternalBox&) const = default;
};

struct ExternalAnnotationSet {
  /// Sample token -> ground-truth boxes, ordered by token.
  std::map<std::string, std::vector<ExternalBox>> samples;
  /// Records whose detection_name is not one of the ten classes.
  std::map<std::string, std::size_t> dropped_by_name;

  std::size_t dropped_count() const;
  bool operator==(const ExternalAnnotationSet&) const = default;
};

struct ExternalResultSet {
  std::vector<std::string> sample_tokens;  // sorted; Detection::scene_id indexes this
  std::vector<Detection> detections;
};

/// Binary attribute flag for an attribute name ("vehicle.moving" -> true).
bool attribute_flag(std::string_view attribute_name);
/// Attribute name written for a class and flag; empty for cones and barriers.
std::string attribute_name_for(ClassId cls, bool flag);

/// Yaw about the vertical axis from a (w, x, y, z) quaternion.
double quaternion_yaw(const std::array<double, 4>& q);
std::array<double, 4> yaw_quaternion(double yaw);

/// Throws IoError when the file is missing and ParseError naming the sample
/// and record index for malformed content.
ExternalAnnotationSet load_annotations(const std::filesystem::path& path);
ExternalResultSet load_results(const std::filesystem::path& path);

/// Converts a synthetic dataset to the external layout. Sample tokens are
/// "synth-<scene id, 6 digits>".
ExternalAnnotationSet to_annotation_set(std::span<const Scene> dataset);
void export_annotations(std::span<const Scene> dataset, const std::filesystem::path& path);
void write_annotations(const ExternalAnnotationSet& set, const std::filesystem::path& path);

/// Writes detections (scene ids mapped through `sample_token_of`) in the
/// results layout, including the class-probability extension field.
void export_results(std::span<const Detection> detections,
                    const std::map<SceneId, std::string>& sample_token_of,
                    const std::filesystem::path& path);
std::string synthetic_sample_token(SceneId id);

/// Annotation set as scenes; scene ids follow token order.
struct ExternalScenes {
  std::vector<std::string> sample_tokens;
  Dataset scenes;
};
ExternalScenes to_scenes(const ExternalAnnotationSet& set);

/// Evaluation options for real nuScenes files: cones and barriers carry no
/// attribute.
EvalOptions external_eval_options();

/// Evaluates a result file against an annotation file. Results naming a
/// sample absent from the annotations raise ValidationError.
EvalReport evaluate_external(const ExternalAnnotationSet& annotations, const ExternalResultSet& results);

}  // namespace alsim
