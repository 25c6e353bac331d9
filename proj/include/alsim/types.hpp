#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace alsim {

/// Foreground object classes. The enumerator order is the canonical total
/// order used for every deterministic tie-break in the library.
enum class ClassId : std::uint8_t {
  Car = 0,
  Pedestrian,
  Barrier,
  TrafficCone,
  Truck,
  Trailer,
  Bus,
  ConstructionVehicle,
  Motorcycle,
  Bicycle,
};

inline constexpr std::size_t kNumClasses = 10;

inline constexpr std::array<ClassId, kNumClasses> kAllClasses = {
    ClassId::Car,     ClassId::Pedestrian, ClassId::Barrier,
    ClassId::TrafficCone, ClassId::Truck, ClassId::Trailer,
    ClassId::Bus,     ClassId::ConstructionVehicle, ClassId::Motorcycle,
    ClassId::Bicycle,
};

constexpr std::size_t index_of(ClassId c) { return static_cast<std::size_t>(c); }
constexpr ClassId class_at(std::size_t i) { return static_cast<ClassId>(i); }

/// Human-readable name ("Car", "Traffic Cone", ...).
std::string_view display_name(ClassId c);
/// nuScenes detection name ("car", "traffic_cone", ...).
std::string_view detection_name(ClassId c);
std::optional<ClassId> class_from_detection_name(std::string_view name);

using SceneId = std::uint32_t;
using ObjectId = std::uint64_t;

/// Oriented 3D box with planar velocity. Dimensions are in meters, yaw in
/// radians normalized to [-pi, pi).
struct Box3D {
  double center_x = 0.0;
  double center_y = 0.0;
  double center_z = 0.0;
  double width = 1.0;
  double length = 1.0;
  double height = 1.0;
  double yaw = 0.0;
  double velocity_x = 0.0;
  double velocity_y = 0.0;

  bool operator==(const Box3D&) const = default;
};

/// Wraps an angle into [-pi, pi).
double normalize_yaw(double yaw);

struct GroundTruthObject {
  ObjectId object_id = 0;
  ClassId cls = ClassId::Car;
  Box3D box;
  bool attribute = false;
  std::vector<double> feature;

  bool operator==(const GroundTruthObject&) const = default;
};

struct Scene {
  SceneId scene_id = 0;
  std::vector<GroundTruthObject> objects;

  bool operator==(const Scene&) const = default;
};

using Dataset = std::vector<Scene>;

/// Probability vector over the foreground classes.
using ClassProbs = std::array<double, kNumClasses>;

}  // namespace alsim
