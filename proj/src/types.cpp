#include "alsim/types.hpp"

#include <cmath>
#include <numbers>

namespace alsim {

namespace {
constexpr std::array<std::string_view, kNumClasses> kDisplayNames = {
    "Car",   "Pedestrian", "Barrier", "Traffic Cone", "Truck", "Trailer",
    "Bus",   "Construction Vehicle", "Motorcycle", "Bicycle"};
constexpr std::array<std::string_view, kNumClasses> kDetectionNames = {
    "car",   "pedestrian", "barrier", "traffic_cone", "truck", "trailer",
    "bus",   "construction_vehicle", "motorcycle", "bicycle"};
}  // namespace

std::string_view display_name(ClassId c) { return kDisplayNames[index_of(c)]; }
std::string_view detection_name(ClassId c) { return kDetectionNames[index_of(c)]; }

std::optional<ClassId> class_from_detection_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (kDetectionNames[i] == name) return class_at(i);
  return std::nullopt;
}

double normalize_yaw(double yaw) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(yaw + std::numbers::pi, two_pi);
  if (r < 0) r += two_pi;
  r -= std::numbers::pi;
  // fmod can land exactly on +pi after the shift for inputs just below -pi.
  if (r >= std::numbers::pi) r -= two_pi;
  return r;
}

}  // namespace alsim
