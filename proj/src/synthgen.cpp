#include "alsim/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/QR>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "alsim/errors.hpp"
#include "alsim/json_io.hpp"

namespace alsim {

namespace {

// The observation geometry is a property of the simulated sensor, not of a
// particular dataset draw, so it has its own constant seed.
constexpr std::uint64_t kGeometrySeed = 0x5eed0f5e45021ULL;

constexpr double kSceneHalfExtent = 40.0;  // meters
constexpr int kSignatureDraws = 64;
// (first index, width) of position, size, heading and velocity parameters.
constexpr std::array<std::pair<int, int>, 4> kEncodingGroups = {{{0, 3}, {3, 3}, {6, 2}, {8, 2}}};

const std::array<ClassProfile, kNumClasses> kProfiles = {{
    {1.95, 4.62, 1.73, 0.10, 0.45, 8.0, 3.0},   // Car
    {0.67, 0.73, 1.77, 0.10, 0.60, 1.3, 0.3},   // Pedestrian
    {2.53, 0.50, 0.98, 0.10, 0.00, 0.0, 0.0},   // Barrier
    {0.41, 0.41, 1.07, 0.10, 0.00, 0.0, 0.0},   // TrafficCone
    {2.51, 6.93, 2.84, 0.10, 0.40, 7.0, 3.0},   // Truck
    {2.90, 12.29, 3.87, 0.10, 0.30, 6.0, 3.0},  // Trailer
    {2.94, 11.19, 3.47, 0.10, 0.50, 7.0, 3.0},  // Bus
    {2.73, 6.37, 3.19, 0.10, 0.20, 2.0, 1.0},   // ConstructionVehicle
    {0.77, 2.11, 1.47, 0.10, 0.50, 6.0, 3.0},   // Motorcycle
    {0.60, 1.70, 1.28, 0.10, 0.50, 4.0, 1.5},   // Bicycle
}};

double positive_size(double mean, double rel_sigma, Rng& rng) {
  std::normal_distribution<double> n(mean, mean * rel_sigma);
  return std::max(0.05 * mean, n(rng));
}

Box3D sample_object_box(ClassId c, Rng& rng, bool& moving) {
  const ClassProfile& p = kProfiles[index_of(c)];
  std::uniform_real_distribution<double> pos(-kSceneHalfExtent, kSceneHalfExtent);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution is_moving(p.moving_prob);

  Box3D b;
  b.center_x = pos(rng);
  b.center_y = pos(rng);
  b.width = positive_size(p.width, p.size_rel_sigma, rng);
  b.length = positive_size(p.length, p.size_rel_sigma, rng);
  b.height = positive_size(p.height, p.size_rel_sigma, rng);
  b.center_z = 0.5 * b.height + 0.1 * unit(rng);
  b.yaw = normalize_yaw(ang(rng));
  moving = is_moving(rng);
  if (moving) {
    const double speed = std::max(1.0, p.speed_mean + p.speed_sigma * unit(rng));
    b.velocity_x = speed * std::cos(b.yaw);
    b.velocity_y = speed * std::sin(b.yaw);
  } else {
    b.velocity_x = 0.05 * unit(rng);
    b.velocity_y = 0.05 * unit(rng);
  }
  return b;
}

int sample_object_count(const ObjectCountDist& dist, Rng& rng) {
  if (dist.kind == ObjectCountDist::Kind::Fixed) return static_cast<int>(std::lround(dist.mean));
  std::poisson_distribution<int> pois(dist.mean);
  for (;;) {
    const int n = pois(rng);
    if (n >= dist.min_count && n <= dist.max_count) return n;
  }
}

}  // namespace

GenConfig::GenConfig() : class_frequencies(class_frequency_table()) {}

void GenConfig::validate() const {
  if (num_scenes <= 0) throw ConfigError(fmt::format("num_scenes must be positive, got {}", num_scenes));
  double sum = 0.0;
  for (double f : class_frequencies) {
    if (!(f >= 0.0) || !std::isfinite(f))
      throw ConfigError("class_frequencies entries must be finite and non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError(fmt::format("class_frequencies must sum to 1 (got {:.12f})", sum));
  if (feature_dim <= kBoxEncodingDim)
    throw ConfigError(fmt::format("feature_dim must exceed {} (box encoding width), got {}",
                                  kBoxEncodingDim, feature_dim));
  const auto& d = objects_per_scene;
  if (d.min_count < 0 || d.max_count < d.min_count || d.mean < 0.0)
    throw ConfigError("objects_per_scene bounds are invalid");
  if (d.kind == ObjectCountDist::Kind::Poisson && d.max_count == 0)
    throw ConfigError("objects_per_scene max_count must be positive");
  if (!(class_separation > 0.0) || !(feature_noise_sigma >= 0.0) || !(box_encoding_noise_sigma >= 0.0))
    throw ConfigError("separation must be positive and noise sigmas non-negative");
}

ClassProbs class_frequency_table() {
  ClassProbs out{};
  const double total = std::accumulate(kRawClassFrequencyPercent.begin(),
                                       kRawClassFrequencyPercent.end(), 0.0);
  for (std::size_t i = 0; i < kNumClasses; ++i) out[i] = kRawClassFrequencyPercent[i] / total;
  return out;
}

const ClassProfile& class_profile(ClassId c) { return kProfiles[index_of(c)]; }

FeatureModel::FeatureModel(int feature_dim, double class_separation,
                           double feature_noise_sigma, double box_encoding_noise_sigma)
    : feature_dim_(feature_dim),
      noise_sigma_(feature_noise_sigma),
      box_noise_sigma_(box_encoding_noise_sigma) {
  if (feature_dim <= kBoxEncodingDim)
    throw ConfigError(fmt::format("feature_dim must exceed {}", kBoxEncodingDim));
  Rng rng(derive_seed(kGeometrySeed, {static_cast<std::uint64_t>(feature_dim)}));
  std::normal_distribution<double> unit(0.0, 1.0);

  // Class directions: orthonormal when the signature space has room for one
  // axis per class, otherwise the best of several random draws by minimum
  // pairwise distance.
  const int sig_dim = signature_dim();
  const int classes = static_cast<int>(kNumClasses);
  if (sig_dim >= classes) {
    Eigen::MatrixXd g(sig_dim, classes);
    for (int i = 0; i < sig_dim; ++i)
      for (int j = 0; j < classes; ++j) g(i, j) = unit(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    signatures_ = class_separation * (qr.householderQ() * Eigen::MatrixXd::Identity(sig_dim, classes));
  } else {
    double best_min = -1.0;
    for (int attempt = 0; attempt < kSignatureDraws; ++attempt) {
      Eigen::MatrixXd dirs(sig_dim, classes);
      for (int c = 0; c < classes; ++c) {
        Eigen::VectorXd v(sig_dim);
        do {
          for (int k = 0; k < sig_dim; ++k) v(k) = unit(rng);
        } while (v.norm() < 1e-6);
        dirs.col(c) = v.normalized();
      }
      double min_dist = std::numeric_limits<double>::infinity();
      for (int a = 0; a < classes; ++a)
        for (int b = a + 1; b < classes; ++b) min_dist = std::min(min_dist, (dirs.col(a) - dirs.col(b)).norm());
      if (min_dist > best_min) {
        best_min = min_dist;
        signatures_ = class_separation * dirs;
      }
    }
  }

  // Clutter sits opposite the mean class direction, at the class distance
  // from the origin.
  const Eigen::VectorXd mean_dir = signatures_.rowwise().mean();
  background_center_ = mean_dir.norm() > 1e-12 ? Eigen::VectorXd(-class_separation * mean_dir.normalized())
                                               : Eigen::VectorXd::Zero(sig_dim);

  // Rotations act within each parameter group so that position spread does
  // not swamp the size and motion cues.
  encoding_ = Eigen::MatrixXd::Zero(kBoxEncodingDim, kBoxEncodingDim);
  for (const auto& [start, width] : kEncodingGroups) {
    Eigen::MatrixXd g(width, width);
    for (int i = 0; i < width; ++i)
      for (int j = 0; j < width; ++j) g(i, j) = unit(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    encoding_.block(start, start, width, width) = qr.householderQ() * Eigen::MatrixXd::Identity(width, width);
  }
}

FeatureModel::FeatureModel(const GenConfig& config)
    : FeatureModel(config.feature_dim, config.class_separation, config.feature_noise_sigma,
                   config.box_encoding_noise_sigma) {}

Eigen::VectorXd FeatureModel::box_parameters(const Box3D& b) {
  Eigen::VectorXd p(kBoxEncodingDim);
  p << b.center_x, b.center_y, b.center_z, b.width, b.length, b.height, std::sin(b.yaw),
      std::cos(b.yaw), b.velocity_x, b.velocity_y;
  return p;
}

void FeatureModel::encode_box_into(const Box3D& box, Rng& rng, std::span<double> out) const {
  std::normal_distribution<double> noise(0.0, 1.0);
  const Eigen::VectorXd enc = encoding_ * box_parameters(box);
  for (int k = 0; k < kBoxEncodingDim; ++k) out[k] = enc(k) + box_noise_sigma_ * noise(rng);
}

std::vector<double> FeatureModel::object_feature(ClassId c, const Box3D& box, Rng& rng) const {
  std::vector<double> f(static_cast<std::size_t>(feature_dim_));
  std::normal_distribution<double> noise(0.0, 1.0);
  const int sig_dim = signature_dim();
  const int ci = static_cast<int>(index_of(c));
  for (int k = 0; k < sig_dim; ++k) f[k] = signatures_(k, ci) + noise_sigma_ * noise(rng);
  encode_box_into(box, rng, std::span<double>(f).subspan(sig_dim));
  return f;
}

std::vector<double> FeatureModel::background_feature(const Box3D& box, Rng& rng) const {
  std::vector<double> f(static_cast<std::size_t>(feature_dim_));
  std::normal_distribution<double> noise(0.0, 1.0);
  const int sig_dim = signature_dim();
  for (int k = 0; k < sig_dim; ++k) f[k] = background_center_(k) + noise_sigma_ * noise(rng);
  encode_box_into(box, rng, std::span<double>(f).subspan(sig_dim));
  return f;
}

Box3D random_clutter_box(Rng& rng) {
  std::uniform_real_distribution<double> pos(-kSceneHalfExtent, kSceneHalfExtent);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> w(0.3, 3.0), l(0.3, 12.0), h(0.5, 4.0);
  Box3D b;
  b.center_x = pos(rng);
  b.center_y = pos(rng);
  b.width = w(rng);
  b.length = l(rng);
  b.height = h(rng);
  b.center_z = 0.5 * b.height;
  b.yaw = normalize_yaw(ang(rng));
  return b;
}

Dataset generate_dataset(const GenConfig& config) {
  config.validate();
  const FeatureModel features(config);
  Rng rng(derive_seed(config.seed, {stream::kGenerate}));
  std::discrete_distribution<int> class_dist(config.class_frequencies.begin(),
                                             config.class_frequencies.end());

  Dataset out;
  out.reserve(static_cast<std::size_t>(config.num_scenes));
  for (int s = 0; s < config.num_scenes; ++s) {
    Scene scene;
    scene.scene_id = static_cast<SceneId>(s);
    const int n = sample_object_count(config.objects_per_scene, rng);
    scene.objects.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      GroundTruthObject obj;
      obj.object_id = (static_cast<ObjectId>(scene.scene_id) << 16) | static_cast<ObjectId>(k);
      obj.cls = class_at(static_cast<std::size_t>(class_dist(rng)));
      bool moving = false;
      obj.box = sample_object_box(obj.cls, rng, moving);
      obj.attribute = moving;
      obj.feature = features.object_feature(obj.cls, obj.box, rng);
      scene.objects.push_back(std::move(obj));
    }
    out.push_back(std::move(scene));
  }
  return out;
}

std::array<std::uint64_t, kNumClasses> class_counts(std::span<const Scene> scenes) {
  std::array<std::uint64_t, kNumClasses> counts{};
  for (const Scene& s : scenes)
    for (const auto& o : s.objects) ++counts[index_of(o.cls)];
  return counts;
}

// ---------------------------------------------------------------------------
// Dataset file

void write_dataset(std::ostream& os, const GenConfig& config, const Dataset& data) {
  nlohmann::json header = {{"schema", "alsim.dataset"},
                           {"version", kDatasetSchemaVersion},
                           {"num_scenes", data.size()},
                           {"gen_config", config}};
  os << header.dump() << '\n';
  for (const Scene& s : data) os << nlohmann::json(s).dump() << '\n';
}

void write_dataset(const std::filesystem::path& path, const GenConfig& config, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  write_dataset(os, config, data);
  if (!os) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

LoadedDataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("dataset file is empty");
  LoadedDataset out;
  std::size_t expected = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("schema").get<std::string>() != "alsim.dataset")
      throw ParseError("dataset header: unexpected schema tag");
    const int version = header.at("version").get<int>();
    if (version != kDatasetSchemaVersion)
      throw ParseError(fmt::format("dataset header: unsupported version {}", version));
    out.config = header.at("gen_config").get<GenConfig>();
    expected = header.at("num_scenes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("dataset header: {}", e.what()));
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.scenes.push_back(nlohmann::json::parse(line).get<Scene>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("dataset line {}: {}", line_no, e.what()));
    }
  }
  if (out.scenes.size() != expected)
    throw ParseError(fmt::format("dataset declares {} scenes but holds {}", expected, out.scenes.size()));
  return out;
}

LoadedDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return read_dataset(is);
}

}  // namespace alsim
