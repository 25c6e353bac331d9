#include "alsim/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "alsim/errors.hpp"

namespace alsim {

using nlohmann::json;

namespace {

constexpr std::string_view kAnnotationSchema = "alsim.nuscenes_annotations";
constexpr std::string_view kResultSchema = "alsim.nuscenes_results";

json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  os << j.dump(1) << '\n';
  if (!os) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

void check_header(const json& root, std::string_view schema, const std::filesystem::path& path) {
  if (!root.is_object()) throw ParseError(fmt::format("'{}': top level must be an object", path.string()));
  if (!root.contains("schema_version"))
    throw ParseError(fmt::format("'{}': missing mandatory schema_version", path.string()));
  if (!root["schema_version"].is_number_integer() || root["schema_version"].get<int>() != kExternalSchemaVersion)
    throw ParseError(fmt::format("'{}': unsupported schema_version {}", path.string(), root["schema_version"].dump()));
  if (root.contains("schema") && root["schema"] != schema)
    throw ParseError(fmt::format("'{}': schema tag {} is not {}", path.string(), root["schema"].dump(), schema));
}

template <std::size_t N>
std::array<double, N> number_array(const json& rec, const char* key) {
  const json& v = rec.at(key);
  if (!v.is_array() || v.size() != N) throw ParseError(fmt::format("'{}' must be an array of {} numbers", key, N));
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!v[i].is_number()) throw ParseError(fmt::format("'{}' must be an array of {} numbers", key, N));
    out[i] = v[i].get<double>();
    if (!std::isfinite(out[i])) throw ParseError(fmt::format("'{}' holds a non-finite value", key));
  }
  return out;
}

// Geometry shared by annotation and result records. Returns false for an
// unknown class name.
bool parse_box(const json& rec, ExternalBox& box, std::string& name) {
  if (!rec.is_object()) throw ParseError("record must be an object");
  name = rec.at("detection_name").get<std::string>();
  box.translation = number_array<3>(rec, "translation");
  box.size = number_array<3>(rec, "size");
  for (double s : box.size)
    if (!(s > 0.0)) throw ParseError("'size' entries must be positive");
  if (rec.contains("rotation")) {
    box.rotation = number_array<4>(rec, "rotation");
    const double n = std::sqrt(box.rotation[0] * box.rotation[0] + box.rotation[1] * box.rotation[1] +
                               box.rotation[2] * box.rotation[2] + box.rotation[3] * box.rotation[3]);
    if (!(n > 1e-9)) throw ParseError("'rotation' quaternion has zero norm");
  } else if (rec.contains("yaw")) {
    box.rotation = yaw_quaternion(rec.at("yaw").get<double>());
  } else {
    throw ParseError("record needs 'rotation' or 'yaw'");
  }
  box.yaw = quaternion_yaw(box.rotation);
  box.velocity = rec.contains("velocity") ? number_array<2>(rec, "velocity") : std::array<double, 2>{};
  box.attribute_name = rec.value("attribute_name", std::string{});
  const auto cls = class_from_detection_name(name);
  if (!cls) return false;
  box.cls = *cls;
  return true;
}

json box_json(const std::string& token, const ExternalBox& b) {
  return json{{"sample_token", token},
              {"translation", b.translation},
              {"size", b.size},
              {"rotation", b.rotation},
              {"velocity", b.velocity},
              {"detection_name", detection_name(b.cls)},
              {"attribute_name", b.attribute_name}};
}

Box3D to_box3d(const ExternalBox& b) {
  Box3D out;
  out.center_x = b.translation[0];
  out.center_y = b.translation[1];
  out.center_z = b.translation[2];
  out.width = b.size[0];
  out.length = b.size[1];
  out.height = b.size[2];
  out.yaw = normalize_yaw(b.yaw);
  out.velocity_x = b.velocity[0];
  out.velocity_y = b.velocity[1];
  return out;
}

ExternalBox from_box3d(const Box3D& b, ClassId cls, bool attribute) {
  ExternalBox out;
  out.translation = {b.center_x, b.center_y, b.center_z};
  out.size = {b.width, b.length, b.height};
  out.rotation = yaw_quaternion(b.yaw);
  out.yaw = quaternion_yaw(out.rotation);
  out.velocity = {b.velocity_x, b.velocity_y};
  out.cls = cls;
  out.attribute_name = attribute_name_for(cls, attribute);
  return out;
}

template <typename Fn>
void for_each_record(const json& samples, const char* section, const std::filesystem::path& path, Fn&& fn) {
  if (!samples.is_object())
    throw ParseError(fmt::format("'{}': '{}' must map sample tokens to record lists", path.string(), section));
  for (const auto& [token, records] : samples.items()) {
    if (!records.is_array())
      throw ParseError(fmt::format("'{}': sample '{}' must hold a list of records", path.string(), token));
    for (std::size_t i = 0; i < records.size(); ++i) {
      try {
        fn(token, records[i]);
      } catch (const json::exception& e) {
        throw ParseError(fmt::format("'{}': sample '{}' record {}: {}", path.string(), token, i, e.what()));
      } catch (const ParseError& e) {
        throw ParseError(fmt::format("'{}': sample '{}' record {}: {}", path.string(), token, i, e.what()));
      }
    }
  }
}

}  // namespace

std::size_t ExternalAnnotationSet::dropped_count() const {
  std::size_t n = 0;
  for (const auto& [name, count] : dropped_by_name) n += count;
  return n;
}

bool attribute_flag(std::string_view name) {
  return name == "vehicle.moving" || name == "pedestrian.moving" || name == "cycle.with_rider";
}

std::string attribute_name_for(ClassId cls, bool flag) {
  switch (cls) {
    case ClassId::Car:
    case ClassId::Truck:
    case ClassId::Bus:
    case ClassId::Trailer:
    case ClassId::ConstructionVehicle: return flag ? "vehicle.moving" : "vehicle.parked";
    case ClassId::Pedestrian: return flag ? "pedestrian.moving" : "pedestrian.standing";
    case ClassId::Motorcycle:
    case ClassId::Bicycle: return flag ? "cycle.with_rider" : "cycle.without_rider";
    case ClassId::TrafficCone:
    case ClassId::Barrier: return "";
  }
  return "";
}

double quaternion_yaw(const std::array<double, 4>& q) {
  const auto [w, x, y, z] = q;
  return std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
}

std::array<double, 4> yaw_quaternion(double yaw) {
  return {std::cos(0.5 * yaw), 0.0, 0.0, std::sin(0.5 * yaw)};
}

ExternalAnnotationSet load_annotations(const std::filesystem::path& path) {
  const json root = read_json_file(path);
  check_header(root, kAnnotationSchema, path);
  if (!root.contains("annotations")) throw ParseError(fmt::format("'{}': missing 'annotations'", path.string()));
  ExternalAnnotationSet out;
  for (const auto& [token, _] : root["annotations"].items()) out.samples[token];
  for_each_record(root["annotations"], "annotations", path, [&](const std::string& token, const json& rec) {
    ExternalBox box;
    std::string name;
    if (parse_box(rec, box, name))
      out.samples[token].push_back(std::move(box));
    else
      ++out.dropped_by_name[name];
  });
  return out;
}

ExternalResultSet load_results(const std::filesystem::path& path) {
  const json root = read_json_file(path);
  check_header(root, kResultSchema, path);
  if (!root.contains("results")) throw ParseError(fmt::format("'{}': missing 'results'", path.string()));
  ExternalResultSet out;
  for (const auto& [token, _] : root["results"].items()) out.sample_tokens.push_back(token);
  std::sort(out.sample_tokens.begin(), out.sample_tokens.end());
  auto token_index = [&](const std::string& t) {
    return static_cast<SceneId>(std::lower_bound(out.sample_tokens.begin(), out.sample_tokens.end(), t) -
                                out.sample_tokens.begin());
  };
  std::map<std::string, std::uint32_t> next_candidate;
  for_each_record(root["results"], "results", path, [&](const std::string& token, const json& rec) {
    ExternalBox box;
    std::string name;
    if (!parse_box(rec, box, name)) throw ParseError(fmt::format("unknown detection_name '{}'", name));
    const double score = rec.at("detection_score").get<double>();
    if (!(score >= 0.0 && score <= 1.0)) throw ParseError(fmt::format("detection_score {} outside [0, 1]", score));

    Detection d;
    d.scene_id = token_index(token);
    d.candidate_id = next_candidate[token]++;
    d.predicted_class = box.cls;
    d.confidence = score;
    d.predicted_box = to_box3d(box);
    d.predicted_attribute = attribute_flag(box.attribute_name);
    if (rec.contains("class_probs")) {
      const auto probs = number_array<kNumClasses>(rec, "class_probs");
      double sum = 0.0;
      for (double p : probs) {
        if (p < 0.0) throw ParseError("class_probs entries must be non-negative");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-6) throw ParseError("class_probs must sum to 1");
      d.posterior.probs = probs;
      d.posterior.background_prob = rec.value("background_prob", 0.0);
      d.has_full_posterior = true;
    } else {
      d.posterior.probs.fill(0.0);
      d.posterior.probs[index_of(box.cls)] = 1.0;
      d.has_full_posterior = false;
    }
    out.detections.push_back(d);
  });
  return out;
}

std::string synthetic_sample_token(SceneId id) { return fmt::format("synth-{:06d}", id); }

ExternalAnnotationSet to_annotation_set(std::span<const Scene> dataset) {
  ExternalAnnotationSet out;
  for (const Scene& s : dataset) {
    auto& boxes = out.samples[synthetic_sample_token(s.scene_id)];
    for (const auto& o : s.objects) boxes.push_back(from_box3d(o.box, o.cls, o.attribute));
  }
  return out;
}

void write_annotations(const ExternalAnnotationSet& set, const std::filesystem::path& path) {
  json ann = json::object();
  for (const auto& [token, boxes] : set.samples) {
    json list = json::array();
    for (const auto& b : boxes) list.push_back(box_json(token, b));
    ann[token] = std::move(list);
  }
  write_json_file(json{{"schema", kAnnotationSchema},
                       {"schema_version", kExternalSchemaVersion},
                       {"annotations", std::move(ann)}},
                  path);
}

void export_annotations(std::span<const Scene> dataset, const std::filesystem::path& path) {
  write_annotations(to_annotation_set(dataset), path);
}

void export_results(std::span<const Detection> detections,
                    const std::map<SceneId, std::string>& sample_token_of,
                    const std::filesystem::path& path) {
  json results = json::object();
  for (const auto& [id, token] : sample_token_of) results[token] = json::array();
  for (const Detection& d : detections) {
    auto it = sample_token_of.find(d.scene_id);
    if (it == sample_token_of.end())
      throw ValidationError(fmt::format("no sample token for scene {}", d.scene_id));
    json rec = box_json(it->second, from_box3d(d.predicted_box, d.predicted_class, d.predicted_attribute));
    rec["detection_score"] = d.confidence;
    if (d.has_full_posterior) {
      rec["class_probs"] = d.posterior.probs;
      rec["background_prob"] = d.posterior.background_prob;
    }
    results[it->second].push_back(std::move(rec));
  }
  write_json_file(json{{"schema", kResultSchema},
                       {"schema_version", kExternalSchemaVersion},
                       {"meta", {{"use_camera", false}, {"use_lidar", true}, {"producer", "alsim"}}},
                       {"results", std::move(results)}},
                  path);
}

ExternalScenes to_scenes(const ExternalAnnotationSet& set) {
  ExternalScenes out;
  SceneId next = 0;
  for (const auto& [token, boxes] : set.samples) {
    Scene s;
    s.scene_id = next++;
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      GroundTruthObject o;
      o.object_id = (static_cast<ObjectId>(s.scene_id) << 16) | k;
      o.cls = boxes[k].cls;
      o.box = to_box3d(boxes[k]);
      o.attribute = attribute_flag(boxes[k].attribute_name);
      s.objects.push_back(std::move(o));
    }
    out.sample_tokens.push_back(token);
    out.scenes.push_back(std::move(s));
  }
  return out;
}

EvalOptions external_eval_options() {
  EvalOptions opt;
  opt.evaluate_attribute[index_of(ClassId::TrafficCone)] = false;
  opt.evaluate_attribute[index_of(ClassId::Barrier)] = false;
  return opt;
}

EvalReport evaluate_external(const ExternalAnnotationSet& annotations, const ExternalResultSet& results) {
  const ExternalScenes gt = to_scenes(annotations);
  std::vector<Detection> dets = results.detections;
  for (Detection& d : dets) {
    const std::string& token = results.sample_tokens.at(d.scene_id);
    auto it = std::lower_bound(gt.sample_tokens.begin(), gt.sample_tokens.end(), token);
    if (it == gt.sample_tokens.end() || *it != token)
      throw ValidationError(fmt::format("results reference sample '{}' absent from the annotations", token));
    d.scene_id = static_cast<SceneId>(it - gt.sample_tokens.begin());
  }
  return evaluate(dets, gt.scenes, external_eval_options());
}

}  // namespace alsim
