#include "alsim/json_io.hpp"

#include <fmt/format.h>

#include "alsim/errors.hpp"

namespace alsim {

void to_json(json& j, ClassId c) { j = detection_name(c); }
void from_json(const json& j, ClassId& c) {
  const auto name = j.get<std::string>();
  const auto cls = class_from_detection_name(name);
  if (!cls) throw ParseError(fmt::format("unknown class name '{}'", name));
  c = *cls;
}

void to_json(json& j, const Box3D& b) {
  j = json::array({b.center_x, b.center_y, b.center_z, b.width, b.length, b.height, b.yaw, b.velocity_x,
                   b.velocity_y});
}
void from_json(const json& j, Box3D& b) {
  if (!j.is_array() || j.size() != 9) throw ParseError("box must be an array of 9 numbers");
  b = Box3D{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), j[4].get<double>(),
            j[5].get<double>(), j[6].get<double>(), j[7].get<double>(), j[8].get<double>()};
}

void to_json(json& j, const GroundTruthObject& o) {
  j = json{{"id", o.object_id}, {"class", o.cls}, {"box", o.box}, {"attribute", o.attribute}, {"feature", o.feature}};
}
void from_json(const json& j, GroundTruthObject& o) {
  j.at("id").get_to(o.object_id);
  j.at("class").get_to(o.cls);
  j.at("box").get_to(o.box);
  j.at("attribute").get_to(o.attribute);
  j.at("feature").get_to(o.feature);
}

void to_json(json& j, const Scene& s) { j = json{{"scene_id", s.scene_id}, {"objects", s.objects}}; }
void from_json(const json& j, Scene& s) {
  j.at("scene_id").get_to(s.scene_id);
  j.at("objects").get_to(s.objects);
}

void to_json(json& j, const ObjectCountDist& d) {
  j = json{{"kind", d.kind == ObjectCountDist::Kind::Poisson ? "poisson" : "fixed"},
           {"mean", d.mean},
           {"min", d.min_count},
           {"max", d.max_count}};
}
void from_json(const json& j, ObjectCountDist& d) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "poisson")
    d.kind = ObjectCountDist::Kind::Poisson;
  else if (kind == "fixed")
    d.kind = ObjectCountDist::Kind::Fixed;
  else
    throw ParseError(fmt::format("unknown object count distribution '{}'", kind));
  j.at("mean").get_to(d.mean);
  j.at("min").get_to(d.min_count);
  j.at("max").get_to(d.max_count);
}

void to_json(json& j, const GenConfig& c) {
  j = json{{"num_scenes", c.num_scenes},
           {"objects_per_scene", c.objects_per_scene},
           {"class_frequencies", c.class_frequencies},
           {"feature_dim", c.feature_dim},
           {"class_separation", c.class_separation},
           {"feature_noise_sigma", c.feature_noise_sigma},
           {"box_encoding_noise_sigma", c.box_encoding_noise_sigma},
           {"seed", c.seed}};
}
void from_json(const json& j, GenConfig& c) {
  j.at("num_scenes").get_to(c.num_scenes);
  j.at("objects_per_scene").get_to(c.objects_per_scene);
  j.at("class_frequencies").get_to(c.class_frequencies);
  j.at("feature_dim").get_to(c.feature_dim);
  j.at("class_separation").get_to(c.class_separation);
  j.at("feature_noise_sigma").get_to(c.feature_noise_sigma);
  j.at("box_encoding_noise_sigma").get_to(c.box_encoding_noise_sigma);
  j.at("seed").get_to(c.seed);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"learning_rate", c.learning_rate},
           {"batch_size", c.batch_size},
           {"ridge_lambda", c.ridge_lambda},
           {"clutter_rate", c.clutter_rate},
           {"observation_prob", c.observation_prob},
           {"background_threshold", c.background_threshold},
           {"seed", c.seed}};
}
void from_json(const json& j, TrainConfig& c) {
  j.at("epochs").get_to(c.epochs);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("batch_size").get_to(c.batch_size);
  j.at("ridge_lambda").get_to(c.ridge_lambda);
  j.at("clutter_rate").get_to(c.clutter_rate);
  j.at("observation_prob").get_to(c.observation_prob);
  j.at("background_threshold").get_to(c.background_threshold);
  j.at("seed").get_to(c.seed);
}

void to_json(json& j, const BudgetSchedule& b) {
  j = json{{"initial_fraction", b.initial_fraction},
           {"increment_fraction", b.increment_fraction},
           {"num_rounds", b.num_rounds},
           {"fraction_per_week", b.fraction_per_week}};
}
void from_json(const json& j, BudgetSchedule& b) {
  j.at("initial_fraction").get_to(b.initial_fraction);
  j.at("increment_fraction").get_to(b.increment_fraction);
  j.at("num_rounds").get_to(b.num_rounds);
  j.at("fraction_per_week").get_to(b.fraction_per_week);
}

void to_json(json& j, AcquisitionMethod m) { j = std::string(to_string(m)); }
void from_json(const json& j, AcquisitionMethod& m) { m = parse_method(j.get<std::string>()); }
void to_json(json& j, AggregationMode m) { j = std::string(to_string(m)); }
void from_json(const json& j, AggregationMode& m) { m = parse_aggregation(j.get<std::string>()); }

void to_json(json& j, const AcquisitionConfig& c) {
  j = json{{"method", c.method}, {"aggregation", c.aggregation}, {"include_background", c.include_background}};
}
void from_json(const json& j, AcquisitionConfig& c) {
  j.at("method").get_to(c.method);
  j.at("aggregation").get_to(c.aggregation);
  j.at("include_background").get_to(c.include_background);
}

void to_json(json& j, const PoolState& p) {
  j = json{{"labeled", p.labeled}, {"unlabeled", p.unlabeled}, {"validation", p.validation},
           {"round_index", p.round_index}};
}
void from_json(const json& j, PoolState& p) {
  j.at("labeled").get_to(p.labeled);
  j.at("unlabeled").get_to(p.unlabeled);
  j.at("validation").get_to(p.validation);
  j.at("round_index").get_to(p.round_index);
}

void to_json(json& j, const TpErrors& e) {
  j = json{{"ate", e.ate}, {"ase", e.ase}, {"aoe", e.aoe}, {"ave", e.ave}, {"aae", e.aae}};
}
void from_json(const json& j, TpErrors& e) {
  j.at("ate").get_to(e.ate);
  j.at("ase").get_to(e.ase);
  j.at("aoe").get_to(e.aoe);
  j.at("ave").get_to(e.ave);
  j.at("aae").get_to(e.aae);
}

void to_json(json& j, const ClassMetrics& m) {
  j = json{{"ap_per_threshold", m.ap_per_threshold},
           {"ap", m.ap},
           {"num_ground_truth", m.num_ground_truth},
           {"num_detections", m.num_detections},
           {"tp", m.tp ? json(*m.tp) : json(nullptr)}};
}
void from_json(const json& j, ClassMetrics& m) {
  j.at("ap_per_threshold").get_to(m.ap_per_threshold);
  j.at("ap").get_to(m.ap);
  j.at("num_ground_truth").get_to(m.num_ground_truth);
  j.at("num_detections").get_to(m.num_detections);
  if (j.at("tp").is_null())
    m.tp.reset();
  else
    m.tp = j.at("tp").get<TpErrors>();
}

void to_json(json& j, const EvalReport& r) {
  json per_class = json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) per_class[std::string(detection_name(class_at(c)))] = r.per_class[c];
  j = json{{"mAP", r.mAP},   {"mATE", r.mATE}, {"mASE", r.mASE}, {"mAOE", r.mAOE},
           {"mAVE", r.mAVE}, {"mAAE", r.mAAE}, {"NDS", r.NDS},   {"per_class", std::move(per_class)}};
}
void from_json(const json& j, EvalReport& r) {
  j.at("mAP").get_to(r.mAP);
  j.at("mATE").get_to(r.mATE);
  j.at("mASE").get_to(r.mASE);
  j.at("mAOE").get_to(r.mAOE);
  j.at("mAVE").get_to(r.mAVE);
  j.at("mAAE").get_to(r.mAAE);
  j.at("NDS").get_to(r.NDS);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    j.at("per_class").at(std::string(detection_name(class_at(c)))).get_to(r.per_class[c]);
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"synthgen", c.gen},
           {"train", c.train},
           {"budget", c.budget},
           {"acquisition", c.acquisition},
           {"validation_count", c.validation_count},
           {"seed", c.seed},
           {"fixed_dataset_seed", c.fixed_dataset_seed},
           {"dataset_path", c.dataset_path ? json(c.dataset_path->generic_string()) : json(nullptr)}};
}
void from_json(const json& j, ExperimentConfig& c) {
  j.at("synthgen").get_to(c.gen);
  j.at("train").get_to(c.train);
  j.at("budget").get_to(c.budget);
  j.at("acquisition").get_to(c.acquisition);
  j.at("validation_count").get_to(c.validation_count);
  j.at("seed").get_to(c.seed);
  j.at("fixed_dataset_seed").get_to(c.fixed_dataset_seed);
  if (j.at("dataset_path").is_null())
    c.dataset_path.reset();
  else
    c.dataset_path = j.at("dataset_path").get<std::string>();
}

void to_json(json& j, const RoundResult& r) {
  json counts = json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) counts[std::string(detection_name(class_at(c)))] = r.class_counts[c];
  j = json{{"round_index", r.round_index},
           {"pool_fraction", r.pool_fraction},
           {"labeled_scenes", r.labeled_scenes},
           {"selected_scene_ids", r.selected_scene_ids},
           {"class_counts", std::move(counts)},
           {"eval", r.eval}};
}
void from_json(const json& j, RoundResult& r) {
  j.at("round_index").get_to(r.round_index);
  j.at("pool_fraction").get_to(r.pool_fraction);
  j.at("labeled_scenes").get_to(r.labeled_scenes);
  j.at("selected_scene_ids").get_to(r.selected_scene_ids);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    j.at("class_counts").at(std::string(detection_name(class_at(c)))).get_to(r.class_counts[c]);
  j.at("eval").get_to(r.eval);
  r.wall_clock_seconds = 0.0;
}

void to_json(json& j, const RunFailure& f) {
  j = json{{"round_index", f.round_index}, {"stage", f.stage}, {"message", f.message}};
}
void from_json(const json& j, RunFailure& f) {
  j.at("round_index").get_to(f.round_index);
  j.at("stage").get_to(f.stage);
  j.at("message").get_to(f.message);
}

void to_json(json& j, const RunReport& r) {
  j = json{{"schema", "alsim.run_report"},
           {"schema_version", r.schema_version},
           {"method", r.method},
           {"seed", r.seed},
           {"config", r.config},
           {"rounds", r.rounds},
           {"complete", r.complete},
           {"failure", r.failure ? json(*r.failure) : json(nullptr)}};
}
void from_json(const json& j, RunReport& r) {
  j.at("schema_version").get_to(r.schema_version);
  if (r.schema_version != kReportSchemaVersion)
    throw ParseError(fmt::format("unsupported report schema_version {}", r.schema_version));
  j.at("method").get_to(r.method);
  j.at("seed").get_to(r.seed);
  j.at("config").get_to(r.config);
  j.at("rounds").get_to(r.rounds);
  j.at("complete").get_to(r.complete);
  if (j.at("failure").is_null())
    r.failure.reset();
  else
    r.failure = j.at("failure").get<RunFailure>();
}

}  // namespace alsim
