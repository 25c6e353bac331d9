#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "alsim/harness.hpp"

namespace alsim {

namespace pt = boost::property_tree;

namespace {

template <typename T>
T parse_value(const std::string& section, const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(fmt::format("[{}] {}: expected a boolean, got '{}'", section, key, text));
  } else {
    is >> v;
    if (!is || !(is >> std::ws).eof())
      throw ConfigError(fmt::format("[{}] {}: cannot parse '{}'", section, key, text));
    return v;
  }
}

class Section {
 public:
  Section(const pt::ptree& root, std::string name) : name_(std::move(name)) {
    if (auto child = root.get_child_optional(name_)) tree_ = *child;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '\0')))
      out = parse_value<T>(name_, key, *v);
  }
  bool has(const std::string& key) const {
    return tree_.get_optional<std::string>(pt::ptree::path_type(key, '\0')).has_value();
  }
  std::optional<std::string> raw(const std::string& key) {
    seen_.insert(key);
    if (auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '\0'))) return *v;
    return std::nullopt;
  }
  void reject_unknown() const {
    for (const auto& [key, _] : tree_)
      if (!seen_.count(key)) throw ConfigError(fmt::format("[{}]: unknown key '{}'", name_, key));
  }

 private:
  std::string name_;
  pt::ptree tree_;
  std::set<std::string> seen_;
};

ExperimentConfig from_tree(const pt::ptree& root) {
  static const std::set<std::string> kSections = {"synthgen", "train", "budget", "acquisition", "run"};
  for (const auto& [name, child] : root) {
    if (!kSections.count(name)) throw ConfigError(fmt::format("unknown config section [{}]", name));
    if (child.data().size() && child.empty())
      throw ConfigError(fmt::format("key '{}' appears outside a section", name));
  }

  ExperimentConfig c;
  {
    Section s(root, "synthgen");
    s.get("num_scenes", c.gen.num_scenes);
    if (auto kind = s.raw("objects_distribution")) {
      if (*kind == "poisson")
        c.gen.objects_per_scene.kind = ObjectCountDist::Kind::Poisson;
      else if (*kind == "fixed")
        c.gen.objects_per_scene.kind = ObjectCountDist::Kind::Fixed;
      else
        throw ConfigError(fmt::format("[synthgen] objects_distribution: unknown '{}'", *kind));
    }
    s.get("objects_mean", c.gen.objects_per_scene.mean);
    s.get("objects_min", c.gen.objects_per_scene.min_count);
    s.get("objects_max", c.gen.objects_per_scene.max_count);
    if (auto freqs = s.raw("class_frequencies")) {
      std::istringstream is(*freqs);
      std::string tok;
      std::vector<double> v;
      while (std::getline(is, tok, ',')) v.push_back(parse_value<double>("synthgen", "class_frequencies", tok));
      if (v.size() != kNumClasses)
        throw ConfigError(fmt::format("[synthgen] class_frequencies needs {} values, got {}", kNumClasses, v.size()));
      double sum = 0.0;
      for (double f : v) sum += f;
      // Accept percentages or fractions; both are normalized.
      if (!(sum > 0.0)) throw ConfigError("[synthgen] class_frequencies must have a positive sum");
      for (std::size_t i = 0; i < kNumClasses; ++i) c.gen.class_frequencies[i] = v[i] / sum;
    }
    s.get("feature_dim", c.gen.feature_dim);
    s.get("class_separation", c.gen.class_separation);
    s.get("feature_noise_sigma", c.gen.feature_noise_sigma);
    s.get("box_encoding_noise_sigma", c.gen.box_encoding_noise_sigma);
    if (s.has("seed")) c.fixed_dataset_seed = true;
    s.get("seed", c.gen.seed);
    if (auto path = s.raw("dataset_path")) c.dataset_path = *path;
    s.reject_unknown();
  }
  {
    Section s(root, "train");
    if (auto preset = s.raw("preset")) {
      if (*preset == "extended")
        c.train.epochs = 10;
      else if (*preset != "default")
        throw ConfigError(fmt::format("[train] preset: unknown '{}' (default | extended)", *preset));
    }
    s.get("epochs", c.train.epochs);
    s.get("learning_rate", c.train.learning_rate);
    s.get("batch_size", c.train.batch_size);
    s.get("ridge_lambda", c.train.ridge_lambda);
    s.get("clutter_rate", c.train.clutter_rate);
    s.get("observation_prob", c.train.observation_prob);
    s.get("background_threshold", c.train.background_threshold);
    s.reject_unknown();
  }
  {
    Section s(root, "budget");
    s.get("initial_fraction", c.budget.initial_fraction);
    s.get("increment_fraction", c.budget.increment_fraction);
    s.get("num_rounds", c.budget.num_rounds);
    s.get("fraction_per_week", c.budget.fraction_per_week);
    s.get("validation_count", c.validation_count);
    s.reject_unknown();
  }
  {
    Section s(root, "acquisition");
    if (auto m = s.raw("method")) c.acquisition.method = parse_method(*m);
    if (auto m = s.raw("aggregation")) c.acquisition.aggregation = parse_aggregation(*m);
    s.get("include_background", c.acquisition.include_background);
    s.reject_unknown();
  }
  {
    Section s(root, "run");
    s.get("seed", c.seed);
    s.reject_unknown();
  }
  c.validate();
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  gen.validate();
  train.validate();
  budget.validate();
  if (validation_count >= static_cast<std::size_t>(gen.num_scenes) && !dataset_path)
    throw ConfigError(fmt::format("validation_count {} must be below num_scenes {}", validation_count, gen.num_scenes));
}

GenConfig ExperimentConfig::effective_gen() const {
  GenConfig g = gen;
  if (!fixed_dataset_seed) g.seed = derive_seed(seed, {stream::kGenerate});
  return g;
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree root;
  std::istringstream is(text);
  try {
    pt::read_ini(is, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  return from_tree(root);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::filesystem::path output_directory(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("ALSIM_OUTPUT_DIR"); env && *env) return env;
  return fallback;
}

}  // namespace alsim
