#include <chrono>
#include <fstream>
#include <unordered_map>

#include <fmt/format.h>

#include "alsim/harness.hpp"
#include "alsim/json_io.hpp"

namespace alsim {

namespace {

constexpr std::uint64_t kTrainStream = 0x545241494eULL;
constexpr int kCheckpointSchemaVersion = 1;

struct RunState {
  RunReport report;
  PoolState pool;
  int next_round = 0;
  std::vector<SceneId> pending_selected;
  std::vector<double> timings;
};

void write_text_atomically(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError(fmt::format("cannot open '{}' for writing", tmp.string()));
    os << text;
    if (!os) throw IoError(fmt::format("failed writing '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

void write_checkpoint(const std::filesystem::path& dir, const RunState& st) {
  json j{{"schema", "alsim.checkpoint"},
         {"schema_version", kCheckpointSchemaVersion},
         {"report", st.report},
         {"pool", st.pool},
         {"next_round", st.next_round},
         {"pending_selected", st.pending_selected},
         {"timings", st.timings}};
  write_text_atomically(dir / kCheckpointFile, j.dump(1) + "\n");
}

RunState read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(fmt::format("cannot open checkpoint '{}'", path.string()));
  try {
    const json j = json::parse(is);
    if (j.at("schema") != "alsim.checkpoint") throw ParseError("not a checkpoint file");
    if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion)
      throw ParseError(fmt::format("unsupported checkpoint schema_version {}", j.at("schema_version").dump()));
    RunState st;
    j.at("report").get_to(st.report);
    j.at("pool").get_to(st.pool);
    j.at("next_round").get_to(st.next_round);
    j.at("pending_selected").get_to(st.pending_selected);
    j.at("timings").get_to(st.timings);
    for (std::size_t i = 0; i < st.report.rounds.size() && i < st.timings.size(); ++i)
      st.report.rounds[i].wall_clock_seconds = st.timings[i];
    return st;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("checkpoint '{}': {}", path.string(), e.what()));
  }
}

struct LoadedData {
  GenConfig gen;
  Dataset scenes;
};

LoadedData load_or_generate(const ExperimentConfig& cfg) {
  if (cfg.dataset_path) {
    auto loaded = read_dataset(*cfg.dataset_path);
    return {loaded.config, std::move(loaded.scenes)};
  }
  const GenConfig gen = cfg.effective_gen();
  return {gen, generate_dataset(gen)};
}

std::vector<Scene> gather(const Dataset& data, const std::unordered_map<SceneId, std::size_t>& index,
                          std::span<const SceneId> ids) {
  std::vector<Scene> out;
  out.reserve(ids.size());
  for (SceneId id : ids) out.push_back(data[index.at(id)]);
  return out;
}

RunReport drive(RunState st, const RunOptions& opt) {
  const ExperimentConfig& cfg = st.report.config;
  const std::uint64_t master = cfg.seed;
  std::string stage = "setup";
  int round = st.next_round;

  auto fail = [&](const std::string& message) -> RunError {
    RunFailure f{round, stage, message};
    st.report.failure = f;
    st.report.complete = false;
    if (opt.output_dir) {
      try {
        write_checkpoint(*opt.output_dir, st);
      } catch (...) {
      }
    }
    return RunError(st.report, f);
  };

  try {
    if (opt.output_dir) std::filesystem::create_directories(*opt.output_dir);
    stage = "dataset";
    const LoadedData data = load_or_generate(cfg);
    const FeatureModel features(data.gen);
    std::unordered_map<SceneId, std::size_t> index;
    for (std::size_t i = 0; i < data.scenes.size(); ++i) index.emplace(data.scenes[i].scene_id, i);

    if (st.next_round == 0 && st.report.rounds.empty()) {
      stage = "split";
      st.pool = init_split(data.scenes, cfg.validation_count, cfg.budget.initial_fraction,
                           derive_seed(master, {stream::kSplit}));
      st.pending_selected = st.pool.labeled;
    }
    const std::vector<Scene> validation = gather(data.scenes, index, st.pool.validation);
    const std::size_t pool_size = st.pool.train_pool_size();

    for (; st.next_round < cfg.budget.num_rounds; ++st.next_round) {
      round = st.next_round;
      const auto t0 = std::chrono::steady_clock::now();
      const std::vector<Scene> labeled = gather(data.scenes, index, st.pool.labeled);

      stage = "train";
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(master, {kTrainStream, static_cast<std::uint64_t>(round)});
      const DetectorModel model = train(DetectorModel::zeros(features.feature_dim()), labeled, features, tc);
      if (opt.output_dir && opt.write_models)
        write_model(*opt.output_dir / fmt::format("model_round{}.txt", round), model);

      stage = "evaluate";
      std::vector<Detection> dets;
      const std::uint64_t val_seed = derive_seed(master, {stream::kValidation, static_cast<std::uint64_t>(round)});
      for (const Scene& s : validation) {
        auto d = infer_scene(model, s, features, tc, val_seed);
        dets.insert(dets.end(), d.begin(), d.end());
      }
      RoundResult rr;
      rr.round_index = round;
      rr.labeled_scenes = st.pool.labeled.size();
      rr.pool_fraction = static_cast<double>(st.pool.labeled.size()) / static_cast<double>(pool_size);
      rr.selected_scene_ids = st.pending_selected;
      rr.class_counts = class_counts(labeled);
      rr.eval = evaluate(dets, validation);

      if (round + 1 < cfg.budget.num_rounds) {
        stage = "select";
        const std::size_t k = round_target_count(cfg.budget, round + 1, pool_size, st.pool.labeled.size());
        std::vector<SceneId> selected;
        if (st.report.method == AcquisitionMethod::Random) {
          selected = random_select(st.pool.unlabeled, k,
                                   derive_seed(master, {stream::kRandomSelect, static_cast<std::uint64_t>(round)}));
        } else {
          stage = "infer";
          const std::uint64_t inf_seed =
              derive_seed(master, {stream::kPoolInference, static_cast<std::uint64_t>(round)});
          std::vector<AcquisitionScore> scores;
          scores.reserve(st.pool.unlabeled.size());
          for (SceneId id : st.pool.unlabeled) {
            const auto d = infer_scene(model, data.scenes[index.at(id)], features, tc, inf_seed);
            scores.push_back(score_scene(d, cfg.acquisition.aggregation, id, st.report.method,
                                         cfg.acquisition.include_background));
          }
          stage = "select";
          if (opt.output_dir && opt.write_scores)
            write_scores(*opt.output_dir / fmt::format("scores_round{}.tsv", round), scores);
          selected = select_top_k(scores, k);
        }
        stage = "transfer";
        st.pool = transfer(st.pool, selected);
        st.pending_selected = std::move(selected);
      }

      rr.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      st.timings.push_back(rr.wall_clock_seconds);
      st.report.rounds.push_back(std::move(rr));

      stage = "checkpoint";
      const bool stopping = opt.stop_after_round && *opt.stop_after_round == round;
      if (opt.output_dir) {
        RunState snapshot = st;
        snapshot.next_round = round + 1;
        snapshot.report.complete = snapshot.next_round >= cfg.budget.num_rounds;
        write_checkpoint(*opt.output_dir, snapshot);
      }
      if (stopping) {
        st.next_round = round + 1;
        break;
      }
    }
  } catch (const RunError&) {
    throw;
  } catch (const Error& e) {
    throw fail(fmt::format("{} error: {}", e.kind(), e.what()));
  } catch (const std::exception& e) {
    throw fail(e.what());
  }
  st.report.complete = st.next_round >= cfg.budget.num_rounds;
  return st.report;
}

}  // namespace

bool RoundResult::operator==(const RoundResult& o) const {
  return round_index == o.round_index && pool_fraction == o.pool_fraction && labeled_scenes == o.labeled_scenes &&
         selected_scene_ids == o.selected_scene_ids && class_counts == o.class_counts && eval == o.eval;
}

RunError::RunError(RunReport partial, const RunFailure& f)
    : Error(fmt::format("[stage={} round={}] {}", f.stage, f.round_index, f.message)), partial_(std::move(partial)) {
  partial_.failure = f;
}

RunReport run_experiment(const ExperimentConfig& config, AcquisitionMethod method, const RunOptions& options) {
  config.validate();
  RunState st;
  st.report.method = method;
  st.report.seed = config.seed;
  st.report.config = config;
  st.report.config.acquisition.method = method;
  return drive(std::move(st), options);
}

RunReport resume(const std::filesystem::path& checkpoint_path, const RunOptions& options) {
  RunState st = read_checkpoint(checkpoint_path);
  if (st.report.failure)
    throw ConfigError(fmt::format("checkpoint records a failed run ({}); rerun instead", st.report.failure->message));
  RunOptions opt = options;
  if (!opt.output_dir) opt.output_dir = checkpoint_path.parent_path();
  if (st.next_round != static_cast<int>(st.report.rounds.size()))
    throw ParseError("checkpoint round counter disagrees with its recorded rounds");
  return drive(std::move(st), opt);
}

}  // namespace alsim
