#pragma once

// nlohmann::json conversions for the library's value types.

#include <nlohmann/json.hpp>

#include "alsim/acquisition.hpp"
#include "alsim/detector.hpp"
#include "alsim/harness.hpp"
#include "alsim/metrics.hpp"
#include "alsim/pools.hpp"
#include "alsim/synthgen.hpp"
#include "alsim/types.hpp"

namespace alsim {

using nlohmann::json;

void to_json(json& j, ClassId c);
void from_json(const json& j, ClassId& c);
void to_json(json& j, const Box3D& b);
void from_json(const json& j, Box3D& b);
void to_json(json& j, const GroundTruthObject& o);
void from_json(const json& j, GroundTruthObject& o);
void to_json(json& j, const Scene& s);
void from_json(const json& j, Scene& s);

void to_json(json& j, const ObjectCountDist& d);
void from_json(const json& j, ObjectCountDist& d);
void to_json(json& j, const GenConfig& c);
void from_json(const json& j, GenConfig& c);
void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);
void to_json(json& j, const BudgetSchedule& b);
void from_json(const json& j, BudgetSchedule& b);
void to_json(json& j, AcquisitionMethod m);
void from_json(const json& j, AcquisitionMethod& m);
void to_json(json& j, AggregationMode m);
void from_json(const json& j, AggregationMode& m);
void to_json(json& j, const AcquisitionConfig& c);
void from_json(const json& j, AcquisitionConfig& c);
void to_json(json& j, const PoolState& p);
void from_json(const json& j, PoolState& p);

void to_json(json& j, const TpErrors& e);
void from_json(const json& j, TpErrors& e);
void to_json(json& j, const ClassMetrics& m);
void from_json(const json& j, ClassMetrics& m);
void to_json(json& j, const EvalReport& r);
void from_json(const json& j, EvalReport& r);

void to_json(json& j, const ExperimentConfig& c);
void from_json(const json& j, ExperimentConfig& c);
/// Omits wall_clock_seconds.
void to_json(json& j, const RoundResult& r);
void from_json(const json& j, RoundResult& r);
void to_json(json& j, const RunFailure& f);
void from_json(const json& j, RunFailure& f);
void to_json(json& j, const RunReport& r);
void from_json(const json& j, RunReport& r);

}  // namespace alsim
