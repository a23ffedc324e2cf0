#pragma once

#include <json.hpp>

#include <optional>

#include "opendisc/evaluation.hpp"
#include "opendisc/pipeline.hpp"

namespace opendisc {

nlohmann::json to_json(const PipelineConfig& config);

/// Per-class IoU, means over all, trained and novel classes, and the
/// cluster-to-class assignment.
nlohmann::json to_json(const EvalReport& report, const ClassList& classes);

/// Deterministic run summary: configuration, map and cluster counts, the
/// per-frame feature-store footprint and, when given, the evaluation. Stage
/// names are listed but wall-clock figures live in timing_report().
nlohmann::json run_report(const Pipeline& pipeline, const std::optional<nlohmann::json>& evaluation);

/// Mean and per-frame milliseconds for each stage.
nlohmann::json timing_report(const StageProfiler& profiler);

}  // namespace opendisc
