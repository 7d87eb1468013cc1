#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "atslg/adaptive.hpp"
#include "atslg/config.hpp"
#include "atslg/evaluator.hpp"
#include "atslg/persist.hpp"

namespace atslg {

inline constexpr const char* kVersion = "1.0.0";

/// Each stage also runs every stage before it.
enum class Stage { kOffline = 0, kAdapt = 1, kEval = 2, kCompare = 3 };

/// "offline", "adapt", "eval", "compare" or "all" (= compare). Throws ConfigError.
Stage parse_stage(const std::string& name);
const char* stage_name(Stage s) noexcept;

/// Exposure from the configured source. Synthetic draws use cfg.seed.
ExposureModel build_exposure(const RunConfig& cfg);

/// Writes `iter_NNN/` per fit, the final posterior and a summary manifest
/// under `dir`. `ground_truth`, when given, adds mismatch counts.
void write_adapt_dir(const std::filesystem::path& dir, const AdaptiveResult& result,
                     const ScenarioField& p_s, const ScenarioField* ground_truth);

/// Cells where |a - b| >= 0.5, i.e. disagreeing indicators.
std::size_t count_mismatch(const ScenarioField& a, const ScenarioField& b);

/// Writes report.json, convergence.csv and required_tests.csv.
void write_compare_dir(const std::filesystem::path& dir, const CompareReport& report);

struct PipelineResult {
  Stage reached = Stage::kOffline;
  std::filesystem::path run_dir;
  std::string config_hash;
};

/// Runs every stage up to `last` into `out`. The manifest is deterministic
/// for a fixed config; wall-clock timings go to timings.json. Stage failures
/// are rethrown with the stage name prefixed to the message. `log` may be null.
PipelineResult run_pipeline(const RunConfig& cfg, const std::filesystem::path& out, Stage last,
                            std::ostream* log);

}  // namespace atslg
