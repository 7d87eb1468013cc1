#include "atslg/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Core>

#include "atslg/error.hpp"
#include "atslg/exposure.hpp"
#include "atslg/offline_library.hpp"
#include "atslg/rng.hpp"
#include "atslg/vehicle_sim.hpp"

namespace atslg {
namespace fs = std::filesystem;

Stage parse_stage(const std::string& name) {
  if (name == "offline") return Stage::kOffline;
  if (name == "adapt") return Stage::kAdapt;
  if (name == "eval") return Stage::kEval;
  if (name == "compare" || name == "all") return Stage::kCompare;
  throw ConfigError("unknown stage '" + name + "' (offline, adapt, eval, compare, all)");
}

const char* stage_name(Stage s) noexcept {
  switch (s) {
    case Stage::kOffline: return "offline";
    case Stage::kAdapt: return "adapt";
    case Stage::kEval: return "eval";
    case Stage::kCompare: return "compare";
  }
  return "?";
}

ExposureModel build_exposure(const RunConfig& cfg) {
  const ScenarioSpace space(cfg.grid);
  if (cfg.exposure.source == "csv") {
    std::ifstream in(cfg.exposure.csv);
    if (!in) throw DataError("cannot open exposure csv '" + cfg.exposure.csv + "'");
    return ingest_events(space, in);
  }
  const auto events =
      generate_synthetic_ndd(space, cfg.exposure.n_events, cfg.seed, cfg.exposure.mixture);
  return exposure_from_events(space, events);
}

std::size_t count_mismatch(const ScenarioField& a, const ScenarioField& b) {
  require_same_space(a, b, "mismatch count");
  std::size_t n = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (std::abs(a[k] - b[k]) >= 0.5) ++n;
  }
  return n;
}

namespace {

std::string iter_dir_name(std::size_t it) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%03zu", it);
  return buf;
}

// Fit index that first used each observation: the initial batch feeds fit 0
// and the cell selected at iteration k feeds fit k + 1.
std::vector<std::size_t> observation_iters(const std::vector<Observation>& obs,
                                           std::size_t n_initial) {
  std::vector<std::size_t> it(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) it[i] = i < n_initial ? 0 : i - n_initial + 1;
  return it;
}

}  // namespace

void write_adapt_dir(const fs::path& dir, const AdaptiveResult& result, const ScenarioField& p_s,
                     const ScenarioField* ground_truth) {
  fs::create_directories(dir);
  const std::size_t n_initial =
      result.snapshots.empty() ? 0 : result.snapshots.front().observations.size();
  Json iters = Json::array();
  for (const auto& snap : result.snapshots) {
    const fs::path d = dir / iter_dir_name(snap.iteration);
    fs::create_directories(d);
    {
      std::ofstream out(d / "observations.csv");
      write_observations_csv(out, p_s.space(), snap.observations,
                             observation_iters(snap.observations, n_initial));
      if (!out) throw DataError("cannot write observations in '" + d.string() + "'");
    }
    save_field_binary((d / "sm_updated.bin").string(), snap.sm_updated);
    save_field_binary((d / "q.bin").string(), snap.q);
    if (snap.acquisition.size() != 0) {
      save_field_binary((d / "acquisition.bin").string(), snap.acquisition);
    }
    Json m{{"iteration", snap.iteration},
           {"n_observations", snap.observations.size()},
           {"u_count", snap.u_count},
           {"phi_count", snap.phi_count},
           {"library_fallback", snap.library_fallback},
           {"gpc_degenerate", snap.gpc_degenerate},
           {"gpc_kernel", kernel_json(snap.gpc_kernel)},
           {"sub_kernel", kernel_json(snap.sub_kernel)},
           {"opt_kernel", kernel_json(snap.opt_kernel)}};
    if (snap.has_selection) m["selected"] = snap.selected;
    if (ground_truth != nullptr) m["mismatch"] = count_mismatch(snap.sm_updated, *ground_truth);
    write_json(d / "manifest.json", m);
    iters.push_back(std::move(m));
  }
  save_posterior(dir / "posterior", result.state.gated);
  Json summary{{"cav_tests", result.cav_tests},
               {"fits", result.snapshots.size()},
               {"stopped_early", result.stopped_early},
               {"customized_phi_count", result.customized.phi.size()}};
  if (ground_truth != nullptr) summary["mismatch_surrogate"] = count_mismatch(p_s, *ground_truth);
  summary["iterations"] = std::move(iters);
  write_json(dir / "manifest.json", summary);
}

void write_compare_dir(const fs::path& dir, const CompareReport& report) {
  fs::create_directories(dir);
  write_json(dir / "report.json", report_json(report));
  std::ostringstream conv;
  write_convergence_csv(conv, report);
  write_text(dir / "convergence.csv", conv.str());
  std::ostringstream req;
  write_required_tests_csv(req, report);
  write_text(dir / "required_tests.csv", req.str());
}

namespace {

using Clock = std::chrono::steady_clock;

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(buf.str());
  return s.str();
}

// Every regular file except the two manifests themselves, sorted by path.
Json file_table(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root);
    if (rel == "manifest.json" || rel == "timings.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  Json t = Json::object();
  for (const auto& f : files) t[f.generic_string()] = file_hash(root / f);
  return t;
}

std::string compiler_id() {
#if defined(__clang__)
  return "clang " __clang_version__;
#elif defined(__GNUC__)
  return "gcc " __VERSION__;
#else
  return "unknown";
#endif
}

void save_trace(const fs::path& p, const EvalTrace& t) {
  std::ostringstream s;
  write_trace_csv(s, t);
  write_text(p, s.str());
}

Json trace_summary(const EvalTrace& t) {
  return Json{{"mu_hat", t.mu_hat},
              {"sample_variance", t.sample_variance},
              {"n_used", t.n_used},
              {"converged", t.converged},
              {"diagnostic", t.diagnostic}};
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config, const fs::path& out, Stage last,
                            std::ostream* log) {
  RunConfig cfg = config;
  sync_derived(cfg);
  validate(cfg);
  fs::create_directories(out);
  const auto say = [&](const std::string& msg) {
    if (log != nullptr) *log << msg << '\n';
  };
  Json timings = Json::object();
  Json stages = Json::object();
  const std::string hash = config_hash(cfg);
  write_text(out / "config.toml", dump_config(cfg));

  const ScenarioSpace space(cfg.grid);
  const FvdmPolicy sm(cfg.fvdm);
  const AccAebPolicy cav(cfg.accaeb);

  // Each stage body runs under a guard that tags errors with its name.
  const auto run_stage = [&](Stage s, auto&& body) {
    const auto t0 = Clock::now();
    say(std::string("[") + stage_name(s) + "]");
    try {
      body();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(stage_name(s)) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(stage_name(s)) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(std::string(stage_name(s)) + ": " + e.what());
    }
    timings[stage_name(s)] = std::chrono::duration<double>(Clock::now() - t0).count();
  };

  ExposureModel exposure;
  ScenarioField p_s;
  Library offline;
  run_stage(Stage::kOffline, [&] {
    exposure = build_exposure(cfg);
    p_s = outcome_field(sm, space, cfg.episode);
    offline = build_library(criticality(p_s, exposure.p_x), cfg.epsilon);
    save_field_binary((out / "exposure.bin").string(), exposure.p_x);
    save_field_csv((out / "exposure.csv").string(), exposure.p_x);
    save_field_binary((out / "sm_outcome.bin").string(), p_s);
    save_library(out / "library.bin", offline, exposure.p_x, p_s);
    stages["offline"] = Json{{"events_used", exposure.n_events_used},
                             {"events_rejected", exposure.n_events_rejected},
                             {"library", library_summary(offline)}};
    say("  library: " + std::to_string(offline.phi.size()) + " critical cells");
  });

  ScenarioField p_a;
  Library customized;
  if (last >= Stage::kAdapt) {
    run_stage(Stage::kAdapt, [&] {
      p_a = outcome_field(cav, space, cfg.episode);
      save_field_binary((out / "cav_outcome.bin").string(), p_a);
      const AdaptiveResult res =
          run_adaptive({offline, p_s, exposure.p_x, cav, cfg.episode}, cfg.adaptive);
      customized = res.customized;
      write_adapt_dir(out / "adapt", res, p_s, &p_a);
      save_library(out / "customized.bin", customized, exposure.p_x,
                   res.state.surrogate.sm_updated);
      const std::size_t before = count_mismatch(p_s, p_a);
      const std::size_t after = count_mismatch(res.snapshots.back().sm_updated, p_a);
      stages["adapt"] = Json{{"cav_tests", res.cav_tests},
                             {"mismatch_before", before},
                             {"mismatch_after", after},
                             {"library", library_summary(customized)}};
      say("  mismatched cells: " + std::to_string(before) + " -> " + std::to_string(after));
    });
  }

  if (last >= Stage::kEval) {
    run_stage(Stage::kEval, [&] {
      const EvalConfig& ec = cfg.compare.eval;
      Rng r_crude = Rng::stream(ec.seed, "eval.crude");
      Rng r_off = Rng::stream(ec.seed, "eval.offline");
      Rng r_ada = Rng::stream(ec.seed, "eval.adaptive");
      const EvalTrace crude = evaluate_crude(exposure.p_x, cav, cfg.episode, ec, r_crude);
      const EvalTrace off = evaluate_is(offline, exposure.p_x, cav, cfg.episode, ec, r_off);
      const EvalTrace ada = evaluate_is(customized, exposure.p_x, cav, cfg.episode, ec, r_ada);
      save_trace(out / "eval" / "crude_trace.csv", crude);
      save_trace(out / "eval" / "offline_trace.csv", off);
      save_trace(out / "eval" / "adaptive_trace.csv", ada);
      stages["eval"] = Json{{"mu_true", true_rate(p_a, exposure.p_x)},
                            {"crude", trace_summary(crude)},
                            {"offline", trace_summary(off)},
                            {"adaptive", trace_summary(ada)}};
      say("  tests to target: crude " + std::to_string(crude.n_used) + ", offline " +
          std::to_string(off.n_used) + ", adaptive " + std::to_string(ada.n_used));
    });
  }

  if (last >= Stage::kCompare) {
    run_stage(Stage::kCompare, [&] {
      const CompareReport rep =
          compare_methods({exposure.p_x, p_a, offline, customized}, cfg.compare);
      write_compare_dir(out / "compare", rep);
      Json accel = Json::array();
      for (const auto& t : rep.targets) {
        accel.push_back(Json{{"target_half_width", t.target},
                             {"crude", t.crude.mean},
                             {"offline", t.offline.mean},
                             {"adaptive", t.adaptive.mean}});
        char line[160];
        std::snprintf(line, sizeof line, "  half-width %.2f: crude %.0f, offline %.1f, adaptive %.1f",
                      t.target, t.crude.mean, t.offline.mean, t.adaptive.mean);
        say(line);
      }
      stages["compare"] = Json{{"required_tests", accel}};
    });
  }

  Json manifest{{"tool", "atslg"},
                {"version", kVersion},
                {"config_hash", hash},
                {"seed", cfg.seed},
                {"stage", stage_name(last)},
                {"versions",
                 {{"atslg", kVersion},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"compiler", compiler_id()}}},
                {"stages", stages},
                {"files", file_table(out)}};
  write_json(out / "manifest.json", manifest);
  write_json(out / "timings.json", timings);
  return {last, out, hash};
}

}  // namespace atslg
