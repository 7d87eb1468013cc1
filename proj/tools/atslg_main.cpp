// atslg command-line entry point.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "atslg/config.hpp"
#include "atslg/error.hpp"
#include "atslg/evaluator.hpp"
#include "atslg/exposure.hpp"
#include "atslg/offline_library.hpp"
#include "atslg/persist.hpp"
#include "atslg/pipeline.hpp"
#include "atslg/rng.hpp"
#include "atslg/vehicle_sim.hpp"

namespace fs = std::filesystem;
using namespace atslg;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitData = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;

  [[nodiscard]] RunConfig load() const {
    RunConfig cfg;
    if (!config.empty()) cfg = load_config(config);
    if (seed) cfg.seed = *seed;
    sync_derived(cfg);
    validate(cfg);
    return cfg;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration (TOML)");
  cmd->add_option("--seed", c.seed, "Override the master seed");
}

bool is_csv(const fs::path& p) { return p.extension() == ".csv"; }

void save_field(const fs::path& p, const ScenarioField& f) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  if (is_csv(p)) {
    save_field_csv(p.string(), f);
  } else {
    save_field_binary(p.string(), f);
  }
}

// Field binary, or an events CSV (`range,range_rate`) that is histogrammed.
ScenarioField load_exposure(const fs::path& p, const ScenarioSpace& space) {
  if (!is_csv(p)) return load_field_binary(p.string());
  std::ifstream in(p);
  if (!in) throw DataError("cannot open '" + p.string() + "'");
  return ingest_events(space, in).p_x;
}

void print_trace_summary(const char* label, const EvalTrace& t) {
  std::printf("%s: mu_hat %.6g  tests %zu  converged %s%s%s\n", label, t.mu_hat, t.n_used,
              t.converged ? "yes" : "no", t.diagnostic.empty() ? "" : "  ",
              t.diagnostic.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive testing-scenario library generation for cut-in tests"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // ndd ------------------------------------------------------------------
  auto* ndd = app.add_subcommand("ndd", "Naturalistic driving data: exposure frequency");
  ndd->require_subcommand(1);
  Common ndd_ingest_c;
  std::string ingest_csv, ingest_out;
  auto* ingest = ndd->add_subcommand("ingest", "Histogram a range,range_rate CSV");
  ingest->add_option("--csv", ingest_csv, "Event file")->required();
  ingest->add_option("--out", ingest_out, "Exposure field (.bin or .csv)")->required();
  add_common(ingest, ndd_ingest_c);

  Common ndd_synth_c;
  std::size_t synth_n = 414770;
  std::string synth_out, synth_field;
  auto* synth = ndd->add_subcommand("synth", "Draw synthetic cut-in events");
  synth->add_option("--n", synth_n, "Number of events")->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_out, "Events CSV")->required();
  synth->add_option("--field", synth_field, "Also write the exposure field here");
  add_common(synth, ndd_synth_c);

  // sim ------------------------------------------------------------------
  Common sim_c;
  std::string sim_policy = "accaeb", sim_trace;
  double sim_r = 0.0, sim_rdot = 0.0;
  auto* sim = app.add_subcommand("sim", "Simulate one cut-in episode");
  sim->add_option("--policy", sim_policy, "fvdm or accaeb")
      ->check(CLI::IsMember({"fvdm", "accaeb"}));
  sim->add_option("--r", sim_r, "Initial range, m")->required();
  sim->add_option("--rdot", sim_rdot, "Initial range rate, m/s")->required();
  sim->add_option("--trace", sim_trace, "Trajectory CSV");
  add_common(sim, sim_c);

  // offline --------------------------------------------------------------
  Common off_c;
  std::string off_exposure, off_out;
  auto* offline = app.add_subcommand("offline", "Build the offline library from the surrogate");
  offline->add_option("--exposure", off_exposure, "Exposure field (.bin) or events (.csv)")
      ->required();
  offline->add_option("--out", off_out, "Library file")->required();
  add_common(offline, off_c);

  // adapt ----------------------------------------------------------------
  Common ad_c;
  std::string ad_offline, ad_out;
  auto* adapt = app.add_subcommand("adapt", "Customize a library for the vehicle under test");
  adapt->add_option("--offline", ad_offline, "Offline library file")->required();
  adapt->add_option("--out", ad_out, "Output directory")->required();
  add_common(adapt, ad_c);

  // eval -----------------------------------------------------------------
  Common ev_c;
  std::string ev_library, ev_method = "is", ev_out;
  std::optional<double> ev_target;
  auto* eval = app.add_subcommand("eval", "Estimate the accident rate of the vehicle under test");
  eval->add_option("--library", ev_library, "Library file")->required();
  eval->add_option("--method", ev_method, "crude or is")->check(CLI::IsMember({"crude", "is"}));
  eval->add_option("--target", ev_target, "Relative half-width to stop at");
  eval->add_option("--out", ev_out, "Trace CSV");
  add_common(eval, ev_c);

  // compare --------------------------------------------------------------
  Common cmp_c;
  std::string cmp_offline, cmp_customized, cmp_run, cmp_out = "report.json";
  std::optional<std::size_t> cmp_reps;
  auto* compare = app.add_subcommand("compare", "Required tests of crude, offline and adaptive");
  compare->add_option("--offline", cmp_offline, "Offline library file")->required();
  auto* cust_opt = compare->add_option("--customized", cmp_customized, "Customized library file");
  auto* run_opt = compare->add_option("--run", cmp_run, "Run directory of `adapt`");
  cust_opt->excludes(run_opt);
  compare->add_option("--reps", cmp_reps, "Replications")->check(CLI::PositiveNumber);
  compare->add_option("--out", cmp_out, "Report JSON; CSVs are written beside it");
  add_common(compare, cmp_c);

  // pipeline -------------------------------------------------------------
  Common pl_c;
  std::string pl_out, pl_stage = "all";
  auto* pipeline = app.add_subcommand("pipeline", "Run offline, adapt, eval and compare");
  pipeline->add_option("--out", pl_out, "Run directory")->required();
  pipeline->add_option("--stage", pl_stage, "Last stage: offline, adapt, eval, compare or all");
  add_common(pipeline, pl_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (ingest->parsed()) {
      const RunConfig cfg = ndd_ingest_c.load();
      std::ifstream in(ingest_csv);
      if (!in) throw DataError("cannot open '" + ingest_csv + "'");
      const ExposureModel m = ingest_events(ScenarioSpace(cfg.grid), in);
      save_field(ingest_out, m.p_x);
      std::printf("events used %zu, rejected %zu\n", m.n_events_used, m.n_events_rejected);
    } else if (synth->parsed()) {
      const RunConfig cfg = ndd_synth_c.load();
      const ScenarioSpace space(cfg.grid);
      const auto events = generate_synthetic_ndd(space, synth_n, cfg.seed, cfg.exposure.mixture);
      if (fs::path(synth_out).has_parent_path()) {
        fs::create_directories(fs::path(synth_out).parent_path());
      }
      std::ofstream out(synth_out);
      write_events_csv(out, events);
      if (!out) throw DataError("cannot write '" + synth_out + "'");
      if (!synth_field.empty()) save_field(synth_field, exposure_from_events(space, events).p_x);
      std::printf("wrote %zu events\n", events.size());
    } else if (sim->parsed()) {
      const RunConfig cfg = sim_c.load();
      const FvdmPolicy fvdm(cfg.fvdm);
      const AccAebPolicy acc(cfg.accaeb);
      const CarFollowingPolicy& policy =
          sim_policy == "fvdm" ? static_cast<const CarFollowingPolicy&>(fvdm) : acc;
      const EpisodeResult r =
          simulate_cutin(policy, {sim_r, sim_rdot}, cfg.episode, !sim_trace.empty());
      if (r.trajectory) {
        std::ostringstream s;
        s << "t,R,Rdot,v_cav,u\n";
        char buf[160];
        for (const auto& p : *r.trajectory) {
          std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.t, p.range,
                        p.range_rate, p.v_cav, p.u);
          s << buf;
        }
        write_text(sim_trace, s.str());
      }
      std::printf("policy %s  accident %s  min_distance %.6g\n", sim_policy.c_str(),
                  r.accident ? "yes" : "no", r.min_distance);
    } else if (offline->parsed()) {
      const RunConfig cfg = off_c.load();
      const ScenarioSpace space(cfg.grid);
      const ScenarioField p_x = load_exposure(off_exposure, space);
      const ScenarioField p_s = outcome_field(FvdmPolicy(cfg.fvdm), p_x.space(), cfg.episode);
      const Library lib = build_library(criticality(p_s, p_x), cfg.epsilon);
      save_library(off_out, lib, p_x, p_s);
      std::printf("library: %zu critical cells, W %.6g\n", lib.phi.size(), lib.w_norm);
    } else if (adapt->parsed()) {
      const RunConfig cfg = ad_c.load();
      const LibraryBundle b = load_library(ad_offline);
      const AccAebPolicy cav(cfg.accaeb);
      const ScenarioField p_a = outcome_field(cav, b.p_x.space(), cfg.episode);
      const AdaptiveResult res =
          run_adaptive({b.library, b.p_s, b.p_x, cav, cfg.episode}, cfg.adaptive);
      write_adapt_dir(ad_out, res, b.p_s, &p_a);
      save_library(fs::path(ad_out) / "customized.bin", res.customized, b.p_x,
                   res.state.surrogate.sm_updated);
      std::printf("cav tests %zu, mismatched cells %zu -> %zu, customized library %zu cells\n",
                  res.cav_tests, count_mismatch(b.p_s, p_a),
                  count_mismatch(res.snapshots.back().sm_updated, p_a), res.customized.phi.size());
    } else if (eval->parsed()) {
      const RunConfig cfg = ev_c.load();
      const LibraryBundle b = load_library(ev_library);
      EvalConfig ec = cfg.compare.eval;
      if (ev_target) ec.target_half_width = *ev_target;
      validate(ec);
      const AccAebPolicy cav(cfg.accaeb);
      Rng rng = Rng::stream(ec.seed, "eval." + ev_method);
      const EvalTrace t = ev_method == "crude"
                              ? evaluate_crude(b.p_x, cav, cfg.episode, ec, rng)
                              : evaluate_is(b.library, b.p_x, cav, cfg.episode, ec, rng);
      if (!ev_out.empty()) {
        std::ostringstream s;
        write_trace_csv(s, t);
        write_text(ev_out, s.str());
      }
      print_trace_summary(ev_method.c_str(), t);
    } else if (compare->parsed()) {
      if (cmp_customized.empty() && cmp_run.empty()) {
        throw ConfigError("compare: one of --customized or --run is required");
      }
      RunConfig cfg = cmp_c.load();
      if (cmp_reps) cfg.compare.n_reps = *cmp_reps;
      const LibraryBundle off = load_library(cmp_offline);
      const LibraryBundle cust = load_library(
          cmp_customized.empty() ? fs::path(cmp_run) / "customized.bin" : fs::path(cmp_customized));
      require_same_space(off.p_x, cust.p_x, "customized library");
      const ScenarioField p_a =
          outcome_field(AccAebPolicy(cfg.accaeb), off.p_x.space(), cfg.episode);
      const CompareReport rep =
          compare_methods({off.p_x, p_a, off.library, cust.library}, cfg.compare);
      const fs::path out(cmp_out);
      const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
      write_json(out, report_json(rep));
      std::ostringstream conv, req;
      write_convergence_csv(conv, rep);
      write_required_tests_csv(req, rep);
      write_text(dir / "convergence.csv", conv.str());
      write_text(dir / "required_tests.csv", req.str());
      std::printf("true rate %.6g over %zu replications\n", rep.mu_true, rep.n_reps);
      for (const auto& t : rep.targets) {
        std::printf("half-width %.2f: crude %.0f  offline %.1f  adaptive %.1f\n", t.target,
                    t.crude.mean, t.offline.mean, t.adaptive.mean);
      }
    } else if (pipeline->parsed()) {
      const RunConfig cfg = pl_c.load();
      const PipelineResult r = run_pipeline(cfg, pl_out, parse_stage(pl_stage), &std::cout);
      std::printf("run %s complete (config %s)\n", r.run_dir.string().c_str(),
                  r.config_hash.c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
