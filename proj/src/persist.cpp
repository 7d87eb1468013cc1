#include "atslg/persist.hpp"

#include <fstream>
#include <sstream>

#include "atslg/error.hpp"

namespace atslg {
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

ScenarioField mask_field(const ScenarioSpace& space, const std::vector<char>& mask) {
  ScenarioField f(space);
  for (std::size_t k = 0; k < mask.size(); ++k) f[k] = mask[k] ? 1.0 : 0.0;
  return f;
}

}  // namespace

fs::path library_json_path(const fs::path& bin) {
  fs::path j = bin;
  j.replace_extension(".json");
  return j;
}

Json grid_json(const GridConfig& g) {
  return Json{{"r_min", g.r_min},       {"r_max", g.r_max},       {"r_step", g.r_step},
              {"rdot_min", g.rdot_min}, {"rdot_max", g.rdot_max}, {"rdot_step", g.rdot_step}};
}

Json kernel_json(const ArdSeKernel& k) {
  return Json{{"sigma_f", k.sigma_f}, {"lambda_r", k.lambda[0]}, {"lambda_rdot", k.lambda[1]}};
}

Json library_summary(const Library& lib) {
  return Json{{"epsilon", lib.epsilon},
              {"w_norm", lib.w_norm},
              {"threshold", lib.threshold},
              {"n_total", lib.q.size()},
              {"phi_count", lib.phi.size()},
              {"grid", grid_json(lib.space().config())},
              {"fields", {"v", "q", "in_phi", "p_x", "p_s"}}};
}

void save_library(const fs::path& bin, const Library& lib, const ScenarioField& p_x,
                  const ScenarioField& p_s) {
  require_same_space(lib.q, p_x, "exposure");
  require_same_space(lib.q, p_s, "surrogate outcome");
  {
    auto out = open_out(bin, true);
    write_field_binary(out, lib.v);
    write_field_binary(out, lib.q);
    write_field_binary(out, mask_field(lib.space(), lib.in_phi));
    write_field_binary(out, p_x);
    write_field_binary(out, p_s);
    finish(out, bin);
  }
  write_json(library_json_path(bin), library_summary(lib));
}

LibraryBundle load_library(const fs::path& bin) {
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw DataError("cannot open library '" + bin.string() + "'");
  ScenarioField v = read_field_binary(in);
  ScenarioField q = read_field_binary(in);
  ScenarioField mask = read_field_binary(in);
  ScenarioField p_x = read_field_binary(in);
  ScenarioField p_s = read_field_binary(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes in library '" + bin.string() + "'");
  }
  require_same_space(v, q, "library q");
  require_same_space(v, mask, "library mask");
  require_same_space(v, p_x, "library exposure");
  require_same_space(v, p_s, "library surrogate outcome");

  const Json meta = read_json(library_json_path(bin));
  double epsilon = 0.0;
  std::size_t phi_count = 0;
  try {
    epsilon = meta.at("epsilon").get<double>();
    phi_count = meta.at("phi_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("library manifest: " + std::string(e.what()));
  }

  Library lib = build_library(v, epsilon);
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (lib.q[k] != q[k] || (lib.in_phi[k] != 0) != (mask[k] != 0.0)) {
      throw DataError("library '" + bin.string() + "' is inconsistent at cell " +
                      std::to_string(k));
    }
  }
  if (lib.phi.size() != phi_count) throw DataError("library manifest phi_count mismatch");
  return {std::move(lib), std::move(p_x), std::move(p_s)};
}

void save_posterior(const fs::path& dir, const GatedPosterior& post) {
  fs::create_directories(dir);
  save_field_binary((dir / "p_class1.bin").string(), post.gpc.p_class1);
  save_field_binary((dir / "latent_var.bin").string(), post.gpc.latent_var);
  save_field_binary((dir / "sub_mean.bin").string(), post.gp_sub.mean);
  save_field_binary((dir / "sub_var.bin").string(), post.gp_sub.var);
  save_field_binary((dir / "opt_mean.bin").string(), post.gp_opt.mean);
  save_field_binary((dir / "opt_var.bin").string(), post.gp_opt.var);
  save_field_binary((dir / "mean.bin").string(), post.mean);
  write_json(dir / "posterior.json",
             Json{{"classifier",
                   {{"kernel", kernel_json(post.gpc.kernel)},
                    {"n_train", post.gpc.n_train},
                    {"log_marginal", post.gpc.log_marginal},
                    {"degenerate", post.gpc.degenerate}}},
                  {"regressor_nonzero",
                   {{"kernel", kernel_json(post.gp_sub.kernel)},
                    {"n_train", post.gp_sub.n_train},
                    {"log_marginal", post.gp_sub.log_marginal}}},
                  {"regressor_zero",
                   {{"kernel", kernel_json(post.gp_opt.kernel)},
                    {"n_train", post.gp_opt.n_train},
                    {"log_marginal", post.gp_opt.log_marginal}}}});
}

void write_observations_csv(std::ostream& out, const ScenarioSpace& space,
                            const std::vector<Observation>& obs,
                            const std::vector<std::size_t>& iters) {
  if (iters.size() != obs.size()) throw ShapeError("observation log: iteration tags mismatch");
  out << "iter,flat,R,Rdot,f\n";
  char buf[160];
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Scenario s = space.scenario(obs[i].flat);
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%g\n", iters[i], obs[i].flat, s.range,
                  s.range_rate, obs[i].f);
    out << buf;
  }
}

namespace {

Json method_json(const MethodStats& m) {
  return Json{{"method", m.method}, {"analytic", m.analytic}, {"mean", m.mean},
              {"std", m.std},       {"min", m.min},           {"max", m.max},
              {"required", m.required}};
}

}  // namespace

Json report_json(const CompareReport& r) {
  Json targets = Json::array();
  for (const auto& t : r.targets) {
    targets.push_back(Json{{"target_half_width", t.target},
                           {"crude", method_json(t.crude)},
                           {"offline", method_json(t.offline)},
                           {"adaptive", method_json(t.adaptive)},
                           {"accel_offline_vs_crude", t.accel_offline_vs_crude},
                           {"accel_adaptive_vs_offline", t.accel_adaptive_vs_offline},
                           {"unconverged", t.unconverged}});
  }
  return Json{{"mu_true", r.mu_true},
              {"sigma2_crude", r.sigma2_crude},
              {"sigma2_offline", r.sigma2_offline},
              {"sigma2_adaptive", r.sigma2_adaptive},
              {"n_reps", r.n_reps},
              {"adaptive_charge", r.adaptive_charge},
              {"alpha", r.alpha},
              {"targets", targets},
              {"mu_offline", r.mu_offline},
              {"mu_adaptive", r.mu_adaptive}};
}

void write_json(const fs::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

}  // namespace atslg
