#include "atslg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "atslg/error.hpp"
#include "atslg/rng.hpp"

namespace atslg {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
      return false;
    }
  }
  return k.front() != '.' && k.back() != '.';
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

double parse_number(const std::string& s, int line) {
  double v = 0.0;
  std::string t;
  for (char c : s) {
    if (c != '_') t.push_back(c);  // TOML digit separators
  }
  if (!t.empty() && t.front() == '+') t.erase(0, 1);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) {
    fail(line, "cannot parse value '" + s + "'");
  }
  return v;
}

TomlValue parse_value(const std::string& raw, int line) {
  const std::string s = trim(raw);
  if (s.empty()) fail(line, "missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail(line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        const char n = s[++i];
        out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') fail(line, "unterminated array");
    std::vector<double> arr;
    std::stringstream body(s.substr(1, s.size() - 2));
    std::string item;
    while (std::getline(body, item, ',')) {
      const std::string t = trim(item);
      if (t.empty()) continue;
      arr.push_back(parse_number(t, line));
    }
    return arr;
  }
  if (s.find_first_of(".eEn") == std::string::npos) {
    std::string t;
    for (char ch : s) {
      if (ch != '_') t.push_back(ch);
    }
    if (!t.empty() && t.front() == '+') t.erase(0, 1);
    std::int64_t i = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), i);
    if (ec == std::errc() && p == t.data() + t.size() && !t.empty()) return i;
    if (ec != std::errc::result_out_of_range) fail(line, "cannot parse value '" + s + "'");
    fail(line, "integer out of range '" + s + "'");
  }
  return parse_number(s, line);
}

const char* type_name(const TomlValue& v) {
  switch (v.index()) {
    case 0: return "float";
    case 1: return "integer";
    case 2: return "string";
    case 3: return "boolean";
    default: return "array";
  }
}

}  // namespace

void TomlTable::set(const std::string& key, TomlValue value, int line) {
  if (values_.count(key) != 0) fail(line, "duplicate key '" + key + "'");
  values_.emplace(key, std::move(value));
  lines_[key] = line;
}

const TomlValue& TomlTable::fetch(const std::string& key) {
  used_.insert(key);
  return values_.at(key);
}

namespace {

template <typename T>
const T& expect(const TomlValue& v, const std::string& key, const char* want) {
  if (const T* p = std::get_if<T>(&v)) return *p;
  throw ConfigError(key + ": expected " + want + ", got " + type_name(v));
}

}  // namespace

void TomlTable::read(const std::string& key, double& out) {
  if (!has(key)) return;
  const TomlValue& v = fetch(key);
  if (const auto* i = std::get_if<std::int64_t>(&v)) {
    out = static_cast<double>(*i);
  } else {
    out = expect<double>(v, key, "number");
  }
}

void TomlTable::read(const std::string& key, std::size_t& out) {
  if (!has(key)) return;
  const std::int64_t v = expect<std::int64_t>(fetch(key), key, "integer");
  if (v < 0) throw ConfigError(key + ": expected a non-negative integer");
  out = static_cast<std::size_t>(v);
}

void TomlTable::read(const std::string& key, int& out) {
  if (!has(key)) return;
  const std::int64_t v = expect<std::int64_t>(fetch(key), key, "integer");
  if (v < -1000000000 || v > 1000000000) throw ConfigError(key + ": integer out of range");
  out = static_cast<int>(v);
}

void TomlTable::read(const std::string& key, bool& out) {
  if (has(key)) out = expect<bool>(fetch(key), key, "boolean");
}

void TomlTable::read(const std::string& key, std::string& out) {
  if (has(key)) out = expect<std::string>(fetch(key), key, "string");
}

void TomlTable::read(const std::string& key, std::vector<double>& out) {
  if (has(key)) out = expect<std::vector<double>>(fetch(key), key, "array");
}

void TomlTable::reject_unread() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (used_.count(key) == 0) {
      unknown += (unknown.empty() ? "" : ", ") + key + " (line " +
                 std::to_string(lines_.at(key)) + ")";
    }
  }
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

TomlTable parse_toml(std::istream& in) {
  TomlTable table;
  std::string section;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "malformed section header");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (!valid_key(section)) fail(line, "invalid section name '" + section + "'");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    if (!valid_key(key)) fail(line, "invalid key '" + key + "'");
    table.set(section.empty() ? key : section + "." + key, parse_value(s.substr(eq + 1), line),
              line);
  }
  return table;
}

namespace {

void read_component(TomlTable& t, const std::string& p, MixtureComponent& c) {
  t.read(p + ".weight", c.weight);
  t.read(p + ".mean_range", c.mean_range);
  t.read(p + ".mean_range_rate", c.mean_range_rate);
  t.read(p + ".sd_range", c.sd_range);
  t.read(p + ".sd_range_rate", c.sd_range_rate);
}

void read_limits(TomlTable& t, VehicleLimits& l) {
  t.read("vehicle.limits.v_min", l.v_min);
  t.read("vehicle.limits.v_max", l.v_max);
  t.read("vehicle.limits.a_min", l.a_min);
  t.read("vehicle.limits.a_max", l.a_max);
}

const char* class_variance_name(ClassVariance k) {
  return k == ClassVariance::kLatent ? "latent" : "bernoulli";
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  TomlTable t = parse_toml(in);
  RunConfig c;
  t.read("seed", c.seed);

  t.read("grid.r_min", c.grid.r_min);
  t.read("grid.r_max", c.grid.r_max);
  t.read("grid.r_step", c.grid.r_step);
  t.read("grid.rdot_min", c.grid.rdot_min);
  t.read("grid.rdot_max", c.grid.rdot_max);
  t.read("grid.rdot_step", c.grid.rdot_step);

  t.read("exposure.source", c.exposure.source);
  t.read("exposure.csv", c.exposure.csv);
  t.read("exposure.n_events", c.exposure.n_events);
  read_component(t, "exposure.component_a", c.exposure.mixture.components[0]);
  read_component(t, "exposure.component_b", c.exposure.mixture.components[1]);

  t.read("vehicle.fvdm.c0", c.fvdm.c0);
  t.read("vehicle.fvdm.v1", c.fvdm.v1);
  t.read("vehicle.fvdm.v2", c.fvdm.v2);
  t.read("vehicle.fvdm.c1", c.fvdm.c1);
  t.read("vehicle.fvdm.length", c.fvdm.length);
  t.read("vehicle.fvdm.c2", c.fvdm.c2);
  VehicleLimits limits;
  read_limits(t, limits);
  c.fvdm.limits = limits;
  c.accaeb.limits = limits;
  t.read("vehicle.accaeb.time_headway", c.accaeb.time_headway);
  t.read("vehicle.accaeb.standstill_gap", c.accaeb.standstill_gap);
  t.read("vehicle.accaeb.k_gap", c.accaeb.k_gap);
  t.read("vehicle.accaeb.k_rate", c.accaeb.k_rate);
  t.read("vehicle.accaeb.ttc_brake", c.accaeb.ttc_brake);
  t.read("vehicle.episode.dt", c.episode.dt);
  t.read("vehicle.episode.horizon", c.episode.horizon);
  t.read("vehicle.episode.v_cav0", c.episode.v_cav0);
  t.read("vehicle.episode.d_min", c.episode.d_min);

  t.read("offline.epsilon", c.epsilon);

  AdaptiveConfig& a = c.adaptive;
  t.read("adaptive.n_initial", a.n_initial);
  t.read("adaptive.n_adaptive", a.n_adaptive);
  t.read("adaptive.gamma", a.gamma);
  t.read("adaptive.p_th", a.p_th);
  t.read("adaptive.w_acq", a.w_acq);
  t.read("adaptive.beta_explore", a.beta_explore);
  std::string cv = class_variance_name(a.class_variance);
  t.read("adaptive.class_variance", cv);
  if (cv == "bernoulli") {
    a.class_variance = ClassVariance::kBernoulli;
  } else if (cv == "latent") {
    a.class_variance = ClassVariance::kLatent;
  } else {
    throw ConfigError("adaptive.class_variance: expected \"bernoulli\" or \"latent\"");
  }
  t.read("adaptive.jitter", a.gp.jitter);
  t.read("adaptive.restarts", a.gp.restarts);
  t.read("adaptive.max_iter", a.gp.max_iter);
  t.read("adaptive.early_stop", a.early_stop);
  t.read("adaptive.early_stop_tv", a.early_stop_tv);
  t.read("adaptive.early_stop_window", a.early_stop_window);

  EvalConfig& e = c.compare.eval;
  t.read("eval.alpha", e.alpha);
  t.read("eval.target_half_width", e.target_half_width);
  t.read("eval.max_tests", e.max_tests);
  t.read("eval.warmup", e.warmup);
  t.read("compare.reps", c.compare.n_reps);
  t.read("compare.targets", c.compare.targets);
  t.read("compare.empirical_crude", c.compare.empirical_crude);

  t.reject_unread();

  sync_derived(c);
  validate(c);
  return c;
}

void sync_derived(RunConfig& c) {
  c.adaptive.epsilon = c.epsilon;
  c.adaptive.seed = c.seed;
  c.compare.eval.seed = c.seed;
  c.compare.adaptive_charge = c.adaptive.n_initial + c.adaptive.n_adaptive;
  c.accaeb.limits = c.fvdm.limits;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

void validate(const RunConfig& c) {
  (void)ScenarioSpace(c.grid);
  if (c.exposure.source != "synth" && c.exposure.source != "csv") {
    throw ConfigError("exposure.source: expected \"synth\" or \"csv\"");
  }
  if (c.exposure.source == "csv" && c.exposure.csv.empty()) {
    throw ConfigError("exposure.csv: required when exposure.source = \"csv\"");
  }
  if (c.exposure.n_events < 1) throw ConfigError("exposure.n_events: must be >= 1");
  for (const auto& comp : c.exposure.mixture.components) {
    if (!(comp.weight >= 0.0) || !(comp.sd_range > 0.0) || !(comp.sd_range_rate > 0.0)) {
      throw ConfigError("exposure.component: weights must be >= 0 and deviations > 0");
    }
  }
  const VehicleLimits& l = c.fvdm.limits;
  if (!(l.v_min < l.v_max)) throw ConfigError("vehicle.limits: v_min must be below v_max");
  if (!(l.a_min < 0.0 && 0.0 < l.a_max)) {
    throw ConfigError("vehicle.limits: need a_min < 0 < a_max");
  }
  if (!(c.accaeb.ttc_brake > 0.0)) throw ConfigError("vehicle.accaeb.ttc_brake: must be positive");
  if (!(c.accaeb.k_gap > 0.0 && c.accaeb.k_rate > 0.0)) {
    throw ConfigError("vehicle.accaeb: gains must be positive");
  }
  validate(c.episode);
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw ConfigError("offline.epsilon: must lie in (0, 1)");
  validate(c.adaptive);
  validate(c.compare.eval);
  if (c.compare.n_reps < 1) throw ConfigError("compare.reps: must be >= 1");
  if (c.compare.targets.empty()) throw ConfigError("compare.targets: must not be empty");
  for (double t : c.compare.targets) {
    if (!(t > 0.0)) throw ConfigError("compare.targets: entries must be positive");
  }
}

namespace {

// Shortest round-trip rendering that still reads back as a float.
std::string num(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string out(buf, p);
  if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
  return out;
}

void put_component(std::ostream& o, const char* name, const MixtureComponent& c) {
  o << "\n[exposure." << name << "]\n"
    << "weight = " << num(c.weight) << "\nmean_range = " << num(c.mean_range)
    << "\nmean_range_rate = " << num(c.mean_range_rate) << "\nsd_range = " << num(c.sd_range)
    << "\nsd_range_rate = " << num(c.sd_range_rate) << "\n";
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  return out + "\"";
}

}  // namespace

std::string dump_config(const RunConfig& c) {
  std::ostringstream o;
  o << "seed = " << c.seed << "\n";
  o << "\n[grid]\nr_min = " << num(c.grid.r_min) << "\nr_max = " << num(c.grid.r_max)
    << "\nr_step = " << num(c.grid.r_step) << "\nrdot_min = " << num(c.grid.rdot_min)
    << "\nrdot_max = " << num(c.grid.rdot_max) << "\nrdot_step = " << num(c.grid.rdot_step)
    << "\n";
  o << "\n[exposure]\nsource = " << quoted(c.exposure.source)
    << "\ncsv = " << quoted(c.exposure.csv) << "\nn_events = " << c.exposure.n_events << "\n";
  put_component(o, "component_a", c.exposure.mixture.components[0]);
  put_component(o, "component_b", c.exposure.mixture.components[1]);
  const VehicleLimits& l = c.fvdm.limits;
  o << "\n[vehicle.limits]\nv_min = " << num(l.v_min) << "\nv_max = " << num(l.v_max)
    << "\na_min = " << num(l.a_min) << "\na_max = " << num(l.a_max) << "\n";
  o << "\n[vehicle.fvdm]\nc0 = " << num(c.fvdm.c0) << "\nv1 = " << num(c.fvdm.v1)
    << "\nv2 = " << num(c.fvdm.v2) << "\nc1 = " << num(c.fvdm.c1)
    << "\nlength = " << num(c.fvdm.length) << "\nc2 = " << num(c.fvdm.c2) << "\n";
  o << "\n[vehicle.accaeb]\ntime_headway = " << num(c.accaeb.time_headway)
    << "\nstandstill_gap = " << num(c.accaeb.standstill_gap) << "\nk_gap = " << num(c.accaeb.k_gap)
    << "\nk_rate = " << num(c.accaeb.k_rate) << "\nttc_brake = " << num(c.accaeb.ttc_brake)
    << "\n";
  o << "\n[vehicle.episode]\ndt = " << num(c.episode.dt) << "\nhorizon = " << num(c.episode.horizon)
    << "\nv_cav0 = " << num(c.episode.v_cav0) << "\nd_min = " << num(c.episode.d_min) << "\n";
  o << "\n[offline]\nepsilon = " << num(c.epsilon) << "\n";
  const AdaptiveConfig& a = c.adaptive;
  o << "\n[adaptive]\nn_initial = " << a.n_initial << "\nn_adaptive = " << a.n_adaptive
    << "\ngamma = " << num(a.gamma) << "\np_th = " << num(a.p_th) << "\nw_acq = " << num(a.w_acq)
    << "\nbeta_explore = " << num(a.beta_explore)
    << "\nclass_variance = " << quoted(class_variance_name(a.class_variance))
    << "\njitter = " << num(a.gp.jitter) << "\nrestarts = " << a.gp.restarts
    << "\nmax_iter = " << a.gp.max_iter << "\nearly_stop = " << (a.early_stop ? "true" : "false")
    << "\nearly_stop_tv = " << num(a.early_stop_tv)
    << "\nearly_stop_window = " << a.early_stop_window << "\n";
  const EvalConfig& e = c.compare.eval;
  o << "\n[eval]\nalpha = " << num(e.alpha) << "\ntarget_half_width = "
    << num(e.target_half_width) << "\nmax_tests = " << e.max_tests << "\nwarmup = " << e.warmup
    << "\n";
  o << "\n[compare]\nreps = " << c.compare.n_reps << "\ntargets = [";
  for (std::size_t i = 0; i < c.compare.targets.size(); ++i) {
    o << (i ? ", " : "") << num(c.compare.targets[i]);
  }
  o << "]\nempirical_crude = " << (c.compare.empirical_crude ? "true" : "false") << "\n";
  return o.str();
}

std::string config_hash(const RunConfig& cfg) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(dump_config(cfg));
  return s.str();
}

}  // namespace atslg
