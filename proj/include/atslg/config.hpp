#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "atslg/adaptive.hpp"
#include "atslg/evaluator.hpp"
#include "atslg/exposure.hpp"
#include "atslg/scenario_space.hpp"
#include "atslg/vehicle_sim.hpp"

namespace atslg {

/// Values of the small TOML subset accepted in run files: integers, floats,
/// quoted strings, booleans and flat arrays of numbers.
using TomlValue = std::variant<double, std::int64_t, std::string, bool, std::vector<double>>;

/// Flat view keyed by dotted path ("adaptive.p_th"). Tracks which keys were
/// read so that leftovers can be rejected as unknown.
class TomlTable {
 public:
  void set(const std::string& key, TomlValue value, int line);
  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

  void read(const std::string& key, double& out);
  void read(const std::string& key, std::size_t& out);
  void read(const std::string& key, int& out);
  void read(const std::string& key, bool& out);
  void read(const std::string& key, std::string& out);
  void read(const std::string& key, std::vector<double>& out);

  /// Throws ConfigError listing every key that was never read.
  void reject_unread() const;

 private:
  const TomlValue& fetch(const std::string& key);
  std::map<std::string, TomlValue> values_;
  std::map<std::string, int> lines_;
  std::set<std::string> used_;
};

/// Parses `[section]` / `[a.b]` headers, `key = value` lines and `#` comments.
/// Throws ConfigError with the line number on malformed input.
TomlTable parse_toml(std::istream& in);

struct ExposureSection {
  std::string source = "synth";  // "synth" or "csv"
  std::string csv;               // events file when source = "csv"
  std::size_t n_events = 414770;
  SyntheticNddConfig mixture{};
};

struct RunConfig {
  std::uint64_t seed = 20190612;
  GridConfig grid{};
  ExposureSection exposure{};
  FvdmParams fvdm{};
  AccAebParams accaeb{};
  EpisodeConfig episode{};
  double epsilon = 0.1;
  AdaptiveConfig adaptive{};
  CompareConfig compare{};
};

/// Copies the values that several modules share (master seed, epsilon,
/// vehicle limits, the adaptive test charge) into the sub-configs.
void sync_derived(RunConfig& cfg);

/// Validates every section; throws ConfigError naming the field.
void validate(const RunConfig& cfg);

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// Canonical TOML rendering; parse_config(dump) reproduces the config.
std::string dump_config(const RunConfig& cfg);
/// Hex FNV-1a of the canonical rendering.
std::string config_hash(const RunConfig& cfg);

}  // namespace atslg
