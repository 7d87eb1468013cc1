#include "atslg/exposure.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "atslg/error.hpp"
#include "atslg/rng.hpp"

namespace atslg {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

ExposureModel exposure_from_events(const ScenarioSpace& space, std::span<const CutInEvent> events) {
  std::vector<double> counts(space.n_total(), 0.0);
  ExposureModel model;
  for (const CutInEvent& e : events) {
    if (!space.contains(e.range, e.range_rate)) {
      ++model.n_events_rejected;
      continue;
    }
    counts[space.locate(e.range, e.range_rate).flat] += 1.0;
    ++model.n_events_used;
  }
  if (model.n_events_used == 0) {
    throw EmptyDataError("no cut-in event falls inside the scenario grid (" +
                         std::to_string(model.n_events_rejected) + " rejected)");
  }
  model.p_x = ScenarioField(space, std::move(counts));
  model.p_x.normalize();
  return model;
}

ExposureModel ingest_events(const ScenarioSpace& space, std::istream& csv) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<CutInEvent> events;
  while (std::getline(csv, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    if (!have_header) {
      std::string compact;
      for (char c : row) {
        if (c != ' ' && c != '\t') compact.push_back(c);
      }
      if (compact != "range,range_rate") {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected header `range,range_rate`");
      }
      have_header = true;
      continue;
    }
    const auto comma = row.find(',');
    CutInEvent e;
    if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos ||
        !parse_double(row.substr(0, comma), e.range) ||
        !parse_double(row.substr(comma + 1), e.range_rate)) {
      throw ParseError("line " + std::to_string(line_no) + ": malformed row `" +
                       std::string(row) + "`");
    }
    events.push_back(e);
  }
  if (!have_header) throw ParseError("line 1: missing header `range,range_rate`");
  return exposure_from_events(space, events);
}

std::vector<CutInEvent> generate_synthetic_ndd(const ScenarioSpace& space, std::size_t n_events,
                                               std::uint64_t seed,
                                               const SyntheticNddConfig& config) {
  if (n_events == 0) throw ConfigError("exposure.n_events: must be at least 1");
  const auto& [a, b] = config.components;
  const double total = a.weight + b.weight;
  if (!(a.weight >= 0.0 && b.weight >= 0.0 && total > 0.0)) {
    throw ConfigError("exposure: mixture weights must be non-negative with positive sum");
  }
  for (const MixtureComponent& c : config.components) {
    if (!(c.sd_range > 0.0 && c.sd_range_rate > 0.0)) {
      throw ConfigError("exposure: mixture standard deviations must be positive");
    }
  }
  const double p_first = a.weight / total;

  Rng rng(seed);
  std::vector<CutInEvent> events;
  events.reserve(n_events);
  // A box far outside the mixture support would loop forever; cap attempts.
  const std::size_t max_attempts = 1000 * n_events + 1'000'000;
  std::size_t attempts = 0;
  while (events.size() < n_events) {
    if (++attempts > max_attempts) {
      throw ConfigError("exposure: mixture places almost no mass inside the grid");
    }
    const MixtureComponent& c = rng.uniform() < p_first ? a : b;
    const double r = c.mean_range + c.sd_range * rng.normal();
    const double rd = c.mean_range_rate + c.sd_range_rate * rng.normal();
    if (space.contains(r, rd)) events.push_back({r, rd});
  }
  return events;
}

void write_events_csv(std::ostream& out, std::span<const CutInEvent> events) {
  out << "range,range_rate\n" << std::setprecision(17);
  for (const CutInEvent& e : events) out << e.range << ',' << e.range_rate << '\n';
}

}  // namespace atslg
