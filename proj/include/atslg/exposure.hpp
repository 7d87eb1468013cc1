#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "atslg/scenario_space.hpp"

namespace atslg {

struct CutInEvent {
  double range = 0.0;       // m
  double range_rate = 0.0;  // m/s
};

/// Naturalistic exposure P(x) plus ingestion bookkeeping.
struct ExposureModel {
  ScenarioField p_x;
  std::size_t n_events_used = 0;
  std::size_t n_events_rejected = 0;
};

/// One axis-aligned Gaussian component of the synthetic cut-in mixture.
struct MixtureComponent {
  double weight = 0.0;
  double mean_range = 0.0;
  double mean_range_rate = 0.0;
  double sd_range = 1.0;
  double sd_range_rate = 1.0;
};

/// Two-component mixture standing in for recorded naturalistic cut-ins:
/// a broad benign component (moderate range, lead slightly faster) and a
/// tight cluster of aggressive short-gap cut-ins that close on the follower.
struct SyntheticNddConfig {
  std::array<MixtureComponent, 2> components{{
      {0.992, 35.0, 3.0, 12.0, 2.0},
      {0.008, 2.0, -7.0, 0.7, 0.3},
  }};
};

/// Histograms events into cells. Throws EmptyDataError with no in-bounds event.
ExposureModel exposure_from_events(const ScenarioSpace& space, std::span<const CutInEvent> events);

/// Reads `range,range_rate` CSV. Malformed rows raise ParseError with the
/// 1-based line number; out-of-grid events are counted as rejected.
ExposureModel ingest_events(const ScenarioSpace& space, std::istream& csv);

/// Draws `n_events` in-bounds events from the truncated mixture.
/// Deterministic for a given seed.
std::vector<CutInEvent> generate_synthetic_ndd(const ScenarioSpace& space, std::size_t n_events,
                                               std::uint64_t seed,
                                               const SyntheticNddConfig& config = {});

void write_events_csv(std::ostream& out, std::span<const CutInEvent> events);

}  // namespace atslg
