#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace atslg {

/// Bounds and steps of the (range, range-rate) grid. Range uses half-open
/// bins (r_min, r_max] whose centers are the right endpoints; range rate uses
/// inclusive nodes rdot_min, rdot_min + step, ..., rdot_max.
struct GridConfig {
  double r_min = 0.0;
  double r_max = 90.0;
  double r_step = 2.0;
  double rdot_min = -20.0;
  double rdot_max = 10.0;
  double rdot_step = 0.4;

  bool operator==(const GridConfig&) const = default;
};

/// A cell center x = (R, Rdot).
struct Scenario {
  double range = 0.0;       // m
  double range_rate = 0.0;  // m/s, v_lead - v_self
};

/// Grid position. `flat = i_r * n_rdot + i_rdot` (row-major, fixed).
struct ScenarioIndex {
  std::size_t i_r = 0;
  std::size_t i_rdot = 0;
  std::size_t flat = 0;

  bool operator==(const ScenarioIndex&) const = default;
};

class ScenarioSpace {
 public:
  /// Throws ConfigError naming the offending field.
  explicit ScenarioSpace(const GridConfig& config = {});

  [[nodiscard]] const GridConfig& config() const noexcept { return config_; }
  [[nodiscard]] std::size_t n_r() const noexcept { return n_r_; }
  [[nodiscard]] std::size_t n_rdot() const noexcept { return n_rdot_; }
  [[nodiscard]] std::size_t n_total() const noexcept { return n_r_ * n_rdot_; }
  /// Library membership threshold 1 / n_total.
  [[nodiscard]] double criticality_threshold() const noexcept {
    return 1.0 / static_cast<double>(n_total());
  }

  [[nodiscard]] ScenarioIndex index(std::size_t flat) const;
  [[nodiscard]] ScenarioIndex index(std::size_t i_r, std::size_t i_rdot) const;
  [[nodiscard]] Scenario scenario(std::size_t flat) const;
  [[nodiscard]] Scenario scenario(const ScenarioIndex& idx) const { return scenario(idx.flat); }

  /// True when (R, Rdot) falls inside the grid: r_min < R <= r_max and
  /// rdot_min <= Rdot <= rdot_max.
  [[nodiscard]] bool contains(double range, double range_rate) const noexcept;

  /// Bins a point into its cell. Range boundaries go to the lower bin;
  /// range-rate ties go to the lower node. Throws RangeError when outside.
  [[nodiscard]] ScenarioIndex locate(double range, double range_rate) const;
  [[nodiscard]] ScenarioIndex locate(const Scenario& s) const {
    return locate(s.range, s.range_rate);
  }

  bool operator==(const ScenarioSpace& other) const noexcept {
    return config_ == other.config_;
  }

 private:
  GridConfig config_;
  std::size_t n_r_ = 0;
  std::size_t n_rdot_ = 0;
};

/// Real-valued function on the grid, stored in flat order.
class ScenarioField {
 public:
  ScenarioField() = default;
  explicit ScenarioField(const ScenarioSpace& space, double fill = 0.0);
  ScenarioField(const ScenarioSpace& space, std::vector<double> values);

  [[nodiscard]] const ScenarioSpace& space() const noexcept { return space_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t flat) const { return values_[flat]; }
  double& operator[](std::size_t flat) { return values_[flat]; }

  /// Compensated sum of all values.
  [[nodiscard]] double sum() const noexcept;
  /// Scales to unit sum. Throws NumericalError if the sum is not positive or
  /// any value is negative.
  void normalize();
  /// Non-negative and sums to one within `tol`.
  [[nodiscard]] bool is_distribution(double tol = 1e-12) const noexcept;

 private:
  ScenarioSpace space_;
  std::vector<double> values_;
};

/// Throws ShapeError when two fields live on different grids.
void require_same_space(const ScenarioField& a, const ScenarioField& b, const char* what);

/// Kahan-Babuska sum.
double compensated_sum(std::span<const double> xs) noexcept;

// Field serialization.
//  CSV: header `i_r,i_rdot,R,Rdot,value`, one row per cell in flat order.
//  Binary: six little-endian float64 grid parameters (r_min, r_max, r_step,
//  rdot_min, rdot_max, rdot_step) followed by n_total float64 values.
void write_field_csv(std::ostream& out, const ScenarioField& field);
void write_field_binary(std::ostream& out, const ScenarioField& field);
ScenarioField read_field_binary(std::istream& in);

void save_field_binary(const std::string& path, const ScenarioField& field);
ScenarioField load_field_binary(const std::string& path);
void save_field_csv(const std::string& path, const ScenarioField& field);

}  // namespace atslg
