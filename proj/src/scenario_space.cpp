#include "atslg/scenario_space.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "atslg/error.hpp"

namespace atslg {
namespace {

// Tolerance (in units of one step) absorbing floating error when snapping a
// cell-center coordinate back to its index.
constexpr double kSnapTol = 1e-9;

void require(bool ok, const char* field, const std::string& why) {
  if (!ok) throw ConfigError(std::string("grid.") + field + ": " + why);
}

void write_f64(std::ostream& out, double v) {
  static_assert(std::endian::native == std::endian::little,
                "binary field format assumes a little-endian host");
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

double read_f64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  if (in.gcount() != 8) throw DataError("field binary: truncated input");
  double v;
  std::memcpy(&v, buf, 8);
  return v;
}

}  // namespace

ScenarioSpace::ScenarioSpace(const GridConfig& c) : config_(c) {
  require(std::isfinite(c.r_min) && std::isfinite(c.r_max), "r_max", "bounds must be finite");
  require(std::isfinite(c.rdot_min) && std::isfinite(c.rdot_max), "rdot_max",
          "bounds must be finite");
  require(c.r_step > 0.0, "r_step", "must be positive");
  require(c.rdot_step > 0.0, "rdot_step", "must be positive");
  require(c.r_max > c.r_min, "r_max", "must exceed r_min");
  require(c.rdot_max >= c.rdot_min, "rdot_max", "must not be below rdot_min");
  const double nr = std::round((c.r_max - c.r_min) / c.r_step);
  const double nrd = std::round((c.rdot_max - c.rdot_min) / c.rdot_step) + 1.0;
  require(nr >= 1.0, "r_step", "larger than the range interval");
  require(nr * nrd <= 1e8, "r_step", "grid too large");
  n_r_ = static_cast<std::size_t>(nr);
  n_rdot_ = static_cast<std::size_t>(nrd);
}

ScenarioIndex ScenarioSpace::index(std::size_t flat) const {
  if (flat >= n_total()) {
    throw RangeError("flat index " + std::to_string(flat) + " out of range [0, " +
                     std::to_string(n_total()) + ")");
  }
  return {flat / n_rdot_, flat % n_rdot_, flat};
}

ScenarioIndex ScenarioSpace::index(std::size_t i_r, std::size_t i_rdot) const {
  if (i_r >= n_r_ || i_rdot >= n_rdot_) {
    throw RangeError("grid index (" + std::to_string(i_r) + ", " + std::to_string(i_rdot) +
                     ") out of range");
  }
  return {i_r, i_rdot, i_r * n_rdot_ + i_rdot};
}

Scenario ScenarioSpace::scenario(std::size_t flat) const {
  const ScenarioIndex idx = index(flat);
  return {config_.r_min + static_cast<double>(idx.i_r + 1) * config_.r_step,
          config_.rdot_min + static_cast<double>(idx.i_rdot) * config_.rdot_step};
}

bool ScenarioSpace::contains(double range, double range_rate) const noexcept {
  if (!std::isfinite(range) || !std::isfinite(range_rate)) return false;
  const double r_hi = config_.r_min + static_cast<double>(n_r_) * config_.r_step;
  const double rd_hi = config_.rdot_min + static_cast<double>(n_rdot_ - 1) * config_.rdot_step;
  const double r_tol = kSnapTol * config_.r_step;
  const double rd_tol = kSnapTol * config_.rdot_step;
  return range > config_.r_min && range <= r_hi + r_tol && range_rate >= config_.rdot_min - rd_tol &&
         range_rate <= rd_hi + rd_tol;
}

ScenarioIndex ScenarioSpace::locate(double range, double range_rate) const {
  if (!contains(range, range_rate)) {
    std::ostringstream os;
    os << "scenario (" << range << ", " << range_rate << ") outside grid";
    throw RangeError(os.str());
  }
  const double qr = (range - config_.r_min) / config_.r_step;
  const double qrd = (range_rate - config_.rdot_min) / config_.rdot_step;
  auto i_r = static_cast<long long>(std::ceil(qr - kSnapTol)) - 1;
  auto i_rd = static_cast<long long>(std::ceil(qrd - 0.5 - kSnapTol));
  i_r = std::clamp<long long>(i_r, 0, static_cast<long long>(n_r_) - 1);
  i_rd = std::clamp<long long>(i_rd, 0, static_cast<long long>(n_rdot_) - 1);
  return index(static_cast<std::size_t>(i_r), static_cast<std::size_t>(i_rd));
}

ScenarioField::ScenarioField(const ScenarioSpace& space, double fill)
    : space_(space), values_(space.n_total(), fill) {}

ScenarioField::ScenarioField(const ScenarioSpace& space, std::vector<double> values)
    : space_(space), values_(std::move(values)) {
  if (values_.size() != space_.n_total()) {
    throw ShapeError("field has " + std::to_string(values_.size()) + " values, grid has " +
                     std::to_string(space_.n_total()) + " cells");
  }
}

double compensated_sum(std::span<const double> xs) noexcept {
  double sum = 0.0;
  double c = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      c += (sum - t) + x;
    } else {
      c += (x - t) + sum;
    }
    sum = t;
  }
  return sum + c;
}

double ScenarioField::sum() const noexcept { return compensated_sum(values_); }

void ScenarioField::normalize() {
  for (double v : values_) {
    if (!(v >= 0.0)) throw NumericalError("normalize: negative or NaN value in distribution");
  }
  const double s = sum();
  if (!(s > 0.0)) throw NumericalError("normalize: field sums to zero");
  for (double& v : values_) v /= s;
  // One corrective pass: division rounding can leave |sum - 1| ~ n * eps.
  const double s2 = sum();
  if (s2 != 1.0) {
    for (double& v : values_) v /= s2;
  }
}

bool ScenarioField::is_distribution(double tol) const noexcept {
  for (double v : values_) {
    if (!(v >= 0.0)) return false;
  }
  return std::abs(sum() - 1.0) < tol;
}

void require_same_space(const ScenarioField& a, const ScenarioField& b, const char* what) {
  if (!(a.space() == b.space()) || a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": fields live on different grids");
  }
}

void write_field_csv(std::ostream& out, const ScenarioField& field) {
  const ScenarioSpace& space = field.space();
  out << "i_r,i_rdot,R,Rdot,value\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < field.size(); ++k) {
    const ScenarioIndex idx = space.index(k);
    const Scenario s = space.scenario(k);
    out << idx.i_r << ',' << idx.i_rdot << ',' << s.range << ',' << s.range_rate << ','
        << field[k] << '\n';
  }
}

void write_field_binary(std::ostream& out, const ScenarioField& field) {
  const GridConfig& g = field.space().config();
  for (double v : {g.r_min, g.r_max, g.r_step, g.rdot_min, g.rdot_max, g.rdot_step}) {
    write_f64(out, v);
  }
  for (double v : field.values()) write_f64(out, v);
}

ScenarioField read_field_binary(std::istream& in) {
  GridConfig g;
  g.r_min = read_f64(in);
  g.r_max = read_f64(in);
  g.r_step = read_f64(in);
  g.rdot_min = read_f64(in);
  g.rdot_max = read_f64(in);
  g.rdot_step = read_f64(in);
  const ScenarioSpace space(g);
  std::vector<double> values(space.n_total());
  for (double& v : values) v = read_f64(in);
  return ScenarioField(space, std::move(values));
}

void save_field_binary(const std::string& path, const ScenarioField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_field_binary(out, field);
}

ScenarioField load_field_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return read_field_binary(in);
}

void save_field_csv(const std::string& path, const ScenarioField& field) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_field_csv(out, field);
}

}  // namespace atslg
