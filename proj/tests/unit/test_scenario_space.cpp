#include <gtest/gtest.h>

#include <sstream>

#include "atslg/error.hpp"
#include "atslg/scenario_space.hpp"

using namespace atslg;

TEST(ScenarioSpace, DefaultGridHas3420Cells) {
  const ScenarioSpace s;
  EXPECT_EQ(s.n_r(), 45u);
  EXPECT_EQ(s.n_rdot(), 76u);
  EXPECT_EQ(s.n_total(), 3420u);
  EXPECT_DOUBLE_EQ(s.criticality_threshold(), 1.0 / 3420.0);
}

TEST(ScenarioSpace, SmallGrids) {
  EXPECT_EQ(ScenarioSpace(GridConfig{0, 2, 2, 0, 0, 0.4}).n_total(), 1u);
  EXPECT_EQ(ScenarioSpace(GridConfig{0, 20, 2, -2, 2, 0.4}).n_total(), 110u);
}

TEST(ScenarioSpace, CornerCells) {
  const ScenarioSpace s;
  const Scenario first = s.scenario(0);
  EXPECT_DOUBLE_EQ(first.range, 2.0);
  EXPECT_DOUBLE_EQ(first.range_rate, -20.0);
  const Scenario last = s.scenario(s.n_total() - 1);
  EXPECT_DOUBLE_EQ(last.range, 90.0);
  EXPECT_NEAR(last.range_rate, 10.0, 1e-12);
}

TEST(ScenarioSpace, FlatIndexRoundTrips) {
  const ScenarioSpace s;
  for (std::size_t k = 0; k < s.n_total(); ++k) {
    ASSERT_EQ(s.locate(s.scenario(k)).flat, k);
    const ScenarioIndex idx = s.index(k);
    ASSERT_EQ(idx.i_r * s.n_rdot() + idx.i_rdot, k);
  }
}

TEST(ScenarioSpace, BoundaryTies) {
  const ScenarioSpace s;
  // R = 4 is the right edge of the (2, 4] bin.
  EXPECT_EQ(s.locate(4.0, 0.0).i_r, 1u);
  EXPECT_EQ(s.locate(4.0001, 0.0).i_r, 2u);
  // Halfway between nodes -20.0 and -19.6 goes to the lower node.
  EXPECT_EQ(s.locate(10.0, -19.8).i_rdot, 0u);
  EXPECT_EQ(s.locate(10.0, -19.79).i_rdot, 1u);
}

TEST(ScenarioSpace, OutOfRangeThrows) {
  const ScenarioSpace s;
  EXPECT_THROW((void)s.locate(0.0, 0.0), RangeError);
  EXPECT_THROW((void)s.locate(91.0, 0.0), RangeError);
  EXPECT_THROW((void)s.locate(10.0, 10.5), RangeError);
  EXPECT_THROW((void)s.scenario(3420), RangeError);
  EXPECT_FALSE(s.contains(0.0, 0.0));
  EXPECT_TRUE(s.contains(90.0, 10.0));
}

TEST(ScenarioSpace, InvalidConfigThrows) {
  EXPECT_THROW(ScenarioSpace(GridConfig{0, 90, 0, -20, 10, 0.4}), ConfigError);
  EXPECT_THROW(ScenarioSpace(GridConfig{10, 5, 2, -20, 10, 0.4}), ConfigError);
  EXPECT_THROW(ScenarioSpace(GridConfig{0, 90, 2, -20, 10, -0.4}), ConfigError);
}

TEST(ScenarioField, NormalizeAndSum) {
  const ScenarioSpace s(GridConfig{0, 20, 2, -2, 2, 0.4});
  ScenarioField f(s);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = static_cast<double>(k % 7) + 0.1;
  f.normalize();
  EXPECT_NEAR(f.sum(), 1.0, 1e-12);
  EXPECT_TRUE(f.is_distribution());

  ScenarioField zero(s);
  EXPECT_THROW(zero.normalize(), NumericalError);
  ScenarioField neg(s, 1.0);
  neg[3] = -0.5;
  EXPECT_THROW(neg.normalize(), NumericalError);
}

TEST(ScenarioField, ShapeMismatch) {
  const ScenarioSpace a;
  const ScenarioSpace b(GridConfig{0, 20, 2, -2, 2, 0.4});
  EXPECT_THROW(ScenarioField(b, std::vector<double>(5, 0.0)), ShapeError);
  EXPECT_THROW(require_same_space(ScenarioField(a), ScenarioField(b), "test"), ShapeError);
}

TEST(ScenarioField, CompensatedSumIsExact) {
  std::vector<double> xs{1e16, 1.0, -1e16, 1.0};
  EXPECT_DOUBLE_EQ(compensated_sum(xs), 2.0);
}

TEST(FieldIo, BinaryRoundTripIsBitExact) {
  const ScenarioSpace s;
  ScenarioField f(s);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = 1.0 / static_cast<double>(k + 3);
  std::stringstream buf;
  write_field_binary(buf, f);
  EXPECT_EQ(buf.str().size(), 8u * (6 + s.n_total()));
  const ScenarioField g = read_field_binary(buf);
  EXPECT_TRUE(g.space() == s);
  for (std::size_t k = 0; k < f.size(); ++k) ASSERT_EQ(f[k], g[k]);
}

TEST(FieldIo, TruncatedBinaryThrows) {
  const ScenarioSpace s;
  std::stringstream buf;
  write_field_binary(buf, ScenarioField(s, 0.5));
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 8);
  std::stringstream cut(bytes);
  EXPECT_THROW((void)read_field_binary(cut), DataError);
}

TEST(FieldIo, CsvHeaderAndRows) {
  const ScenarioSpace s(GridConfig{0, 4, 2, 0, 0.4, 0.4});
  ScenarioField f(s, 0.25);
  std::ostringstream out;
  write_field_csv(out, f);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "i_r,i_rdot,R,Rdot,value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}
