#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include <rcdens/grid.hpp>
#include <rcdens/operator.hpp>
#include <rcdens/rng.hpp>

#include "oracles.hpp"

using rcdens::build_operator;
using rcdens::Grid;
using rcdens::make_grid;
using rcdens::OperatorMatrix;
using rcdens::Rng;
using rcdens::row_2d;
using rcdens::SampleMatrix;
using rcdens::SparseEntry;

namespace {

std::map<std::size_t, double> as_map(const std::vector<SparseEntry>& row) {
  std::map<std::size_t, double> m;
  for (const auto& [c, v] : row) m[c] = v;
  return m;
}

}  // namespace

TEST_CASE("axis-aligned lines split into exact unit segments") {
  const Grid g = make_grid(2, 2, {{-1.0, 1.0}, {-1.0, 1.0}});

  // b0 = 0.5: one unit segment in each of the two cells with b0 in [0,1]
  const auto row = as_map(row_2d({1.0, 0.0}, 0.5, g));
  REQUIRE(row.size() == 2);
  CHECK(row.at(g.flat_index({1, 0, 0})) == Catch::Approx(1.0).margin(1e-12));
  CHECK(row.at(g.flat_index({1, 1, 0})) == Catch::Approx(1.0).margin(1e-12));

  // b1 = 0.25 on a k=4 grid: four segments of length 0.5 in the b1-row [0, 0.5)
  const Grid g4 = make_grid(4, 2, {{-1.0, 1.0}, {-1.0, 1.0}});
  const auto row4 = as_map(row_2d({0.0, 1.0}, 0.25, g4));
  REQUIRE(row4.size() == 4);
  for (int i0 = 0; i0 < 4; ++i0) {
    CHECK(row4.at(g4.flat_index({i0, 2, 0})) == Catch::Approx(0.5).margin(1e-12));
  }
}

TEST_CASE("diagonal through cell corners yields sqrt(2) segments and nothing else") {
  const Grid g = make_grid(2, 2, {{-1.0, 1.0}, {-1.0, 1.0}});
  const auto row = as_map(row_2d({1.0, 1.0}, 0.0, g));
  REQUIRE(row.size() == 2);
  CHECK(row.at(g.flat_index({0, 1, 0})) == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
  CHECK(row.at(g.flat_index({1, 0, 0})) == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
}

TEST_CASE("degenerate coefficient vector is rejected") {
  const Grid g = make_grid(2, 2, {{-1.0, 1.0}, {-1.0, 1.0}});
  CHECK_THROWS_AS(row_2d({0.0, 0.0}, 0.5, g), std::invalid_argument);
  CHECK_THROWS_AS(row_2d({1.0, 0.0}, 0.5, make_grid(2, 3)), std::invalid_argument);
}

TEST_CASE("row sums equal the independently clipped chord length") {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const double lo0 = rng.uniform(-4.0, 0.0), hi0 = lo0 + rng.uniform(0.5, 6.0);
    const double lo1 = rng.uniform(-4.0, 0.0), hi1 = lo1 + rng.uniform(0.5, 6.0);
    const int k = 2 + static_cast<int>(rng.bounded(30));
    const Grid g = make_grid(k, 2, {{lo0, hi0}, {lo1, hi1}});

    const std::array<double, 2> a{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
    if (std::fabs(a[0]) + std::fabs(a[1]) < 1e-3) continue;
    const double y = rng.uniform(-6.0, 6.0);

    const auto row = row_2d(a, y, g);
    const double cell_diag = std::hypot(g.step(0), g.step(1));
    double sum = 0.0;
    for (const auto& [c, v] : row) {
      CHECK(v > 0.0);
      CHECK(v <= cell_diag + 1e-12);  // no segment can exceed the cell diagonal
      sum += v;
    }
    const double chord = oracle::chord_length(a, y, g);
    CHECK(std::fabs(sum - chord) <= 1e-9);
    CHECK(row.size() <= static_cast<std::size_t>(3 * k));
  }
}

TEST_CASE("build_operator dispatches, validates, and counts empty rows") {
  const Grid g = make_grid(2, 2, {{-1.0, 1.0}, {-1.0, 1.0}});

  // two in-box lines and one that misses the box entirely
  const SampleMatrix sample(3, 3,
                            {1.0, 0.0, 0.5,    //
                             1.0, 1.0, 0.0,    //
                             1.0, 0.0, 9.0});  // b0 = 9 misses
  const OperatorMatrix op = build_operator(sample, g);
  CHECK(op.n_rows() == 3);
  CHECK(op.n_cols() == 4);
  CHECK(op.zero_row_count() == 1);
  CHECK(op.row_sum(0) == Catch::Approx(2.0));
  CHECK(op.row_vals(2).empty());

  const SampleMatrix bad_width(1, 4, {1.0, 0.0, 0.0, 0.5});
  CHECK_THROWS_AS(build_operator(bad_width, g), std::invalid_argument);
  const SampleMatrix bad_value(1, 3, {1.0, std::nan(""), 0.5});
  CHECK_THROWS_AS(build_operator(bad_value, g), std::invalid_argument);
}

TEST_CASE("apply matches a dense multiply") {
  const Grid g = make_grid(2, 2, {{-1.0, 1.0}, {-1.0, 1.0}});
  Rng rng(3);
  std::vector<double> rows;
  for (int i = 0; i < 5; ++i) {
    rows.push_back(1.0);
    rows.push_back(rng.uniform(-2.0, 2.0));
    rows.push_back(rng.uniform(-1.5, 1.5));
  }
  const OperatorMatrix op = build_operator(SampleMatrix(5, 3, rows), g);

  // dense copy
  std::vector<double> dense(op.n_rows() * op.n_cols(), 0.0);
  for (std::size_t i = 0; i < op.n_rows(); ++i) {
    const auto cols = op.row_cols(i);
    const auto vals = op.row_vals(i);
    for (std::size_t p = 0; p < cols.size(); ++p) dense[i * op.n_cols() + cols[p]] = vals[p];
  }

  std::vector<double> f(op.n_cols());
  for (double& v : f) v = rng.uniform(0.0, 1.0);
  const std::vector<double> got = op.apply(f);
  for (std::size_t i = 0; i < op.n_rows(); ++i) {
    double want = 0.0;
    for (std::size_t j = 0; j < op.n_cols(); ++j) want += dense[i * op.n_cols() + j] * f[j];
    CHECK(got[i] == Catch::Approx(want).margin(1e-12));
  }

  const std::vector<double> zero(op.n_cols(), 0.0);
  for (double v : op.apply(zero)) CHECK(v == 0.0);

  CHECK_THROWS_AS(op.apply(std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("translating Y and the intercept range together leaves the operator unchanged") {
  Rng rng(17);
  std::vector<double> rows;
  const std::size_t n = 40;
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back(1.0);
    rows.push_back(rng.uniform(-2.0, 2.0));
    rows.push_back(rng.uniform(-1.0, 1.0));
  }
  const SampleMatrix sample(n, 3, rows);
  const Grid g = make_grid(8, 2, {{-1.5, 1.5}, {-1.5, 1.5}});
  const OperatorMatrix base = build_operator(sample, g);

  const double c = 0.774;
  const OperatorMatrix moved = build_operator(sample.with_shifted_y(c), g.translated(0, c));

  REQUIRE(moved.nnz() == base.nnz());
  for (std::size_t i = 0; i < n; ++i) {
    const auto c0 = base.row_cols(i);
    const auto c1 = moved.row_cols(i);
    REQUIRE(c0.size() == c1.size());
    for (std::size_t p = 0; p < c0.size(); ++p) {
      CHECK(c0[p] == c1[p]);
      CHECK(base.row_vals(i)[p] == Catch::Approx(moved.row_vals(i)[p]).margin(1e-9));
    }
  }
}

TEST_CASE("operator cache round-trips through the binary format") {
  Rng rng(5);
  std::vector<double> rows;
  for (int i = 0; i < 12; ++i) {
    rows.push_back(1.0);
    rows.push_back(rng.uniform(-2.0, 2.0));
    rows.push_back(rng.uniform(-1.0, 1.0));
  }
  const SampleMatrix sample(12, 3, rows);
  const Grid g = make_grid(6, 2, {{-2.0, 2.0}, {-1.0, 3.0}});
  const OperatorMatrix op = build_operator(sample, g);

  const std::string path = "operator_cache_test.bin";
  op.dump(path);
  const OperatorMatrix back = OperatorMatrix::load(path, sample);
  std::remove(path.c_str());

  CHECK(back.grid() == g);
  REQUIRE(back.nnz() == op.nnz());
  for (std::size_t i = 0; i < op.n_rows(); ++i) {
    const auto v0 = op.row_vals(i);
    const auto v1 = back.row_vals(i);
    REQUIRE(v0.size() == v1.size());
    for (std::size_t p = 0; p < v0.size(); ++p) {
      CHECK(v0[p] == v1[p]);
      CHECK(op.row_cols(i)[p] == back.row_cols(i)[p]);
    }
  }

  const SampleMatrix other(3, 3, {1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
  op.dump(path);
  CHECK_THROWS_AS(OperatorMatrix::load(path, other), std::runtime_error);
  std::remove(path.c_str());
}
