#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <rcdens/grid.hpp>
#include <rcdens/likelihood.hpp>
#include <rcdens/results.hpp>
#include <rcdens/rng.hpp>

using rcdens::DensityEstimate;
using rcdens::expected_value;
using rcdens::Grid;
using rcdens::make_grid;
using rcdens::marginal_2d;
using rcdens::marginal_mass;
using rcdens::maxval;
using rcdens::modes;
using rcdens::Rng;

namespace {

DensityEstimate point_mass(const Grid& g, std::size_t cell) {
  std::vector<double> f(g.cell_count(), 0.0);
  f[cell] = 1.0 / g.cell_volume();
  return DensityEstimate{std::move(f), g};
}

}  // namespace

TEST_CASE("expected value of point masses and symmetric densities") {
  const Grid g = make_grid(4, 2, {{-2.0, 2.0}, {-2.0, 2.0}});
  const std::size_t cell = g.flat_index({2, 1, 0});
  const auto ev = expected_value(point_mass(g, cell));
  const rcdens::Point c = g.cell_center(cell);
  CHECK(ev[0] == Catch::Approx(c[0]).margin(1e-12));
  CHECK(ev[1] == Catch::Approx(c[1]).margin(1e-12));

  // uniform density on a symmetric grid
  const DensityEstimate uniform{std::vector<double>(16, 1.0 / g.box_volume()), g};
  const auto ev0 = expected_value(uniform);
  CHECK(std::fabs(ev0[0]) <= 1e-12);
  CHECK(std::fabs(ev0[1]) <= 1e-12);

  // the expectation always stays inside the box
  Rng rng(3);
  std::vector<double> f(16);
  double sum = 0.0;
  for (double& v : f) {
    v = rng.uniform01();
    sum += v;
  }
  for (double& v : f) v /= sum * g.cell_volume();
  const auto evr = expected_value(DensityEstimate{f, g});
  for (int a = 0; a < 2; ++a) {
    CHECK(evr[static_cast<std::size_t>(a)] >= g.range(a).lo);
    CHECK(evr[static_cast<std::size_t>(a)] <= g.range(a).hi);
  }
}

TEST_CASE("maxval finds the peak and breaks ties at the lowest flat index") {
  const Grid g = make_grid(3, 2, {{0.0, 3.0}, {0.0, 3.0}});
  const auto mp = maxval(point_mass(g, 5));
  CHECK(mp.value == Catch::Approx(1.0 / g.cell_volume()));
  const rcdens::Point c = g.cell_center(static_cast<std::size_t>(5));
  CHECK(mp.location[0] == c[0]);
  CHECK(mp.location[1] == c[1]);

  const DensityEstimate uniform{std::vector<double>(9, 1.0), g};
  const auto tie = maxval(uniform);
  const rcdens::Point first = g.cell_center(static_cast<std::size_t>(0));
  CHECK(tie.location[0] == first[0]);
  CHECK(tie.location[1] == first[1]);
}

TEST_CASE("modes returns strict local maxima in value order") {
  const Grid g = make_grid(5, 2, {{0.0, 5.0}, {0.0, 5.0}});

  SECTION("two separated point masses, both found") {
    std::vector<double> f(25, 0.0);
    f[g.flat_index({1, 1, 0})] = 2.0;
    f[g.flat_index({3, 3, 0})] = 3.0;
    const auto found = modes(DensityEstimate{f, g}, 5);
    REQUIRE(found.size() == 2);
    CHECK(found[0].value == 3.0);
    CHECK(found[1].value == 2.0);
    CHECK(found[0].location[0] == Catch::Approx(3.5));
    CHECK(found[1].location[0] == Catch::Approx(1.5));
  }

  SECTION("a strictly monotone ramp has only the top corner") {
    std::vector<double> f(25);
    for (std::size_t j = 0; j < 25; ++j) {
      const auto idx = g.multi_index(j);
      f[j] = idx[0] + 2.0 * idx[1];
    }
    const auto found = modes(DensityEstimate{f, g}, 10);
    REQUIRE(found.size() == 1);
    CHECK(found[0].location[0] == Catch::Approx(4.5));
    CHECK(found[0].location[1] == Catch::Approx(4.5));
  }

  SECTION("plateaus yield no mode") {
    const auto found = modes(DensityEstimate{std::vector<double>(25, 1.0), g}, 10);
    CHECK(found.empty());
  }

  SECTION("top truncates") {
    std::vector<double> f(25, 0.0);
    f[g.flat_index({0, 0, 0})] = 1.0;
    f[g.flat_index({2, 2, 0})] = 2.0;
    f[g.flat_index({4, 4, 0})] = 3.0;
    const auto found = modes(DensityEstimate{f, g}, 2);
    REQUIRE(found.size() == 2);
    CHECK(found[0].value == 3.0);
    CHECK(found[1].value == 2.0);
    CHECK_THROWS_AS(modes(DensityEstimate{f, g}, 0), std::invalid_argument);
  }
}

TEST_CASE("bivariate marginals of a separable 3-D density") {
  const Grid g = make_grid(4, 3, {{0.0, 1.0}, {0.0, 2.0}, {0.0, 4.0}});
  Rng rng(11);

  // normalized per-axis factors: sum_i g_i * h = 1
  auto factor = [&](int axis) {
    std::vector<double> v(4);
    double sum = 0.0;
    for (double& x : v) {
      x = rng.uniform(0.2, 1.0);
      sum += x;
    }
    for (double& x : v) x /= sum * g.step(axis);
    return v;
  };
  const std::vector<double> fa = factor(0), fb = factor(1), fc = factor(2);

  std::vector<double> f(g.cell_count());
  for (std::size_t j = 0; j < f.size(); ++j) {
    const auto idx = g.multi_index(j);
    f[j] = fa[static_cast<std::size_t>(idx[0])] * fb[static_cast<std::size_t>(idx[1])] *
           fc[static_cast<std::size_t>(idx[2])];
  }
  const DensityEstimate est{f, g};
  CHECK(est.mass() == Catch::Approx(1.0).margin(1e-12));

  const auto m01 = marginal_2d(est, 0, 1);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(m01.values[static_cast<std::size_t>(i * 4 + j)] ==
            Catch::Approx(fa[static_cast<std::size_t>(i)] * fb[static_cast<std::size_t>(j)])
                .margin(1e-12));
    }
  }
  CHECK(marginal_mass(m01) == Catch::Approx(1.0).margin(1e-6));

  // brute-force triple loop for the (1,2) marginal
  const auto m12 = marginal_2d(est, 1, 2);
  for (int j = 0; j < 4; ++j) {
    for (int l = 0; l < 4; ++l) {
      double want = 0.0;
      for (int i = 0; i < 4; ++i) want += est.at(i, j, l) * g.step(0);
      CHECK(m12.values[static_cast<std::size_t>(j * 4 + l)] == Catch::Approx(want).margin(1e-12));
    }
  }

  CHECK_THROWS_AS(marginal_2d(est, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(marginal_2d(est, 0, 3), std::invalid_argument);
}

TEST_CASE("dim-2 marginal returns the density itself with the identity notice") {
  const Grid g = make_grid(3, 2, {{-1.0, 1.0}, {0.0, 2.0}});
  std::vector<double> f(9);
  for (std::size_t j = 0; j < 9; ++j) f[j] = static_cast<double>(j + 1);
  double sum = 0.0;
  for (double v : f) sum += v;
  for (double& v : f) v /= sum * g.cell_volume();

  const auto m = marginal_2d(DensityEstimate{f, g}, 0, 1);
  CHECK(m.identity);
  for (std::size_t j = 0; j < 9; ++j) CHECK(m.values[j] == f[j]);
  CHECK(marginal_mass(m) == Catch::Approx(1.0).margin(1e-6));
}
