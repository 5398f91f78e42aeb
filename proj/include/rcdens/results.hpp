#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "likelihood.hpp"
#include "solver.hpp"

namespace rcdens {

// E[beta_a] = sum_j center(j)_a * f_j * dv
inline std::array<double, kMaxDim> expected_value(const DensityEstimate& f) {
  std::array<double, kMaxDim> ev{};
  const double dv = f.grid.cell_volume();
  for (std::size_t j = 0; j < f.values.size(); ++j) {
    const Point c = f.grid.cell_center(j);
    for (int a = 0; a < f.grid.dim(); ++a) {
      ev[static_cast<std::size_t>(a)] += c[static_cast<std::size_t>(a)] * f.values[j] * dv;
    }
  }
  return ev;
}

struct ModePoint {
  double value = 0.0;
  Point location{};
};

// global maximum; ties resolved toward the lowest flat index
inline ModePoint maxval(const DensityEstimate& f) {
  if (f.values.empty()) throw std::invalid_argument("maxval: empty density");
  std::size_t best = 0;
  for (std::size_t j = 1; j < f.values.size(); ++j) {
    if (f.values[j] > f.values[best]) best = j;
  }
  return ModePoint{f.values[best], f.grid.cell_center(best)};
}

// Cells strictly greater than all of their axis neighbors, best first.
// Plateaus produce no mode.
inline std::vector<ModePoint> modes(const DensityEstimate& f, int top) {
  if (top < 1) throw std::invalid_argument("modes: top must be at least 1");
  const Grid& g = f.grid;
  const int k = g.points_per_axis();
  std::vector<std::pair<double, std::size_t>> found;
  for (std::size_t j = 0; j < f.values.size(); ++j) {
    const MultiIndex idx = g.multi_index(j);
    bool is_mode = true;
    for (int a = 0; a < g.dim() && is_mode; ++a) {
      for (int d = -1; d <= 1; d += 2) {
        MultiIndex nb = idx;
        nb[static_cast<std::size_t>(a)] += d;
        if (nb[static_cast<std::size_t>(a)] < 0 || nb[static_cast<std::size_t>(a)] >= k) continue;
        if (!(f.values[j] > f.values[g.flat_index(nb)])) {
          is_mode = false;
          break;
        }
      }
    }
    if (is_mode) found.emplace_back(f.values[j], j);
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  if (found.size() > static_cast<std::size_t>(top)) found.resize(static_cast<std::size_t>(top));
  std::vector<ModePoint> out;
  out.reserve(found.size());
  for (const auto& [v, j] : found) out.push_back(ModePoint{v, g.cell_center(j)});
  return out;
}

struct Marginal2D {
  int axis_a = 0;
  int axis_b = 1;
  int points_per_axis = 0;
  std::array<AxisRange, 2> ranges{};
  std::array<double, 2> step{};
  std::vector<double> values;  // row-major over (axis_a, axis_b)
  bool identity = false;       // dim-2 input: the density itself was returned
};

// Bivariate marginal of a 3-D density: sum over the dropped axis times its
// step. For a 2-D density the values are returned as-is with the identity
// flag set.
inline Marginal2D marginal_2d(const DensityEstimate& f, int axis_a, int axis_b) {
  const Grid& g = f.grid;
  if (axis_a == axis_b) throw std::invalid_argument("marginal: axes must be distinct");
  if (axis_a < 0 || axis_b < 0 || axis_a >= g.dim() || axis_b >= g.dim()) {
    throw std::invalid_argument("marginal: axis out of range");
  }
  Marginal2D out;
  out.axis_a = axis_a;
  out.axis_b = axis_b;
  out.points_per_axis = g.points_per_axis();
  out.ranges = {g.range(axis_a), g.range(axis_b)};
  out.step = {g.step(axis_a), g.step(axis_b)};

  const std::size_t k = static_cast<std::size_t>(g.points_per_axis());
  if (g.dim() == 2) {
    out.identity = true;
    out.values.assign(k * k, 0.0);
    for (std::size_t j = 0; j < f.values.size(); ++j) {
      const MultiIndex idx = g.multi_index(j);
      const std::size_t ia = static_cast<std::size_t>(idx[static_cast<std::size_t>(axis_a)]);
      const std::size_t ib = static_cast<std::size_t>(idx[static_cast<std::size_t>(axis_b)]);
      out.values[ia * k + ib] = f.values[j];
    }
    return out;
  }

  const int dropped = 3 - axis_a - axis_b;
  const double h_drop = g.step(dropped);
  out.values.assign(k * k, 0.0);
  for (std::size_t j = 0; j < f.values.size(); ++j) {
    const MultiIndex idx = g.multi_index(j);
    const std::size_t ia = static_cast<std::size_t>(idx[static_cast<std::size_t>(axis_a)]);
    const std::size_t ib = static_cast<std::size_t>(idx[static_cast<std::size_t>(axis_b)]);
    out.values[ia * k + ib] += f.values[j] * h_drop;
  }
  return out;
}

inline double marginal_mass(const Marginal2D& m) {
  double acc = 0.0;
  for (double v : m.values) acc += v;
  return acc * m.step[0] * m.step[1];
}

// report-level conveniences
inline std::array<double, kMaxDim> expected_value(const EstimationReport& r) {
  return expected_value(r.f);
}
inline ModePoint maxval(const EstimationReport& r) { return maxval(r.f); }
inline std::vector<ModePoint> modes(const EstimationReport& r, int top) { return modes(r.f, top); }
inline Marginal2D marginal_2d(const EstimationReport& r, int axis_a, int axis_b) {
  return marginal_2d(r.f, axis_a, axis_b);
}

}  // namespace rcdens
