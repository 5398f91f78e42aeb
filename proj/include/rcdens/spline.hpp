#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "likelihood.hpp"
#include "solver.hpp"

namespace rcdens {

namespace detail {

// Natural cubic spline through uniformly spaced knots, evaluated as a dense
// dst x src matrix (interpolation is linear in the data, so tensor-product
// evaluation reduces to one such matrix per axis). Points beyond the knot
// range are evaluated on the end cubic.
class CubicSpline1D {
 public:
  CubicSpline1D(double x0, double h, std::vector<double> y)
      : x0_(x0), h_(h), y_(std::move(y)) {
    const std::size_t n = y_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;  // natural spline through 2 points is the straight line
    // Thomas solve of the tridiagonal system for second derivatives
    const std::size_t inner = n - 2;
    std::vector<double> diag(inner, 4.0), rhs(inner);
    for (std::size_t i = 0; i < inner; ++i) {
      rhs[i] = 6.0 * (y_[i] - 2.0 * y_[i + 1] + y_[i + 2]) / (h_ * h_);
    }
    for (std::size_t i = 1; i < inner; ++i) {
      const double w = 1.0 / diag[i - 1];
      diag[i] -= w;
      rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = inner; i-- > 0;) {
      const double upper = i + 1 < inner ? m_[i + 2] : 0.0;
      m_[i + 1] = (rhs[i] - upper) / diag[i];
    }
  }

  double operator()(double x) const {
    const std::size_t n = y_.size();
    double t = (x - x0_) / h_;
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(t);
    if (i < 0) i = 0;
    if (i > static_cast<std::ptrdiff_t>(n) - 2) i = static_cast<std::ptrdiff_t>(n) - 2;
    const std::size_t j = static_cast<std::size_t>(i);
    const double dx = x - (x0_ + static_cast<double>(j) * h_);
    const double b = (y_[j + 1] - y_[j]) / h_ - h_ * (2.0 * m_[j] + m_[j + 1]) / 6.0;
    const double c = m_[j] / 2.0;
    const double d = (m_[j + 1] - m_[j]) / (6.0 * h_);
    return y_[j] + dx * (b + dx * (c + dx * d));
  }

 private:
  double x0_;
  double h_;
  std::vector<double> y_;   // knot values
  std::vector<double> m_;   // second derivatives, natural ends
};

// dst x src evaluation matrix mapping values at source centers to values at
// target centers along one axis
inline std::vector<double> spline_eval_matrix(const AxisRange& range, int src_k, int dst_k) {
  const double hs = range.width() / src_k;
  const double hd = range.width() / dst_k;
  std::vector<double> mat(static_cast<std::size_t>(dst_k) * static_cast<std::size_t>(src_k), 0.0);
  std::vector<double> basis(static_cast<std::size_t>(src_k), 0.0);
  for (int s = 0; s < src_k; ++s) {
    basis.assign(static_cast<std::size_t>(src_k), 0.0);
    basis[static_cast<std::size_t>(s)] = 1.0;
    const CubicSpline1D spline(range.lo + 0.5 * hs, hs, basis);
    for (int t = 0; t < dst_k; ++t) {
      mat[static_cast<std::size_t>(t) * static_cast<std::size_t>(src_k) + static_cast<std::size_t>(s)] =
          spline(range.lo + (t + 0.5) * hd);
    }
  }
  return mat;
}

// contract axis `axis` of a row-major tensor with the dst x src matrix
inline std::vector<double> contract_axis(const std::vector<double>& tensor,
                                         const std::vector<int>& shape, int axis,
                                         const std::vector<double>& mat, int dst_k) {
  const int src_k = shape[static_cast<std::size_t>(axis)];
  std::size_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= static_cast<std::size_t>(shape[static_cast<std::size_t>(a)]);
  for (std::size_t a = static_cast<std::size_t>(axis) + 1; a < shape.size(); ++a) {
    inner *= static_cast<std::size_t>(shape[a]);
  }
  std::vector<double> out(outer * static_cast<std::size_t>(dst_k) * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (int t = 0; t < dst_k; ++t) {
      const double* mrow = mat.data() + static_cast<std::size_t>(t) * static_cast<std::size_t>(src_k);
      double* dst = out.data() + (o * static_cast<std::size_t>(dst_k) + static_cast<std::size_t>(t)) * inner;
      for (int s = 0; s < src_k; ++s) {
        const double w = mrow[s];
        if (w == 0.0) continue;
        const double* src =
            tensor.data() + (o * static_cast<std::size_t>(src_k) + static_cast<std::size_t>(s)) * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += w * src[i];
      }
    }
  }
  return out;
}

}  // namespace detail

// Tensor-product natural-cubic interpolation of the cell-center values onto
// the centers of a finer grid, before any clamping or renormalization.
inline std::vector<double> refine_values_raw(const DensityEstimate& f, int new_points_per_axis) {
  const Grid& g = f.grid;
  if (new_points_per_axis <= g.points_per_axis()) {
    throw std::invalid_argument("refine: new grid must be finer than the original");
  }
  double target_cells = 1.0;
  for (int a = 0; a < g.dim(); ++a) target_cells *= new_points_per_axis;
  if (target_cells > 2e8) throw std::invalid_argument("refine: requested grid is too large");

  std::vector<double> values = f.values;
  std::vector<int> shape(static_cast<std::size_t>(g.dim()), g.points_per_axis());
  for (int a = 0; a < g.dim(); ++a) {
    const std::vector<double> mat =
        detail::spline_eval_matrix(g.range(a), g.points_per_axis(), new_points_per_axis);
    values = detail::contract_axis(values, shape, a, mat, new_points_per_axis);
    shape[static_cast<std::size_t>(a)] = new_points_per_axis;
  }
  return values;
}

struct RefineResult {
  DensityEstimate density;
  double raw_mass = 0.0;      // mass of the interpolant before clamping
  double clamped_mass = 0.0;  // negative mass removed by the clamp
};

// Spline refinement onto a finer display grid: interpolate, clamp negative
// overshoot to zero, renormalize to unit mass.
inline RefineResult refine(const DensityEstimate& f, int new_points_per_axis) {
  std::vector<double> values = refine_values_raw(f, new_points_per_axis);
  std::vector<AxisRange> ranges;
  for (int a = 0; a < f.grid.dim(); ++a) ranges.push_back(f.grid.range(a));
  Grid fine(new_points_per_axis, f.grid.dim(), std::move(ranges));
  const double dv = fine.cell_volume();

  RefineResult out;
  double sum = 0.0, clipped = 0.0;
  for (double& v : values) {
    sum += v;
    if (v < 0.0) {
      clipped += v;
      v = 0.0;
    }
  }
  out.raw_mass = sum * dv;
  out.clamped_mass = -clipped * dv;
  const double mass = (sum - clipped) * dv;
  if (!(mass > 0.0)) throw std::runtime_error("refine: interpolant has no positive mass");
  for (double& v : values) v /= mass;
  out.density = DensityEstimate{std::move(values), std::move(fine)};
  return out;
}

inline RefineResult refine(const EstimationReport& r, int new_points_per_axis) {
  return refine(r.f, new_points_per_axis);
}

}  // namespace rcdens
