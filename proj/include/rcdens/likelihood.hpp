#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "grid.hpp"
#include "operator.hpp"

namespace rcdens {

// floor applied inside log(Tf); keeps rows whose hyperplane misses the grid
// from blowing up the objective
inline constexpr double kLikelihoodFloor = 1e-30;
// floor applied inside the entropy integrand and the solver's positivity
// safeguard
inline constexpr double kEntropyFloor = 1e-12;

enum class PenaltyKind { None, L2Squared, SobolevH1, Entropy };

inline const char* to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::None: return "none";
    case PenaltyKind::L2Squared: return "l2";
    case PenaltyKind::SobolevH1: return "h1";
    case PenaltyKind::Entropy: return "entropy";
  }
  return "none";
}

inline PenaltyKind penalty_from_string(const std::string& s) {
  if (s == "none") return PenaltyKind::None;
  if (s == "l2") return PenaltyKind::L2Squared;
  if (s == "h1") return PenaltyKind::SobolevH1;
  if (s == "entropy") return PenaltyKind::Entropy;
  throw std::invalid_argument("unknown penalty '" + s + "' (expected none|l2|h1|entropy)");
}

// Discretized density: one value per grid cell in flat-index order, in
// probability-per-unit-volume units. A valid estimate is nonnegative with
// sum(values) * cell_volume = 1.
struct DensityEstimate {
  std::vector<double> values;
  Grid grid;

  double mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.cell_volume();
  }

  double min_value() const {
    double m = values.empty() ? 0.0 : values[0];
    for (double v : values) m = std::min(m, v);
    return m;
  }

  double at(const MultiIndex& idx) const { return values[grid.flat_index(idx)]; }
  double at(int i0, int i1) const { return values[grid.flat_index({i0, i1, 0})]; }
  double at(int i0, int i1, int i2) const { return values[grid.flat_index({i0, i1, i2})]; }
};

inline void check_density_shape(const OperatorMatrix& op, std::span<const double> f) {
  if (f.size() != op.n_cols()) {
    throw std::invalid_argument("likelihood: density length does not match operator columns");
  }
}

// -(1/n) sum_i log(max((Tf)_i, floor)); clamped row count reported on request
inline double neg_avg_loglik(const OperatorMatrix& op, std::span<const double> f,
                             std::size_t* clamped = nullptr) {
  check_density_shape(op, f);
  const std::vector<double> tf = op.apply(f);
  double acc = 0.0;
  std::size_t nclamp = 0;
  for (double r : tf) {
    if (r < kLikelihoodFloor) {
      r = kLikelihoodFloor;
      ++nclamp;
    }
    acc += std::log(r);
  }
  if (clamped) *clamped = nclamp;
  return -acc / static_cast<double>(op.n_rows());
}

// exact gradient of the clamped objective numerator: d_j = -(1/n) sum_i T_ij / max((Tf)_i, floor)
inline std::vector<double> neg_avg_loglik_grad(const OperatorMatrix& op,
                                               std::span<const double> f) {
  check_density_shape(op, f);
  std::vector<double> tf = op.apply(f);
  for (double& r : tf) r = 1.0 / std::max(r, kLikelihoodFloor);
  std::vector<double> g(op.n_cols(), 0.0);
  op.add_rows_scaled(tf, g);
  const double scale = -1.0 / static_cast<double>(op.n_rows());
  for (double& v : g) v *= scale;
  return g;
}

struct PenaltyEval {
  double value = 0.0;
  std::vector<double> grad;
};

namespace detail {

// forward difference (f[j+e_a] - f[j]) / h_a for every cell and axis, with
// zero padding past the upper face; returns the squared norm term and, when
// grad is non-null, accumulates the exact contribution 2*dv*(D^T D f)
inline double sobolev_difference_term(std::span<const double> f, const Grid& grid,
                                      double* grad) {
  const int dim = grid.dim();
  const int k = grid.points_per_axis();
  const double dv = grid.cell_volume();
  const std::size_t m = grid.cell_count();

  // strides of each axis in the row-major flat layout
  std::array<std::size_t, kMaxDim> stride{};
  stride[static_cast<std::size_t>(dim - 1)] = 1;
  for (int a = dim - 2; a >= 0; --a) {
    stride[static_cast<std::size_t>(a)] = stride[static_cast<std::size_t>(a + 1)] * static_cast<std::size_t>(k);
  }

  double value = 0.0;
  std::vector<double> dtd;
  if (grad) dtd.assign(m, 0.0);
  for (int a = 0; a < dim; ++a) {
    const double inv_h = 1.0 / grid.step(a);
    const std::size_t s = stride[static_cast<std::size_t>(a)];
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t ia = (j / s) % static_cast<std::size_t>(k);
      const bool interior = ia + 1 < static_cast<std::size_t>(k);
      const double up = interior ? f[j + s] : 0.0;
      const double diff = (up - f[j]) * inv_h;
      value += diff * diff;
      if (grad) {
        dtd[j] -= diff * inv_h;
        if (interior) dtd[j + s] += diff * inv_h;
      }
    }
  }
  if (grad) {
    for (std::size_t j = 0; j < m; ++j) grad[j] += 2.0 * dv * dtd[j];
  }
  return value * dv;
}

}  // namespace detail

// Penalty value and analytic gradient. All three penalties carry the cell
// volume weight so the values approximate the continuous integrals.
inline PenaltyEval penalty(PenaltyKind kind, std::span<const double> f, const Grid& grid) {
  if (f.size() != grid.cell_count()) {
    throw std::invalid_argument("penalty: density length does not match grid");
  }
  const double dv = grid.cell_volume();
  PenaltyEval out;
  out.grad.assign(f.size(), 0.0);
  switch (kind) {
    case PenaltyKind::None:
      break;
    case PenaltyKind::L2Squared: {
      double acc = 0.0;
      for (std::size_t j = 0; j < f.size(); ++j) {
        acc += f[j] * f[j];
        out.grad[j] = 2.0 * f[j] * dv;
      }
      out.value = acc * dv;
      break;
    }
    case PenaltyKind::SobolevH1: {
      double acc = 0.0;
      for (std::size_t j = 0; j < f.size(); ++j) {
        acc += f[j] * f[j];
        out.grad[j] = 2.0 * f[j] * dv;
      }
      out.value = acc * dv + detail::sobolev_difference_term(f, grid, out.grad.data());
      break;
    }
    case PenaltyKind::Entropy: {
      double acc = 0.0;
      for (std::size_t j = 0; j < f.size(); ++j) {
        const double v = std::max(f[j], kEntropyFloor);
        const double lg = std::log(v);
        acc += v * lg;
        out.grad[j] = (lg + 1.0) * dv;
      }
      out.value = acc * dv;
      break;
    }
  }
  return out;
}

struct ObjectiveEval {
  double value = 0.0;
  std::vector<double> grad;
  std::size_t clamped_rows = 0;
};

// full objective of the estimator: neg_avg_loglik + alpha * penalty
inline ObjectiveEval objective(const OperatorMatrix& op, std::span<const double> f, double alpha,
                               PenaltyKind kind) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("objective: alpha must be nonnegative");
  ObjectiveEval out;
  out.value = neg_avg_loglik(op, f, &out.clamped_rows);
  out.grad = neg_avg_loglik_grad(op, f);
  if (kind != PenaltyKind::None && alpha > 0.0) {
    PenaltyEval p = penalty(kind, f, op.grid());
    out.value += alpha * p.value;
    for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] += alpha * p.grad[j];
  }
  return out;
}

// penalty value without the gradient pass
inline double penalty_value(PenaltyKind kind, std::span<const double> f, const Grid& grid) {
  if (f.size() != grid.cell_count()) {
    throw std::invalid_argument("penalty: density length does not match grid");
  }
  const double dv = grid.cell_volume();
  switch (kind) {
    case PenaltyKind::None:
      return 0.0;
    case PenaltyKind::L2Squared: {
      double acc = 0.0;
      for (double x : f) acc += x * x;
      return acc * dv;
    }
    case PenaltyKind::SobolevH1: {
      double acc = 0.0;
      for (double x : f) acc += x * x;
      return acc * dv + detail::sobolev_difference_term(f, grid, nullptr);
    }
    case PenaltyKind::Entropy: {
      double acc = 0.0;
      for (double x : f) {
        const double c = std::max(x, kEntropyFloor);
        acc += c * std::log(c);
      }
      return acc * dv;
    }
  }
  return 0.0;
}

// value-only path for line searches (one mat-vec, no transpose pass)
inline double objective_value(const OperatorMatrix& op, std::span<const double> f, double alpha,
                              PenaltyKind kind) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("objective: alpha must be nonnegative");
  double v = neg_avg_loglik(op, f);
  if (kind != PenaltyKind::None && alpha > 0.0) {
    v += alpha * penalty_value(kind, f, op.grid());
  }
  return v;
}

// convenience overloads on the density wrapper
inline double neg_avg_loglik(const OperatorMatrix& op, const DensityEstimate& f) {
  return neg_avg_loglik(op, std::span<const double>(f.values));
}
inline std::vector<double> neg_avg_loglik_grad(const OperatorMatrix& op,
                                               const DensityEstimate& f) {
  return neg_avg_loglik_grad(op, std::span<const double>(f.values));
}
inline PenaltyEval penalty(PenaltyKind kind, const DensityEstimate& f) {
  return penalty(kind, std::span<const double>(f.values), f.grid);
}
inline ObjectiveEval objective(const OperatorMatrix& op, const DensityEstimate& f, double alpha,
                               PenaltyKind kind) {
  return objective(op, std::span<const double>(f.values), alpha, kind);
}

}  // namespace rcdens
