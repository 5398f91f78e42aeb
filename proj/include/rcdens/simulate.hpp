#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "grid.hpp"
#include "rng.hpp"
#include "sample_matrix.hpp"

namespace rcdens {

struct MixtureComponent {
  std::array<double, kMaxDim> mean{};
  // row-major dim x dim covariance
  std::array<double, kMaxDim * kMaxDim> cov{};
};

struct SimulateOptions {
  // empty means the built-in default for the requested dim
  std::vector<MixtureComponent> components;
  std::vector<double> weights;  // empty means equal weights
  double x_low = -2.0;
  double x_high = 2.0;
  double noise_sd = 0.0;  // optional additive gaussian noise on Y
  std::uint64_t seed = 0;
};

namespace detail {

// Lower-triangular factor, tolerating semidefinite input (zero pivots allowed
// when the remaining column is consistent). Returns false when not PSD.
inline bool cholesky(const double* a, int d, double* l) {
  const double tol = 1e-12;
  double scale = 1.0;
  for (int i = 0; i < d; ++i) scale = std::max(scale, std::fabs(a[i * d + i]));
  for (int i = 0; i < d * d; ++i) l[i] = 0.0;
  for (int j = 0; j < d; ++j) {
    double s = a[j * d + j];
    for (int k = 0; k < j; ++k) s -= l[j * d + k] * l[j * d + k];
    if (s < -tol * scale) return false;
    l[j * d + j] = s > tol * scale ? std::sqrt(s) : 0.0;
    for (int i = j + 1; i < d; ++i) {
      double v = a[i * d + j];
      for (int k = 0; k < j; ++k) v -= l[i * d + k] * l[j * d + k];
      if (l[j * d + j] > 0.0) {
        l[i * d + j] = v / l[j * d + j];
      } else if (std::fabs(v) > tol * scale) {
        return false;
      }
    }
  }
  return true;
}

inline MixtureComponent gaussian(double m0, double m1, double m2, double var, int dim) {
  MixtureComponent c;
  c.mean = {m0, m1, m2};
  for (int i = 0; i < dim; ++i) c.cov[static_cast<std::size_t>(i * kMaxDim + i)] = var;
  return c;
}

}  // namespace detail

// Draws n rows of the random coefficients model: regressors i.i.d. uniform on
// [x_low, x_high], an all-ones intercept column, coefficients from a gaussian
// mixture, and Y = beta . X (plus optional noise). Defaults: dim 2 is the
// equal-weight mixture of N((-.5,-.5), .01 I) and N((.5,.5), .01 I); dim 3 is
// N((2,2,2), .01 I).
inline SampleMatrix sim_sample(std::size_t n, int dim, const SimulateOptions& opts = {}) {
  if (n < 1) throw std::invalid_argument("sim_sample: need n >= 1");
  if (dim < 2 || dim > kMaxDim) throw std::invalid_argument("sim_sample: dim must be 2 or 3");
  if (!(opts.x_low < opts.x_high)) throw std::invalid_argument("sim_sample: empty regressor range");
  if (opts.noise_sd < 0.0) throw std::invalid_argument("sim_sample: negative noise level");

  std::vector<MixtureComponent> comps = opts.components;
  if (comps.empty()) {
    if (dim == 2) {
      comps = {detail::gaussian(-0.5, -0.5, 0.0, 0.01, dim),
               detail::gaussian(0.5, 0.5, 0.0, 0.01, dim)};
    } else {
      comps = {detail::gaussian(2.0, 2.0, 2.0, 0.01, dim)};
    }
  }
  std::vector<double> weights = opts.weights;
  if (weights.empty()) weights.assign(comps.size(), 1.0 / static_cast<double>(comps.size()));
  if (weights.size() != comps.size()) {
    throw std::invalid_argument("sim_sample: one weight per mixture component required");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("sim_sample: negative mixture weight");
    wsum += w;
  }
  if (std::fabs(wsum - 1.0) > 1e-9) {
    throw std::invalid_argument("sim_sample: mixture weights must sum to 1");
  }
  for (double& w : weights) w /= wsum;

  // per-component Cholesky factors (in kMaxDim-strided storage)
  std::vector<std::array<double, kMaxDim * kMaxDim>> factors(comps.size());
  for (std::size_t c = 0; c < comps.size(); ++c) {
    double a[kMaxDim * kMaxDim], l[kMaxDim * kMaxDim];
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        a[i * dim + j] = comps[c].cov[static_cast<std::size_t>(i * kMaxDim + j)];
        if (std::fabs(comps[c].cov[static_cast<std::size_t>(i * kMaxDim + j)] -
                      comps[c].cov[static_cast<std::size_t>(j * kMaxDim + i)]) > 1e-12) {
          throw std::invalid_argument("sim_sample: covariance must be symmetric");
        }
      }
    }
    if (!detail::cholesky(a, dim, l)) {
      throw std::invalid_argument("sim_sample: covariance must be positive semidefinite");
    }
    factors[c].fill(0.0);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        factors[c][static_cast<std::size_t>(i * kMaxDim + j)] = l[i * dim + j];
      }
    }
  }

  Rng rng(opts.seed);
  const std::size_t cols = static_cast<std::size_t>(dim) + 1;
  std::vector<double> data(n * cols);
  std::array<double, kMaxDim> z{}, beta{};
  for (std::size_t i = 0; i < n; ++i) {
    // component pick, then the gaussian draw, then the regressors
    const double u = rng.uniform01();
    std::size_t comp = 0;
    double acc = 0.0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
      acc += weights[c];
      if (u < acc) {
        comp = c;
        break;
      }
      comp = c;
    }
    for (int d = 0; d < dim; ++d) z[static_cast<std::size_t>(d)] = rng.normal();
    for (int d = 0; d < dim; ++d) {
      double v = comps[comp].mean[static_cast<std::size_t>(d)];
      for (int e = 0; e <= d; ++e) {
        v += factors[comp][static_cast<std::size_t>(d * kMaxDim + e)] * z[static_cast<std::size_t>(e)];
      }
      beta[static_cast<std::size_t>(d)] = v;
    }

    double* row = data.data() + i * cols;
    row[0] = 1.0;
    for (int d = 1; d < dim; ++d) row[d] = rng.uniform(opts.x_low, opts.x_high);
    double y = 0.0;
    for (int d = 0; d < dim; ++d) y += beta[static_cast<std::size_t>(d)] * row[d];
    if (opts.noise_sd > 0.0) y += opts.noise_sd * rng.normal();
    row[cols - 1] = y;
  }
  return SampleMatrix(n, cols, std::move(data));
}

}  // namespace rcdens
