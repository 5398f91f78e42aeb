#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "likelihood.hpp"
#include "operator.hpp"

namespace rcdens {

enum class AlphaMethod { User, Lepskii, CV };

inline const char* to_string(AlphaMethod m) {
  switch (m) {
    case AlphaMethod::User: return "User";
    case AlphaMethod::Lepskii: return "Lepskii";
    case AlphaMethod::CV: return "CV";
  }
  return "User";
}

inline AlphaMethod alpha_method_from_string(const std::string& s) {
  if (s == "User") return AlphaMethod::User;
  if (s == "Lepskii") return AlphaMethod::Lepskii;
  if (s == "CV") return AlphaMethod::CV;
  throw std::invalid_argument("unknown alpha method '" + s + "'");
}

struct SolverOptions {
  double tolerance = 1e-6;
  int max_iter = 100;
  std::optional<std::vector<double>> initial_guess;
  // keep the per-iteration objective values (tests use this to check descent)
  bool record_trajectory = false;
};

struct SolveDetails {
  int iterations = 0;
  double final_objective = 0.0;
  double kkt_residual = 0.0;          // ||f - P(f - grad)||_inf at exit
  std::size_t clamped_rows = 0;       // rows floored inside log at the solution
  std::size_t zero_rows = 0;          // hyperplanes that missed the grid
  double wall_time_sec = 0.0;
  std::string termination;            // "tolerance" | "max_iter" | "stalled"
  std::vector<double> trajectory;
};

// shift-workflow bookkeeping attached to reports produced by shift_estimate
struct ShiftInfo {
  std::vector<double> offsets;   // applied intercept shifts c_t
  std::vector<double> norms;     // weighted L2 norm of each reconstruction
  std::vector<int> cluster;      // 2-means assignment per reconstruction
  int chosen = 0;                // index of the returned reconstruction
};

// lightweight provenance of the operator a report was solved against
struct OperatorInfo {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::size_t nnz = 0;
  std::size_t zero_rows = 0;
};

struct EstimationReport {
  DensityEstimate f;
  double alpha = 0.0;
  AlphaMethod alpha_method = AlphaMethod::User;
  OperatorInfo op;
  SolveDetails details;
  std::optional<ShiftInfo> shift;

  const Grid& grid() const { return f.grid; }
};

// Euclidean projection onto {x >= 0, sum(x) = mass} by sort-and-threshold.
inline std::vector<double> project_simplex(std::vector<double> v, double mass) {
  if (!(mass > 0.0)) throw std::invalid_argument("project_simplex: mass must be positive");
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0;
  double theta = 0.0;
  std::size_t rho = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    const double t = (cum - mass) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = i + 1;
      theta = t;
    }
  }
  // rho >= 1 always: the largest entry passes at i = 0
  (void)rho;
  for (double& x : v) x = std::max(x - theta, 0.0);
  return v;
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::fabs(a[i] - b[i]));
  return s;
}

// entropy iterates must stay strictly positive: floor, then rescale the mass
inline void floor_and_renormalize(std::vector<double>& f, double mass) {
  double sum = 0.0;
  for (double& x : f) {
    if (x < kEntropyFloor) x = kEntropyFloor;
    sum += x;
  }
  const double scale = mass / sum;
  for (double& x : f) x *= scale;
}

}  // namespace detail

// Minimizes neg_avg_loglik + alpha * penalty over {f >= 0, sum(f)*dv = 1}
// by projected gradient descent: Barzilai-Borwein trial steps, Armijo
// backtracking, exact simplex projection. Deterministic for fixed inputs.
inline EstimationReport solve(const OperatorMatrix& op, double alpha, PenaltyKind kind,
                              const SolverOptions& opts = {}) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("solve: alpha must be a nonnegative number");
  }
  if (!(opts.tolerance > 0.0)) throw std::invalid_argument("solve: tolerance must be positive");
  if (opts.max_iter < 1) throw std::invalid_argument("solve: max_iter must be at least 1");
  if (2 * op.zero_row_count() > op.n_rows()) {
    throw std::runtime_error(
        "solve: more than half of the sample hyperplanes miss the grid; enlarge the ranges");
  }

  const auto t_start = std::chrono::steady_clock::now();
  const Grid& grid = op.grid();
  const std::size_t m = op.n_cols();
  const double dv = grid.cell_volume();
  const double mass = 1.0 / dv;  // sum(f) = mass  <=>  integral of f = 1

  std::vector<double> f;
  if (opts.initial_guess) {
    if (opts.initial_guess->size() != m) {
      throw std::invalid_argument("solve: initial guess length does not match grid");
    }
    f = project_simplex(*opts.initial_guess, mass);
  } else {
    f.assign(m, mass / static_cast<double>(m));
  }
  if (kind == PenaltyKind::Entropy) detail::floor_and_renormalize(f, mass);

  ObjectiveEval cur = objective(op, f, alpha, kind);

  SolveDetails details;
  details.zero_rows = op.zero_row_count();
  if (opts.record_trajectory) details.trajectory.push_back(cur.value);

  constexpr double kArmijo = 1e-4;
  constexpr double kShrink = 0.5;
  double step = 1.0;
  {
    double gmax = 0.0;
    for (double g : cur.grad) gmax = std::max(gmax, std::fabs(g));
    step = 1.0 / std::max(gmax, 1e-12);
  }

  std::vector<double> prev_f, prev_grad, trial(m);
  std::string reason = "max_iter";
  int iter = 0;
  double kkt = 0.0;

  for (; iter < opts.max_iter; ++iter) {
    // KKT residual with unit step
    {
      std::vector<double> probe(m);
      for (std::size_t j = 0; j < m; ++j) probe[j] = f[j] - cur.grad[j];
      probe = project_simplex(std::move(probe), mass);
      kkt = detail::max_abs_diff(f, probe);
    }
    if (kkt <= opts.tolerance) {
      reason = "tolerance";
      break;
    }

    // Barzilai-Borwein trial step from the previous pair
    if (!prev_f.empty()) {
      double ss = 0.0, sy = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double s = f[j] - prev_f[j];
        const double yv = cur.grad[j] - prev_grad[j];
        ss += s * s;
        sy += s * yv;
      }
      step = sy > 1e-300 ? ss / sy : step * 2.0;
      step = std::clamp(step, 1e-14, 1e14);
    }

    prev_f = f;
    prev_grad = cur.grad;

    bool accepted = false;
    double trial_value = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < m; ++j) trial[j] = f[j] - step * cur.grad[j];
      trial = project_simplex(std::move(trial), mass);
      if (kind == PenaltyKind::Entropy) detail::floor_and_renormalize(trial, mass);

      double gd = 0.0, dmax = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double dj = trial[j] - f[j];
        gd += cur.grad[j] * dj;
        dmax = std::max(dmax, std::fabs(dj));
      }
      if (dmax <= 1e-18 * mass) break;  // projection returned f itself

      trial_value = objective_value(op, trial, alpha, kind);
      if (trial_value <= cur.value + kArmijo * gd) {
        accepted = true;
        break;
      }
      step *= kShrink;
    }
    if (!accepted) {
      reason = "stalled";
      break;
    }

    f.swap(trial);
    cur = objective(op, f, alpha, kind);
    if (opts.record_trajectory) details.trajectory.push_back(cur.value);
  }

  // residual at the point actually returned
  {
    std::vector<double> probe(m);
    for (std::size_t j = 0; j < m; ++j) probe[j] = f[j] - cur.grad[j];
    probe = project_simplex(std::move(probe), mass);
    kkt = detail::max_abs_diff(f, probe);
  }

  details.iterations = iter;
  details.final_objective = cur.value;
  details.kkt_residual = kkt;
  details.clamped_rows = cur.clamped_rows;
  details.termination = reason;
  details.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  EstimationReport report;
  report.f = DensityEstimate{std::move(f), grid};
  report.alpha = alpha;
  report.alpha_method = AlphaMethod::User;
  report.op = OperatorInfo{op.n_rows(), op.n_cols(), op.nnz(), op.zero_row_count()};
  report.details = std::move(details);
  return report;
}

}  // namespace rcdens
