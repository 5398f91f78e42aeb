#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "likelihood.hpp"
#include "operator.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "solver.hpp"

namespace rcdens {

// Geometric ladder alpha_1 = c * ln(n)/sqrt(n), alpha_{i+1} = r * alpha_i.
struct AlphaLadder {
  double c_l = 1.0;
  double r = 1.3;
  std::vector<double> values;
};

inline AlphaLadder make_alpha_ladder(std::size_t n, double c_l = 1.0, double r = 1.3,
                                     int count = 10) {
  if (n < 2) throw std::invalid_argument("alpha ladder: need n >= 2");
  if (!(c_l > 0.0)) throw std::invalid_argument("alpha ladder: c must be positive");
  if (!(r > 1.0)) throw std::invalid_argument("alpha ladder: ratio must exceed 1");
  if (count < 1) throw std::invalid_argument("alpha ladder: count must be at least 1");
  AlphaLadder ladder;
  ladder.c_l = c_l;
  ladder.r = r;
  ladder.values.resize(static_cast<std::size_t>(count));
  ladder.values[0] = c_l * std::log(static_cast<double>(n)) / std::sqrt(static_cast<double>(n));
  for (int i = 1; i < count; ++i) {
    ladder.values[static_cast<std::size_t>(i)] = r * ladder.values[static_cast<std::size_t>(i - 1)];
  }
  return ladder;
}

// cell-volume weighted L2 distance between two discretized densities
inline double weighted_l2_distance(std::span<const double> a, std::span<const double> b,
                                   double cell_volume) {
  if (a.size() != b.size()) throw std::invalid_argument("l2 distance: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc * cell_volume);
}

// Balancing rule on a precomputed estimate sequence (ascending alphas):
// the largest index j such that || f_i - f_j || <= 8 * r^((1-i)/2) for every
// i < j, with i counted 1-based in the exponent. Index 0 qualifies vacuously.
inline int lepskii_balance(const std::vector<std::vector<double>>& estimates, double cell_volume,
                           double r) {
  if (estimates.size() < 2) throw std::invalid_argument("lepskii: need at least 2 estimates");
  int j_bal = 0;
  for (std::size_t j = 1; j < estimates.size(); ++j) {
    bool ok = true;
    for (std::size_t i = 0; i < j; ++i) {
      const double bound = 8.0 * std::pow(r, (1.0 - static_cast<double>(i + 1)) / 2.0);
      if (weighted_l2_distance(estimates[i], estimates[j], cell_volume) > bound) {
        ok = false;
        break;
      }
    }
    if (ok) j_bal = static_cast<int>(j);
  }
  return j_bal;
}

struct LepskiiResult {
  double alpha = 0.0;
  int j_bal = 0;                          // index into the ladder
  std::vector<EstimationReport> reports;  // one per ladder value, ascending
};

// Solves once per ladder value (concurrently; the ladder order is preserved)
// and applies the balancing rule.
inline LepskiiResult lepskii(const OperatorMatrix& op, const AlphaLadder& ladder,
                             PenaltyKind kind, const SolverOptions& opts = {}) {
  if (ladder.values.size() < 2) throw std::invalid_argument("lepskii: ladder needs >= 2 values");
  for (std::size_t i = 1; i < ladder.values.size(); ++i) {
    if (!(ladder.values[i] > ladder.values[i - 1])) {
      throw std::invalid_argument("lepskii: ladder must be strictly increasing");
    }
  }

  LepskiiResult out;
  out.reports.resize(ladder.values.size());
  parallel_for(0, ladder.values.size(), [&](std::size_t i) {
    out.reports[i] = solve(op, ladder.values[i], kind, opts);
  });

  std::vector<std::vector<double>> estimates;
  estimates.reserve(out.reports.size());
  for (const auto& r : out.reports) estimates.push_back(r.f.values);
  out.j_bal = lepskii_balance(estimates, op.grid().cell_volume(), ladder.r);
  out.alpha = ladder.values[static_cast<std::size_t>(out.j_bal)];
  for (auto& r : out.reports) r.alpha_method = AlphaMethod::Lepskii;
  return out;
}

// Held-out loss: -sum_i log(max((T_holdout f)_i, floor)) over the holdout rows.
inline double cv_loss(const OperatorMatrix& holdout, const DensityEstimate& f_train) {
  if (holdout.grid() != f_train.grid) throw std::invalid_argument("cv_loss: grid mismatch");
  const std::vector<double> tf = holdout.apply(f_train.values);
  double acc = 0.0;
  for (double r : tf) acc += std::log(std::max(r, kLikelihoodFloor));
  return -acc;
}

struct CvEvaluation {
  double alpha = 0.0;
  double loss = 0.0;
  bool final_pass = false;  // true for the exhaustive sweep over the survivors
};

struct CvSelection {
  double alpha = 0.0;
  double loss = 0.0;
  std::vector<CvEvaluation> trace;
  std::vector<double> survivors;  // candidates alive at the exhaustive sweep
};

// Halving search: while more than 3 candidates survive, split at the midpoint,
// score one randomly drawn alpha from each half, and keep the half whose draw
// scored lower. The survivors are then scored exhaustively and the argmin
// returned. Losses are memoized per alpha, so nothing is solved twice.
template <class LossFn>
CvSelection cv_search(std::vector<double> candidates, LossFn&& loss_of_alpha, Rng& rng) {
  if (candidates.size() < 2) throw std::invalid_argument("cv: need at least 2 candidates");
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (!(candidates[i] > candidates[i - 1])) {
      throw std::invalid_argument("cv: candidates must be sorted ascending and distinct");
    }
  }

  CvSelection out;
  std::map<double, double> memo;
  auto eval = [&](double alpha, bool final_pass) {
    auto it = memo.find(alpha);
    if (it == memo.end()) {
      const double loss = loss_of_alpha(alpha);
      it = memo.emplace(alpha, loss).first;
      out.trace.push_back({alpha, loss, final_pass});
    } else if (final_pass) {
      out.trace.push_back({alpha, it->second, true});
    }
    return it->second;
  };

  std::vector<double> working = std::move(candidates);
  while (working.size() > 3) {
    const std::size_t mid = working.size() / 2;
    const double a = working[rng.bounded(mid)];
    const double b = working[mid + rng.bounded(working.size() - mid)];
    const double ja = eval(a, false);
    const double jb = eval(b, false);
    if (ja < jb) {
      working.erase(working.begin() + static_cast<std::ptrdiff_t>(mid), working.end());
    } else {
      working.erase(working.begin(), working.begin() + static_cast<std::ptrdiff_t>(mid));
    }
  }

  out.survivors = working;
  double best = std::numeric_limits<double>::infinity();
  for (double alpha : working) {
    const double j = eval(alpha, true);
    if (j < best) {
      best = j;
      out.alpha = alpha;
      out.loss = j;
    }
  }
  return out;
}

// disjoint folds covering [0, n) in shuffled order, sizes differing by <= 1
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int k, Rng& rng) {
  if (k < 2) throw std::invalid_argument("cv: need at least 2 folds");
  if (static_cast<std::size_t>(k) > n) throw std::invalid_argument("cv: more folds than rows");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
    const std::size_t len = base + (j < extra ? 1 : 0);
    folds[j].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return folds;
}

// Modified k-fold cross validation over a sorted candidate list. The operator
// is built once; fold operators are row slices of it. One seeded generator
// drives the shuffle and the per-half draws.
inline CvSelection cv_select(const SampleMatrix& sample, const Grid& grid, int k_folds,
                             std::vector<double> candidates, PenaltyKind kind,
                             const SolverOptions& opts = {}, std::uint64_t seed = 0) {
  Rng rng(seed);
  const OperatorMatrix full = build_operator(sample, grid);
  const auto folds = make_folds(full.n_rows(), k_folds, rng);

  // per fold: holdout rows and their complement, sliced from the full operator
  std::vector<OperatorMatrix> holdout, train;
  holdout.reserve(folds.size());
  train.reserve(folds.size());
  for (std::size_t j = 0; j < folds.size(); ++j) {
    std::vector<std::size_t> rest;
    rest.reserve(full.n_rows() - folds[j].size());
    for (std::size_t o = 0; o < folds.size(); ++o) {
      if (o == j) continue;
      rest.insert(rest.end(), folds[o].begin(), folds[o].end());
    }
    holdout.push_back(full.select_rows(folds[j]));
    train.push_back(full.select_rows(rest));
  }

  auto loss_of_alpha = [&](double alpha) {
    std::vector<double> fold_loss(folds.size(), 0.0);
    parallel_for(0, folds.size(), [&](std::size_t j) {
      const EstimationReport rep = solve(train[j], alpha, kind, opts);
      fold_loss[j] = cv_loss(holdout[j], rep.f);
    });
    double total = 0.0;
    for (double l : fold_loss) total += l;
    return total;
  };

  return cv_search(std::move(candidates), loss_of_alpha, rng);
}

}  // namespace rcdens
