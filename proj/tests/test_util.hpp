// Shared helpers for constructing small synthetic instances in tests.
#pragma once

#include <cstddef>
#include <vector>

#include <rcdens/grid.hpp>
#include <rcdens/operator.hpp>
#include <rcdens/rng.hpp>
#include <rcdens/sample_matrix.hpp>

namespace testutil {

inline rcdens::SampleMatrix dummy_sample(std::size_t n, int dim) {
  std::vector<double> data(n * (static_cast<std::size_t>(dim) + 1), 0.0);
  for (std::size_t i = 0; i < n; ++i) data[i * (static_cast<std::size_t>(dim) + 1)] = 1.0;
  return rcdens::SampleMatrix(n, static_cast<std::size_t>(dim) + 1, std::move(data));
}

// synthetic operator with strictly positive entries at the given fill ratio
inline rcdens::OperatorMatrix random_operator(std::size_t n, const rcdens::Grid& grid,
                                              rcdens::Rng& rng, double fill = 0.6) {
  const std::size_t m = grid.cell_count();
  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<std::uint32_t> col;
  std::vector<double> val;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (rng.uniform01() < fill) {
        col.push_back(static_cast<std::uint32_t>(j));
        val.push_back(rng.uniform(0.1, 2.0));
        ++count;
      }
    }
    if (count == 0) {  // keep every row nonempty
      col.push_back(static_cast<std::uint32_t>(rng.bounded(m)));
      val.push_back(rng.uniform(0.1, 2.0));
      ++count;
    }
    row_ptr[i + 1] = row_ptr[i] + count;
  }
  return rcdens::OperatorMatrix(grid, dummy_sample(n, grid.dim()), std::move(row_ptr),
                                std::move(col), std::move(val));
}

// strictly positive density-like vector, not necessarily normalized
inline std::vector<double> random_positive(std::size_t m, rcdens::Rng& rng, double lo = 0.05,
                                           double hi = 1.5) {
  std::vector<double> f(m);
  for (double& v : f) v = rng.uniform(lo, hi);
  return f;
}

}  // namespace testutil
