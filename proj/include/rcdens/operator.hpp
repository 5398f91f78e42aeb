#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "grid.hpp"
#include "parallel.hpp"
#include "sample_matrix.hpp"

namespace rcdens {

// (flat cell index, intersection measure)
using SparseEntry = std::pair<std::uint32_t, double>;

// Point-merge tolerance for intersection geometry, in coordinate units.
inline double geometry_epsilon(const Grid& grid) {
  double w = 0.0;
  for (int a = 0; a < grid.dim(); ++a) w = std::max(w, grid.range(a).width());
  return 1e-10 * w;
}

namespace detail {

inline void sort_and_merge(std::vector<SparseEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const SparseEntry& a, const SparseEntry& b) { return a.first < b.first; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (out > 0 && entries[out - 1].first == entries[i].first) {
      entries[out - 1].second += entries[i].second;
    } else {
      entries[out++] = entries[i];
    }
  }
  entries.resize(out);
}

inline double cross_norm(const Point& u, const Point& v) {
  const double cx = u[1] * v[2] - u[2] * v[1];
  const double cy = u[2] * v[0] - u[0] * v[2];
  const double cz = u[0] * v[1] - u[1] * v[0];
  return std::sqrt(cx * cx + cy * cy + cz * cz);
}

// Area of the convex section of the plane {b : a.b = y} with one cell.
// Crossing points are gathered on the 12 edges (vertices lying on the plane
// included once), merged within eps, ordered by angle about their centroid in
// the plane, and fed to the 3-D shoelace formula.
inline double cell_section_area(const std::array<double, 3>& corner,
                                const std::array<double, 3>& h,
                                const std::array<double, 3>& a, double y, double eps) {
  std::array<Point, 24> pts;
  int np = 0;
  const double anorm = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  const double seps = eps * anorm;

  std::array<double, 8> s;
  std::array<Point, 8> vert;
  for (int v = 0; v < 8; ++v) {
    Point p{};
    for (int d = 0; d < 3; ++d) {
      p[static_cast<std::size_t>(d)] =
          corner[static_cast<std::size_t>(d)] + ((v >> d) & 1 ? h[static_cast<std::size_t>(d)] : 0.0);
    }
    vert[static_cast<std::size_t>(v)] = p;
    s[static_cast<std::size_t>(v)] = a[0] * p[0] + a[1] * p[1] + a[2] * p[2] - y;
  }

  auto push = [&](const Point& p) {
    for (int i = 0; i < np; ++i) {
      const double dx = pts[static_cast<std::size_t>(i)][0] - p[0];
      const double dy = pts[static_cast<std::size_t>(i)][1] - p[1];
      const double dz = pts[static_cast<std::size_t>(i)][2] - p[2];
      if (dx * dx + dy * dy + dz * dz <= eps * eps) return;
    }
    pts[static_cast<std::size_t>(np++)] = p;
  };

  for (int v = 0; v < 8; ++v) {
    for (int d = 0; d < 3; ++d) {
      if ((v >> d) & 1) continue;  // edge owner is the low vertex
      const int w = v | (1 << d);
      const double su = s[static_cast<std::size_t>(v)];
      const double sw = s[static_cast<std::size_t>(w)];
      const bool on_u = std::fabs(su) <= seps;
      const bool on_w = std::fabs(sw) <= seps;
      if (on_u) push(vert[static_cast<std::size_t>(v)]);
      if (on_w) push(vert[static_cast<std::size_t>(w)]);
      if (!on_u && !on_w && ((su > 0.0) != (sw > 0.0))) {
        const double tau = su / (su - sw);
        Point p = vert[static_cast<std::size_t>(v)];
        p[static_cast<std::size_t>(d)] += tau * h[static_cast<std::size_t>(d)];
        push(p);
      }
    }
  }
  if (np < 3) return 0.0;

  Point c{};
  for (int i = 0; i < np; ++i) {
    for (int d = 0; d < 3; ++d) c[static_cast<std::size_t>(d)] += pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
  }
  for (int d = 0; d < 3; ++d) c[static_cast<std::size_t>(d)] /= np;

  // in-plane orthonormal frame: u toward the farthest point, w = n x u
  int far = 0;
  double far2 = -1.0;
  std::array<Point, 24> rel;
  for (int i = 0; i < np; ++i) {
    Point r{};
    double r2 = 0.0;
    for (int d = 0; d < 3; ++d) {
      r[static_cast<std::size_t>(d)] = pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] - c[static_cast<std::size_t>(d)];
      r2 += r[static_cast<std::size_t>(d)] * r[static_cast<std::size_t>(d)];
    }
    rel[static_cast<std::size_t>(i)] = r;
    if (r2 > far2) {
      far2 = r2;
      far = i;
    }
  }
  if (far2 <= eps * eps) return 0.0;
  const double ulen = std::sqrt(far2);
  Point u{};
  for (int d = 0; d < 3; ++d) u[static_cast<std::size_t>(d)] = rel[static_cast<std::size_t>(far)][static_cast<std::size_t>(d)] / ulen;
  const Point n{a[0] / anorm, a[1] / anorm, a[2] / anorm};
  const Point w{n[1] * u[2] - n[2] * u[1], n[2] * u[0] - n[0] * u[2], n[0] * u[1] - n[1] * u[0]};

  std::array<std::pair<double, int>, 24> order;
  for (int i = 0; i < np; ++i) {
    const Point& r = rel[static_cast<std::size_t>(i)];
    const double pu = r[0] * u[0] + r[1] * u[1] + r[2] * u[2];
    const double pw = r[0] * w[0] + r[1] * w[1] + r[2] * w[2];
    order[static_cast<std::size_t>(i)] = {std::atan2(pw, pu), i};
  }
  std::sort(order.begin(), order.begin() + np);

  Point acc{};
  for (int i = 0; i < np; ++i) {
    const Point& p = rel[static_cast<std::size_t>(order[static_cast<std::size_t>(i)].second)];
    const Point& q = rel[static_cast<std::size_t>(order[static_cast<std::size_t>((i + 1) % np)].second)];
    acc[0] += p[1] * q[2] - p[2] * q[1];
    acc[1] += p[2] * q[0] - p[0] * q[2];
    acc[2] += p[0] * q[1] - p[1] * q[0];
  }
  return 0.5 * std::sqrt(acc[0] * acc[0] + acc[1] * acc[1] + acc[2] * acc[2]);
}

}  // namespace detail

// Sparse row of the discrete operator for one 2-D sample: the segment lengths
// of the line {b : a.b = y} inside each cell. The line is clipped to the box,
// crossings with the internal grid lines are collected along the arclength
// parameter, and each segment is assigned to the cell owning its midpoint.
inline std::vector<SparseEntry> row_2d(const std::array<double, 2>& a, double y,
                                       const Grid& grid) {
  if (grid.dim() != 2) throw std::invalid_argument("row_2d: grid must be 2-dimensional");
  const double nrm2 = a[0] * a[0] + a[1] * a[1];
  if (nrm2 == 0.0) throw std::invalid_argument("row_2d: coefficient vector must be nonzero");
  const double nrm = std::sqrt(nrm2);
  const double eps = geometry_epsilon(grid);

  // base point and unit tangent: points are p + t*d with t the arclength
  const std::array<double, 2> p{a[0] * y / nrm2, a[1] * y / nrm2};
  const std::array<double, 2> d{-a[1] / nrm, a[0] / nrm};

  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int ax = 0; ax < 2; ++ax) {
    const double lo = grid.range(ax).lo;
    const double hi = grid.range(ax).hi;
    const double pa = p[static_cast<std::size_t>(ax)];
    const double da = d[static_cast<std::size_t>(ax)];
    if (std::fabs(da) < 1e-14) {
      if (pa < lo || pa > hi) return {};
      continue;
    }
    double ta = (lo - pa) / da;
    double tb = (hi - pa) / da;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 - t0 > eps)) return {};

  std::vector<double> ts;
  ts.reserve(static_cast<std::size_t>(2 * grid.points_per_axis() + 2));
  ts.push_back(t0);
  ts.push_back(t1);
  for (int ax = 0; ax < 2; ++ax) {
    const double da = d[static_cast<std::size_t>(ax)];
    if (std::fabs(da) < 1e-14) continue;
    const double pa = p[static_cast<std::size_t>(ax)];
    const double lo = grid.range(ax).lo;
    const double h = grid.step(ax);
    for (int i = 1; i < grid.points_per_axis(); ++i) {
      const double t = (lo + i * h - pa) / da;
      if (t > t0 + eps && t < t1 - eps) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());

  std::vector<SparseEntry> out;
  double prev = ts.front();
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (ts[i] - prev <= eps) continue;
    const double tm = 0.5 * (prev + ts[i]);
    const Point mid{p[0] + tm * d[0], p[1] + tm * d[1], 0.0};
    if (auto cell = grid.cell_of_point(mid)) {
      out.emplace_back(static_cast<std::uint32_t>(grid.flat_index(*cell)), ts[i] - prev);
    }
    prev = ts[i];
  }
  detail::sort_and_merge(out);
  return out;
}

// Sparse row for one 3-D sample: polygonal cross-section areas of the plane
// {b : a.b = y} with each cell. Cells are pre-filtered by whether their
// vertex-value range brackets y.
inline std::vector<SparseEntry> row_3d(const std::array<double, 3>& a, double y,
                                       const Grid& grid) {
  if (grid.dim() != 3) throw std::invalid_argument("row_3d: grid must be 3-dimensional");
  const double nrm2 = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
  if (nrm2 == 0.0) throw std::invalid_argument("row_3d: coefficient vector must be nonzero");
  const double eps = geometry_epsilon(grid);

  const std::array<double, 3> h{grid.step(0), grid.step(1), grid.step(2)};
  double neg = 0.0, pos = 0.0, diag2 = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double ah = a[static_cast<std::size_t>(d)] * h[static_cast<std::size_t>(d)];
    neg += std::min(0.0, ah);
    pos += std::max(0.0, ah);
    diag2 += h[static_cast<std::size_t>(d)] * h[static_cast<std::size_t>(d)];
  }
  const double area_floor = eps * std::sqrt(diag2);

  const int k = grid.points_per_axis();
  std::vector<SparseEntry> out;
  for (int i0 = 0; i0 < k; ++i0) {
    const double c0 = grid.range(0).lo + i0 * h[0];
    const double v0 = a[0] * c0 - y;
    for (int i1 = 0; i1 < k; ++i1) {
      const double c1 = grid.range(1).lo + i1 * h[1];
      const double v01 = v0 + a[1] * c1;
      for (int i2 = 0; i2 < k; ++i2) {
        const double c2 = grid.range(2).lo + i2 * h[2];
        const double corner_val = v01 + a[2] * c2;
        if (corner_val + neg > 0.0 || corner_val + pos < 0.0) continue;
        const double area = detail::cell_section_area({c0, c1, c2}, h, a, y, eps);
        if (area > area_floor) {
          const std::size_t flat =
              (static_cast<std::size_t>(i0) * static_cast<std::size_t>(k) + static_cast<std::size_t>(i1)) *
                  static_cast<std::size_t>(k) +
              static_cast<std::size_t>(i2);
          out.emplace_back(static_cast<std::uint32_t>(flat), area);
        }
      }
    }
  }
  return out;
}

// Sparse n x m operator in CSR layout: row i holds the measure of the
// intersection of sample i's hyperplane with each grid cell. Rows whose
// hyperplane misses the box entirely stay empty and are counted. The grid and
// the sample are retained so folds can be re-sliced without redoing geometry.
class OperatorMatrix {
 public:
  OperatorMatrix(Grid grid, SampleMatrix sample, std::vector<std::size_t> row_ptr,
                 std::vector<std::uint32_t> col, std::vector<double> val)
      : grid_(std::move(grid)),
        sample_(std::move(sample)),
        row_ptr_(std::move(row_ptr)),
        col_(std::move(col)),
        val_(std::move(val)) {
    if (row_ptr_.size() != sample_.rows() + 1 || row_ptr_.back() != col_.size() ||
        col_.size() != val_.size()) {
      throw std::invalid_argument("operator: inconsistent CSR arrays");
    }
    zero_rows_ = 0;
    for (std::size_t i = 0; i < n_rows(); ++i) {
      if (row_ptr_[i + 1] == row_ptr_[i]) ++zero_rows_;
    }
  }

  std::size_t n_rows() const { return sample_.rows(); }
  std::size_t n_cols() const { return grid_.cell_count(); }
  std::size_t nnz() const { return val_.size(); }
  std::size_t zero_row_count() const { return zero_rows_; }
  const Grid& grid() const { return grid_; }
  const SampleMatrix& sample() const { return sample_; }

  std::span<const std::uint32_t> row_cols(std::size_t i) const {
    return std::span<const std::uint32_t>(col_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]);
  }
  std::span<const double> row_vals(std::size_t i) const {
    return std::span<const double>(val_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]);
  }

  double row_sum(std::size_t i) const {
    double s = 0.0;
    for (double v : row_vals(i)) s += v;
    return s;
  }

  // y = T f
  void apply_into(std::span<const double> f, std::span<double> y) const {
    if (f.size() != n_cols() || y.size() != n_rows()) {
      throw std::invalid_argument("operator: dimension mismatch in apply");
    }
    for (std::size_t i = 0; i < n_rows(); ++i) {
      double acc = 0.0;
      const std::size_t b = row_ptr_[i], e = row_ptr_[i + 1];
      for (std::size_t p = b; p < e; ++p) acc += val_[p] * f[col_[p]];
      y[i] = acc;
    }
  }

  std::vector<double> apply(std::span<const double> f) const {
    std::vector<double> y(n_rows());
    apply_into(f, y);
    return y;
  }

  // out_j += sum_i w_i T_ij (transpose action, fixed row order)
  void add_rows_scaled(std::span<const double> w, std::span<double> out) const {
    if (w.size() != n_rows() || out.size() != n_cols()) {
      throw std::invalid_argument("operator: dimension mismatch in transpose apply");
    }
    for (std::size_t i = 0; i < n_rows(); ++i) {
      const double wi = w[i];
      if (wi == 0.0) continue;
      const std::size_t b = row_ptr_[i], e = row_ptr_[i + 1];
      for (std::size_t p = b; p < e; ++p) out[col_[p]] += wi * val_[p];
    }
  }

  // new operator holding the given rows (in order); geometry is reused
  OperatorMatrix select_rows(const std::vector<std::size_t>& rows) const {
    std::vector<std::size_t> rp(rows.size() + 1, 0);
    std::size_t nnz_out = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] >= n_rows()) throw std::out_of_range("operator: row index out of range");
      nnz_out += row_ptr_[rows[r] + 1] - row_ptr_[rows[r]];
      rp[r + 1] = nnz_out;
    }
    std::vector<std::uint32_t> c(nnz_out);
    std::vector<double> v(nnz_out);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t b = row_ptr_[rows[r]];
      const std::size_t len = row_ptr_[rows[r] + 1] - b;
      std::copy_n(col_.begin() + static_cast<std::ptrdiff_t>(b), len,
                  c.begin() + static_cast<std::ptrdiff_t>(rp[r]));
      std::copy_n(val_.begin() + static_cast<std::ptrdiff_t>(b), len,
                  v.begin() + static_cast<std::ptrdiff_t>(rp[r]));
    }
    return OperatorMatrix(grid_, sample_.select_rows(rows), std::move(rp), std::move(c),
                          std::move(v));
  }

  void dump(const std::string& path) const;
  static OperatorMatrix load(const std::string& path, SampleMatrix sample);

 private:
  Grid grid_;
  SampleMatrix sample_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> col_;
  std::vector<double> val_;
  std::size_t zero_rows_ = 0;
};

// Assembles the discrete operator, one sparse row per sample. Rows are built
// in parallel and stitched in sample order, so the result is deterministic.
inline OperatorMatrix build_operator(const SampleMatrix& sample, const Grid& grid) {
  if (sample.rows() == 0) throw std::invalid_argument("build_operator: empty sample");
  if (sample.coef_dim() != static_cast<std::size_t>(grid.dim())) {
    throw std::invalid_argument("build_operator: sample columns must equal grid dim + 1");
  }
  if (!sample.all_finite()) {
    throw std::invalid_argument("build_operator: sample contains non-finite entries");
  }

  const std::size_t n = sample.rows();
  std::vector<std::vector<SparseEntry>> rows(n);
  if (grid.dim() == 2) {
    parallel_for(0, n, [&](std::size_t i) {
      rows[i] = row_2d({sample(i, 0), sample(i, 1)}, sample.y(i), grid);
    });
  } else {
    parallel_for(0, n, [&](std::size_t i) {
      rows[i] = row_3d({sample(i, 0), sample(i, 1), sample(i, 2)}, sample.y(i), grid);
    });
  }

  std::vector<std::size_t> row_ptr(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) row_ptr[i + 1] = row_ptr[i] + rows[i].size();
  std::vector<std::uint32_t> col(row_ptr.back());
  std::vector<double> val(row_ptr.back());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t p = row_ptr[i];
    for (const auto& [c, v] : rows[i]) {
      col[p] = c;
      val[p] = v;
      ++p;
    }
  }
  return OperatorMatrix(grid, sample, std::move(row_ptr), std::move(col), std::move(val));
}

// --- binary cache ---------------------------------------------------------
//
// Little-endian layout:
//   char[4] "RCOP", u32 version=1,
//   u64 n, u64 m, u64 nnz,
//   u32 dim, u32 k, f64 lo/hi per axis,
//   u64 row_ptr[n+1], u32 col[nnz], f64 val[nnz]
// The sample is not stored; load() re-attaches the caller's sample after a
// row-count check.

namespace detail {

template <class T>
void write_pod(std::FILE* f, const T& v) {
  if (std::fwrite(&v, sizeof(T), 1, f) != 1) throw std::runtime_error("operator cache: write failed");
}

template <class T>
void write_vec(std::FILE* f, const std::vector<T>& v) {
  if (!v.empty() && std::fwrite(v.data(), sizeof(T), v.size(), f) != v.size()) {
    throw std::runtime_error("operator cache: write failed");
  }
}

template <class T>
void read_pod(std::FILE* f, T& v) {
  if (std::fread(&v, sizeof(T), 1, f) != 1) throw std::runtime_error("operator cache: truncated file");
}

template <class T>
void read_vec(std::FILE* f, std::vector<T>& v, std::size_t count) {
  v.resize(count);
  if (count > 0 && std::fread(v.data(), sizeof(T), count, f) != count) {
    throw std::runtime_error("operator cache: truncated file");
  }
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace detail

inline void OperatorMatrix::dump(const std::string& path) const {
  std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("operator cache: cannot open '" + path + "' for writing");
  const char magic[4] = {'R', 'C', 'O', 'P'};
  if (std::fwrite(magic, 1, 4, f.get()) != 4) throw std::runtime_error("operator cache: write failed");
  detail::write_pod(f.get(), std::uint32_t{1});
  detail::write_pod(f.get(), static_cast<std::uint64_t>(n_rows()));
  detail::write_pod(f.get(), static_cast<std::uint64_t>(n_cols()));
  detail::write_pod(f.get(), static_cast<std::uint64_t>(nnz()));
  detail::write_pod(f.get(), static_cast<std::uint32_t>(grid_.dim()));
  detail::write_pod(f.get(), static_cast<std::uint32_t>(grid_.points_per_axis()));
  for (int a = 0; a < grid_.dim(); ++a) {
    detail::write_pod(f.get(), grid_.range(a).lo);
    detail::write_pod(f.get(), grid_.range(a).hi);
  }
  std::vector<std::uint64_t> rp(row_ptr_.begin(), row_ptr_.end());
  detail::write_vec(f.get(), rp);
  detail::write_vec(f.get(), col_);
  detail::write_vec(f.get(), val_);
}

inline OperatorMatrix OperatorMatrix::load(const std::string& path, SampleMatrix sample) {
  std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("operator cache: cannot open '" + path + "'");
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "RCOP", 4) != 0) {
    throw std::runtime_error("operator cache: bad magic");
  }
  std::uint32_t version;
  detail::read_pod(f.get(), version);
  if (version != 1) throw std::runtime_error("operator cache: unsupported version");
  std::uint64_t n, m, nnz;
  detail::read_pod(f.get(), n);
  detail::read_pod(f.get(), m);
  detail::read_pod(f.get(), nnz);
  std::uint32_t dim, k;
  detail::read_pod(f.get(), dim);
  detail::read_pod(f.get(), k);
  std::vector<AxisRange> ranges(dim);
  for (auto& r : ranges) {
    detail::read_pod(f.get(), r.lo);
    detail::read_pod(f.get(), r.hi);
  }
  Grid grid(static_cast<int>(k), static_cast<int>(dim), std::move(ranges));
  if (grid.cell_count() != m) throw std::runtime_error("operator cache: grid/cell-count mismatch");
  if (sample.rows() != n) throw std::runtime_error("operator cache: sample row count mismatch");

  std::vector<std::uint64_t> rp64;
  detail::read_vec(f.get(), rp64, n + 1);
  std::vector<std::uint32_t> col;
  detail::read_vec(f.get(), col, nnz);
  std::vector<double> val;
  detail::read_vec(f.get(), val, nnz);
  std::vector<std::size_t> rp(rp64.begin(), rp64.end());
  return OperatorMatrix(std::move(grid), std::move(sample), std::move(rp), std::move(col),
                        std::move(val));
}

}  // namespace rcdens
