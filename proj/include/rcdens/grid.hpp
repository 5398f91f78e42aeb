#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace rcdens {

inline constexpr int kMaxDim = 3;

// Fixed-capacity coordinate / index carriers; only the first dim() entries
// of a Grid are meaningful.
using Point = std::array<double, kMaxDim>;
using MultiIndex = std::array<int, kMaxDim>;

struct AxisRange {
  double lo;
  double hi;
  double width() const { return hi - lo; }
};

// Regular lattice over coefficient space: k cells per axis on an axis-aligned
// box. Cells are half-open along each axis with the top face of the last cell
// closed, so every point of the box has exactly one owning cell. Flat indices
// are row-major over the multi-index (last axis fastest). Immutable after
// construction and safe to share across threads.
class Grid {
 public:
  // minimal valid grid so value types holding a Grid stay default-constructible
  Grid() : Grid(2, 2) {}

  Grid(int points_per_axis, int dim, std::vector<AxisRange> ranges = {}) {
    if (dim < 2 || dim > kMaxDim) {
      throw std::invalid_argument("grid: dim must be 2 or 3");
    }
    if (points_per_axis < 2) {
      throw std::invalid_argument("grid: need at least 2 cells per axis");
    }
    if (ranges.empty()) ranges.assign(static_cast<std::size_t>(dim), AxisRange{-5.0, 5.0});
    if (static_cast<int>(ranges.size()) != dim) {
      throw std::invalid_argument("grid: one range per axis required");
    }
    dim_ = dim;
    k_ = points_per_axis;
    cell_volume_ = 1.0;
    cells_ = 1;
    for (int a = 0; a < dim_; ++a) {
      if (!(ranges[static_cast<std::size_t>(a)].lo < ranges[static_cast<std::size_t>(a)].hi)) {
        throw std::invalid_argument("grid: axis range must satisfy lo < hi");
      }
      ranges_[static_cast<std::size_t>(a)] = ranges[static_cast<std::size_t>(a)];
      step_[static_cast<std::size_t>(a)] = ranges_[static_cast<std::size_t>(a)].width() / k_;
      cell_volume_ *= step_[static_cast<std::size_t>(a)];
      cells_ *= static_cast<std::size_t>(k_);
    }
  }

  int dim() const { return dim_; }
  int points_per_axis() const { return k_; }
  const AxisRange& range(int axis) const { return ranges_[check_axis(axis)]; }
  double step(int axis) const { return step_[check_axis(axis)]; }
  double cell_volume() const { return cell_volume_; }
  std::size_t cell_count() const { return cells_; }

  double box_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= ranges_[static_cast<std::size_t>(a)].width();
    return v;
  }

  std::size_t flat_index(const MultiIndex& idx) const {
    std::size_t flat = 0;
    for (int a = 0; a < dim_; ++a) {
      const int i = idx[static_cast<std::size_t>(a)];
      if (i < 0 || i >= k_) throw std::out_of_range("grid: multi-index out of range");
      flat = flat * static_cast<std::size_t>(k_) + static_cast<std::size_t>(i);
    }
    return flat;
  }

  MultiIndex multi_index(std::size_t flat) const {
    if (flat >= cells_) throw std::out_of_range("grid: flat index out of range");
    MultiIndex idx{};
    for (int a = dim_ - 1; a >= 0; --a) {
      idx[static_cast<std::size_t>(a)] = static_cast<int>(flat % static_cast<std::size_t>(k_));
      flat /= static_cast<std::size_t>(k_);
    }
    return idx;
  }

  Point cell_center(const MultiIndex& idx) const {
    Point c{};
    for (int a = 0; a < dim_; ++a) {
      const int i = idx[static_cast<std::size_t>(a)];
      if (i < 0 || i >= k_) throw std::out_of_range("grid: multi-index out of range");
      c[static_cast<std::size_t>(a)] =
          ranges_[static_cast<std::size_t>(a)].lo + (i + 0.5) * step_[static_cast<std::size_t>(a)];
    }
    return c;
  }

  Point cell_center(std::size_t flat) const { return cell_center(multi_index(flat)); }

  // Owning cell of p, or nullopt when p is outside the box. Points on the
  // closed upper boundary belong to the last cell along that axis.
  std::optional<MultiIndex> cell_of_point(const Point& p) const {
    MultiIndex idx{};
    for (int a = 0; a < dim_; ++a) {
      const double lo = ranges_[static_cast<std::size_t>(a)].lo;
      const double hi = ranges_[static_cast<std::size_t>(a)].hi;
      const double x = p[static_cast<std::size_t>(a)];
      if (!(x >= lo) || !(x <= hi)) return std::nullopt;
      int i = static_cast<int>(std::floor((x - lo) / step_[static_cast<std::size_t>(a)]));
      if (i >= k_) i = k_ - 1;
      if (i < 0) i = 0;
      idx[static_cast<std::size_t>(a)] = i;
    }
    return idx;
  }

  bool contains(const Point& p) const {
    for (int a = 0; a < dim_; ++a) {
      const auto& r = ranges_[static_cast<std::size_t>(a)];
      const double x = p[static_cast<std::size_t>(a)];
      if (!(x >= r.lo) || !(x <= r.hi)) return false;
    }
    return true;
  }

  // Same lattice with one axis translated by `offset` (used by the shift
  // workflow; cell indices then line up one-to-one with the original grid).
  Grid translated(int axis, double offset) const {
    std::vector<AxisRange> r;
    r.reserve(static_cast<std::size_t>(dim_));
    for (int a = 0; a < dim_; ++a) r.push_back(ranges_[static_cast<std::size_t>(a)]);
    r[static_cast<std::size_t>(check_axis(axis))].lo += offset;
    r[static_cast<std::size_t>(check_axis(axis))].hi += offset;
    return Grid(k_, dim_, std::move(r));
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    if (a.dim_ != b.dim_ || a.k_ != b.k_) return false;
    for (int d = 0; d < a.dim_; ++d) {
      if (a.ranges_[static_cast<std::size_t>(d)].lo != b.ranges_[static_cast<std::size_t>(d)].lo ||
          a.ranges_[static_cast<std::size_t>(d)].hi != b.ranges_[static_cast<std::size_t>(d)].hi) {
        return false;
      }
    }
    return true;
  }
  friend bool operator!=(const Grid& a, const Grid& b) { return !(a == b); }

 private:
  int check_axis(int axis) const {
    if (axis < 0 || axis >= dim_) throw std::out_of_range("grid: axis out of range");
    return axis;
  }

  int dim_ = 2;
  int k_ = 2;
  std::array<AxisRange, kMaxDim> ranges_{};
  std::array<double, kMaxDim> step_{};
  double cell_volume_ = 0.0;
  std::size_t cells_ = 0;
};

inline Grid make_grid(int points_per_axis, int dim, std::vector<AxisRange> ranges = {}) {
  return Grid(points_per_axis, dim, std::move(ranges));
}

}  // namespace rcdens
