#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rcdens {

// Dense n x (d+1) observation table, rows laid out [X0, X1, ..., X_{d-1}, Y].
// X0 is identically 1 for models with an intercept.
class SampleMatrix {
 public:
  SampleMatrix() = default;

  SampleMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (cols_ < 2) throw std::invalid_argument("sample: need at least 2 columns");
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("sample: data size does not match shape");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  // number of coefficient coordinates (= grid dimension when paired)
  std::size_t coef_dim() const { return cols_ - 1; }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_.data() + i * cols_, cols_);
  }

  double y(std::size_t i) const { return data_[i * cols_ + cols_ - 1]; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool has_intercept_column() const {
    for (std::size_t i = 0; i < rows_; ++i) {
      if (data_[i * cols_] != 1.0) return false;
    }
    return rows_ > 0;
  }

  // rows re-assembled in the given order (used for fold slicing and subsampling)
  SampleMatrix select_rows(const std::vector<std::size_t>& rows) const {
    std::vector<double> out;
    out.reserve(rows.size() * cols_);
    for (std::size_t r : rows) {
      if (r >= rows_) throw std::out_of_range("sample: row index out of range");
      out.insert(out.end(), data_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
                 data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_));
    }
    return SampleMatrix(rows.size(), cols_, std::move(out));
  }

  // copy with a constant added to every Y (the intercept-shift transform)
  SampleMatrix with_shifted_y(double offset) const {
    std::vector<double> out = data_;
    for (std::size_t i = 0; i < rows_; ++i) out[i * cols_ + cols_ - 1] += offset;
    return SampleMatrix(rows_, cols_, std::move(out));
  }

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 2;
  std::vector<double> data_;
};

}  // namespace rcdens
