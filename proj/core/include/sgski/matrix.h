#ifndef SGSKI_MATRIX_H_
#define SGSKI_MATRIX_H_

#include <cstdint>
#include <span>
#include <vector>

#include "sgski/error.h"

namespace sgski {

using Index = std::int64_t;

// Dense row-major matrix of doubles; rows are points or right-hand sides.
class RowMatrix {
 public:
  RowMatrix() = default;
  RowMatrix(Index rows, Index cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), fill) {}
  RowMatrix(Index rows, Index cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(static_cast<Index>(data_.size()) == rows * cols,
            "RowMatrix: data size does not match shape");
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  double& operator()(Index r, Index c) { return data_[r * cols_ + c]; }
  double operator()(Index r, Index c) const { return data_[r * cols_ + c]; }

  std::span<double> row(Index r) {
    return {data_.data() + r * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<const double> row(Index r) const {
    return {data_.data() + r * cols_, static_cast<std::size_t>(cols_)};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const RowMatrix&, const RowMatrix&) = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<double> data_;
};

}  // namespace sgski

#endif  // SGSKI_MATRIX_H_
