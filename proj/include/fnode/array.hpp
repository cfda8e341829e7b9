#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fnode/errors.hpp"

namespace fnode {

/// Dense row-major 2-D array of doubles. Rows are the "record" axis
/// (time steps, batch rows, grid rows); columns the component axis.
class Array2d {
  public:
    Array2d() = default;
    Array2d(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<const double> flat() const { return data_; }
    std::span<double> flat() { return data_; }

    bool operator==(const Array2d&) const = default;

    bool same_shape(const Array2d& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    void require_shape(std::size_t rows, std::size_t cols, const char* what) const {
        if (rows_ != rows || cols_ != cols)
            throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", got " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace fnode
