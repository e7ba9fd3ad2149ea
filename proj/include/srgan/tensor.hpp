#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace srgan {

/// Dense row-major 2-D array of doubles.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

    /// Nested-list construction, e.g. Tensor::from({{1, 2}, {3, 4}}).
    static Tensor from(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor scalar(double v) { return Tensor(1, 1, v); }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool same_shape(const Tensor& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_str() const;

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * cols_, cols_);
    }

    /// Scalar value of a 1x1 tensor.
    double item() const;
    bool all_finite() const noexcept;
    /// Throws std::domain_error when any entry is NaN or infinite.
    void require_finite(const char* what) const;

    bool operator==(const Tensor& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Stack the given rows (all of equal width) into one tensor.
Tensor stack_rows(std::span<const Tensor> parts);

}  // namespace srgan
