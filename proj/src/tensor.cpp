#include "srgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace srgan {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str());
    }
}

Tensor Tensor::from(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("ragged tensor literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor(r, c, std::move(data));
}

std::string Tensor::shape_str() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

double Tensor::item() const {
    if (rows_ != 1 || cols_ != 1) {
        throw std::logic_error("item() on non-scalar tensor " + shape_str());
    }
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(const char* what) const {
    if (!all_finite()) {
        throw std::domain_error(std::string(what) + ": non-finite entry in tensor " + shape_str());
    }
}

Tensor stack_rows(std::span<const Tensor> parts) {
    if (parts.empty()) return {};
    const std::size_t cols = parts.front().cols();
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) {
            throw std::invalid_argument("stack_rows: width mismatch " + parts.front().shape_str() +
                                        " vs " + p.shape_str());
        }
        rows += p.rows();
    }
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const auto& p : parts) data.insert(data.end(), p.values().begin(), p.values().end());
    return Tensor(rows, cols, std::move(data));
}

}  // namespace srgan
