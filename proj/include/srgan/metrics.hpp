#pragma once

#include <span>
#include <vector>

namespace srgan {

/// Paired predictions and ground truth.
struct PredictionSet {
    std::vector<double> predicted;
    std::vector<double> actual;

    /// Throws std::invalid_argument unless both lists are non-empty and equally long.
    void validate() const;
};

double mae(const PredictionSet& p);
double rmse(const PredictionSet& p);
/// Mean |y - y_hat| / (y_max - y_min), as a percentage.
double nae_range(const PredictionSet& p, double y_min, double y_max);
/// Mean |y_hat - y| / y; every actual must be positive.
double nae_relative(const PredictionSet& p);
/// mae_model / mae_baseline; baseline must be positive.
double relative_error(double mae_model, double mae_baseline);

}  // namespace srgan
