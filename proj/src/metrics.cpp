#include "srgan/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace srgan {

void PredictionSet::validate() const {
    if (predicted.size() != actual.size()) {
        throw std::invalid_argument("prediction set: " + std::to_string(predicted.size()) +
                                    " predictions vs " + std::to_string(actual.size()) + " actuals");
    }
    if (predicted.empty()) throw std::invalid_argument("prediction set is empty");
}

double mae(const PredictionSet& p) {
    p.validate();
    double total = 0.0;
    for (std::size_t i = 0; i < p.actual.size(); ++i) total += std::abs(p.predicted[i] - p.actual[i]);
    return total / static_cast<double>(p.actual.size());
}

double rmse(const PredictionSet& p) {
    p.validate();
    double total = 0.0;
    for (std::size_t i = 0; i < p.actual.size(); ++i) {
        const double e = p.predicted[i] - p.actual[i];
        total += e * e;
    }
    return std::sqrt(total / static_cast<double>(p.actual.size()));
}

double nae_range(const PredictionSet& p, double y_min, double y_max) {
    if (!(y_max > y_min)) throw std::invalid_argument("nae_range: degenerate label range");
    return mae(p) / (y_max - y_min) * 100.0;
}

double nae_relative(const PredictionSet& p) {
    p.validate();
    double total = 0.0;
    for (std::size_t i = 0; i < p.actual.size(); ++i) {
        if (!(p.actual[i] > 0.0)) throw std::invalid_argument("nae_relative: actual values must be positive");
        total += std::abs(p.predicted[i] - p.actual[i]) / p.actual[i];
    }
    return total / static_cast<double>(p.actual.size());
}

double relative_error(double mae_model, double mae_baseline) {
    if (!(mae_baseline > 0.0)) throw std::invalid_argument("relative_error: baseline MAE must be positive");
    return mae_model / mae_baseline;
}

}  // namespace srgan
