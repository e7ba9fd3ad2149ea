#include "srgan/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace srgan {

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("Adam::step: " + std::to_string(params.size()) + " parameters but " +
                                    std::to_string(grads.size()) + " gradients");
    }
    if (m_.empty()) {
        for (const Tensor* p : params) {
            m_.emplace_back(p->rows(), p->cols());
            v_.emplace_back(p->rows(), p->cols());
        }
    } else if (m_.size() != params.size()) {
        throw std::invalid_argument("Adam::step: parameter count changed between steps");
    }

    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = grads[k];
        if (!p.same_shape(g) || !p.same_shape(m_[k])) {
            throw std::invalid_argument("Adam::step: shape mismatch in slot " + std::to_string(k) + ": " +
                                        p.shape_str() + " vs " + g.shape_str());
        }
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

void Adam::step(Mlp& net, std::span<const Tensor> grads) {
    std::vector<Tensor*> params;
    params.reserve(2 * net.weights.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        params.push_back(&net.weights[l]);
        params.push_back(&net.biases[l]);
    }
    step(params, grads);
}

}  // namespace srgan
