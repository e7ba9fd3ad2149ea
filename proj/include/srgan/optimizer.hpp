#pragma once

#include <span>
#include <vector>

#include "srgan/models.hpp"
#include "srgan/tensor.hpp"

namespace srgan {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias-corrected moment estimates:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    /// params[i] is updated with grads[i]. Slot layout is fixed by the first call.
    void step(std::span<Tensor* const> params, std::span<const Tensor> grads);
    /// Updates every weight and bias of `net`; grads ordered w0, b0, w1, b1, ...
    void step(Mlp& net, std::span<const Tensor> grads);

    long steps_taken() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    long t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace srgan
