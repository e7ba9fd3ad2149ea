#include "srgan/losses.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace srgan {

std::string_view to_string(LossVariant v) noexcept {
    switch (v) {
        case LossVariant::LogContrast: return "log";
        case LossVariant::SqrtContrast: return "sqrt";
        case LossVariant::LinearContrast: return "linear";
    }
    return "?";
}

LossVariant parse_loss_variant(std::string_view name) {
    if (name == "log") return LossVariant::LogContrast;
    if (name == "sqrt") return LossVariant::SqrtContrast;
    if (name == "linear") return LossVariant::LinearContrast;
    throw std::invalid_argument("unknown loss variant '" + std::string(name) + "'");
}

bool LossReport::all_finite() const noexcept {
    return std::isfinite(labeled_loss) && std::isfinite(unlabeled_loss) && std::isfinite(fake_loss) &&
           std::isfinite(gradient_penalty) && std::isfinite(generator_loss);
}

void write_loss_csv_header(std::ostream& out) {
    out << "step,labeled,unlabeled,fake,penalty,generator\n";
}

void write_loss_csv_row(std::ostream& out, const LossReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.labeled_loss,
                  r.unlabeled_loss, r.fake_loss, r.gradient_penalty, r.generator_loss);
    out << buf;
}

Var feature_distance(Var mean_a, Var mean_b) {
    if (mean_a.rows() != 1 || mean_b.rows() != 1 || mean_a.cols() != mean_b.cols()) {
        throw std::invalid_argument("feature_distance: expected two 1xF means, got " +
                                    mean_a.value().shape_str() + " and " + mean_b.value().shape_str());
    }
    return abs(sub(mean_a, mean_b));
}

Var labeled_loss(Var predictions, const Tensor& labels) {
    if (predictions.rows() == 0) throw std::invalid_argument("labeled_loss: empty batch");
    if (!predictions.value().same_shape(labels)) {
        throw std::invalid_argument("labeled_loss: shape mismatch " + predictions.value().shape_str() +
                                    " vs " + labels.shape_str());
    }
    const Var y = predictions.tape->constant(labels);
    return scale(sum(square(sub(predictions, y))), 1.0 / static_cast<double>(labels.rows()));
}

Var unlabeled_loss(Var distance) { return sum(square(distance)); }

Var fake_loss(Var distance, LossVariant variant) {
    switch (variant) {
        case LossVariant::LogContrast: return scale(sum(log1p_abs(distance)), -1.0);
        case LossVariant::SqrtContrast: return scale(sum(sqrt_shift(distance)), -1.0);
        // d_f is non-negative, so the L1 norm is its plain sum.
        case LossVariant::LinearContrast: return scale(sum(abs(distance)), -1.0);
    }
    throw std::invalid_argument("fake_loss: unknown loss variant");
}

Var generator_loss(Var distance, LossVariant variant) {
    switch (variant) {
        case LossVariant::LogContrast:
        case LossVariant::SqrtContrast:
            return sum(square(distance));
        case LossVariant::LinearContrast: {
            const Var s = sum(square(distance));
            // sqrt has an unbounded slope at 0; the squared norm has the same value there.
            if (s.value().item() == 0.0) return s;
            return sqrt(s);
        }
    }
    throw std::invalid_argument("generator_loss: unknown loss variant");
}

Var one_sided_penalty(Var feature_mean, Var interpolated, double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("gradient penalty weight must be >= 0");
    Tape& t = *feature_mean.tape;
    const Var norm_sq = grad_norm_sq_wrt_input(feature_mean, interpolated);
    const Var excess = add(norm_sq, t.constant(Tensor::scalar(-1.0)));
    return scale(leaky_relu(excess, 0.0), lambda);
}

Tensor interpolate_rows(const Tensor& a, const Tensor& b, std::span<const double> alpha) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("interpolate_rows: shape mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    }
    if (alpha.size() != a.rows()) throw std::invalid_argument("interpolate_rows: one alpha per row");
    Tensor mixed(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            mixed(i, j) = alpha[i] * a(i, j) + (1.0 - alpha[i]) * b(i, j);
        }
    }
    return mixed;
}

Var gradient_penalty_at(const BoundMlp& discriminator, const Tensor& interpolated, double lambda) {
    if (discriminator.weights.empty()) throw std::invalid_argument("gradient_penalty: unbound network");
    Tape& t = *discriminator.weights.front().tape;
    const Var x = t.constant(interpolated);
    const DiscriminatorOutput out = discriminator_forward(discriminator, x);
    return one_sided_penalty(mean_rows(out.features), x, lambda);
}

Var gradient_penalty(const BoundMlp& discriminator, const Tensor& unlabeled_batch,
                     const Tensor& fake_batch, double lambda, Rng& rng) {
    if (!unlabeled_batch.same_shape(fake_batch)) {
        throw std::invalid_argument("gradient_penalty: shape mismatch " + unlabeled_batch.shape_str() +
                                    " vs " + fake_batch.shape_str());
    }
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> alpha(unlabeled_batch.rows());
    for (double& a : alpha) a = uniform(rng);
    return gradient_penalty_at(discriminator, interpolate_rows(unlabeled_batch, fake_batch, alpha), lambda);
}

DualGoalLosses dggan_losses(Var predictions, Var realness_logits, const Tensor& labels,
                            std::span<const RowRole> roles) {
    const std::size_t n = predictions.rows();
    if (predictions.cols() != 1 || realness_logits.cols() != 1 || realness_logits.rows() != n ||
        labels.rows() != n || labels.cols() != 1 || roles.size() != n) {
        throw std::invalid_argument("dggan_losses: predictions, logits, labels and roles must all have " +
                                    std::to_string(n) + " rows");
    }
    Tape& t = *predictions.tape;

    std::size_t n_labeled = 0, n_fake = 0;
    for (RowRole r : roles) {
        if (r == RowRole::Labeled) ++n_labeled;
        if (r == RowRole::Fake) ++n_fake;
    }

    // Logistic loss with logit z and target t: softplus(z) - t z.
    const auto weighted_bce = [&](std::span<const double> weights, std::span<const double> targets) {
        Tensor w(n, 1), tw(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = weights[i];
            tw[i] = weights[i] * targets[i];
        }
        return sub(sum(mul_const(softplus(realness_logits), std::move(w))),
                   sum(mul_const(realness_logits, std::move(tw))));
    };

    std::vector<double> mse_w(n, 0.0), bce_w(n, 0.0), target(n, 0.0), gen_w(n, 0.0), gen_target(n, 1.0);
    Tensor y(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const RowRole r = roles[i];
        if (r == RowRole::Labeled) {
            mse_w[i] = 1.0 / static_cast<double>(n_labeled);
            y[i] = labels[i];
        }
        bce_w[i] = 1.0 / static_cast<double>(n);
        target[i] = r == RowRole::Fake ? 0.0 : 1.0;
        if (r == RowRole::Fake) gen_w[i] = 1.0 / static_cast<double>(n_fake);
    }

    Var d_loss = weighted_bce(bce_w, target);
    if (n_labeled > 0) {
        const Var err = sub(predictions, t.constant(std::move(y)));
        Tensor w(n, 1, std::vector<double>(mse_w));
        d_loss = add(sum(mul_const(square(err), std::move(w))), d_loss);
    }
    Var g_loss = n_fake > 0 ? weighted_bce(gen_w, gen_target) : t.constant(Tensor::scalar(0.0));
    return {d_loss, g_loss};
}

}  // namespace srgan
