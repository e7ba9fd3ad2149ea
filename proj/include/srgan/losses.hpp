#pragma once

// SR-GAN objective terms as graph constructions.
//
// All feature comparisons go through the feature distance vector
// d_f = |mean f(batch_1) - mean f(batch_2)|:
//   unlabeled loss   ||d_f(labeled, unlabeled)||_2^2
//   fake loss        -||phi(d_f(fake, unlabeled))||_1   phi = log(.+1), sqrt(.+1) or identity
//   generator loss   ||d_f(fake, unlabeled)||_2^2       (unsquared for the linear variant)

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srgan/autodiff.hpp"
#include "srgan/dataset.hpp"
#include "srgan/models.hpp"

namespace srgan {

enum class LossVariant {
    LogContrast,
    SqrtContrast,
    LinearContrast,
};

std::string_view to_string(LossVariant v) noexcept;
/// Accepts "log", "sqrt", "linear" (case-sensitive). Throws std::invalid_argument otherwise.
LossVariant parse_loss_variant(std::string_view name);

inline constexpr double kDefaultPenaltyWeight = 10.0;

struct LossReport {
    long step = 0;
    double labeled_loss = 0.0;
    double unlabeled_loss = 0.0;
    double fake_loss = 0.0;
    double gradient_penalty = 0.0;
    double generator_loss = 0.0;

    bool all_finite() const noexcept;
    double discriminator_total() const noexcept {
        return labeled_loss + unlabeled_loss + fake_loss + gradient_penalty;
    }
};

/// Header `step,labeled,unlabeled,fake,penalty,generator`.
void write_loss_csv_header(std::ostream& out);
void write_loss_csv_row(std::ostream& out, const LossReport& r);

Var feature_distance(Var mean_a, Var mean_b);
/// Mean squared error between predictions (n x 1) and labels (n x 1).
Var labeled_loss(Var predictions, const Tensor& labels);
/// d_f must compare labeled and unlabeled feature means.
Var unlabeled_loss(Var distance);
/// d_f must compare fake and unlabeled feature means.
Var fake_loss(Var distance, LossVariant variant);
Var generator_loss(Var distance, LossVariant variant);

/// One-sided penalty lambda * max(g - 1, 0), where g is the mean squared
/// input-gradient norm of the summed mean features over the interpolated batch
/// alpha * unlabeled + (1 - alpha) * fake, alpha ~ U(0, 1) per row.
Var gradient_penalty(const BoundMlp& discriminator, const Tensor& unlabeled_batch,
                     const Tensor& fake_batch, double lambda, Rng& rng);

/// Row i of the result is alpha[i] * a_i + (1 - alpha[i]) * b_i.
Tensor interpolate_rows(const Tensor& a, const Tensor& b, std::span<const double> alpha);
/// Penalty on an already-interpolated batch.
Var gradient_penalty_at(const BoundMlp& discriminator, const Tensor& interpolated, double lambda);
/// Penalty for a feature mean computed from `interpolated` on the same tape.
Var one_sided_penalty(Var feature_mean, Var interpolated, double lambda);

/// Row role for the dual-goal baseline.
enum class RowRole { Labeled, Unlabeled, Fake };

struct DualGoalLosses {
    Var discriminator;
    Var generator;
};

/// Discriminator: MSE over labeled rows plus mean logistic loss with labeled
/// and unlabeled rows as real, fake rows as fake. Generator: mean logistic
/// loss of fake rows against the real target. `labels` holds one entry per
/// row; entries of non-labeled rows are ignored. Terms over an empty row set
/// contribute zero.
DualGoalLosses dggan_losses(Var predictions, Var realness_logits, const Tensor& labels,
                            std::span<const RowRole> roles);

}  // namespace srgan
