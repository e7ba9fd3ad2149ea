#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "srgan/dataset.hpp"
#include "srgan/losses.hpp"
#include "srgan/models.hpp"
#include "srgan/optimizer.hpp"

namespace srgan {

enum class Method { DNN, SRGAN, DGGAN };

std::string_view to_string(Method m) noexcept;
/// Accepts "dnn", "srgan", "dggan".
Method parse_method(std::string_view name);

struct TrainConfig {
    Method method = Method::SRGAN;
    LossVariant variant = LossVariant::LogContrast;
    long steps = 50'000;
    std::size_t batch_labeled = 32;
    std::size_t batch_unlabeled = 32;
    std::size_t batch_fake = 32;
    double learning_rate_d = 1e-3;
    double learning_rate_g = 1e-3;
    double lambda = kDefaultPenaltyWeight;
    std::size_t noise_dim = kDefaultNoiseDim;
    std::uint64_t seed = 0;
    long eval_interval = 1'000;

    /// Throws std::invalid_argument for non-positive counts or rates.
    void validate() const;
};

struct HistoryEntry {
    long step = 0;
    LossReport losses;
    double test_mae = 0.0;

    bool operator==(const HistoryEntry& o) const;
};

using TrainHistory = std::vector<HistoryEntry>;

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

/// Rows drawn for one step. Everything random in a step lives here, so an
/// objective can be recomputed on exactly the same inputs.
struct StepBatches {
    Tensor labeled;        // batch_labeled x 50
    Tensor labels;         // batch_labeled x 1
    Tensor unlabeled;      // batch_unlabeled x 50 (empty for DNN)
    Tensor noise;          // batch_fake x noise_dim (empty for DNN)
    std::vector<double> alpha;  // interpolation weight per row (SR-GAN)
};

/// How much data each population actually fed into training.
struct UsageCounters {
    std::uint64_t labeled_rows = 0;
    std::uint64_t unlabeled_rows = 0;
    std::uint64_t fake_rows = 0;
    std::uint64_t discriminator_updates = 0;
    std::uint64_t generator_updates = 0;
};

/// Thrown when a loss becomes non-finite; carries the offending report.
class TrainingAborted : public std::runtime_error {
public:
    TrainingAborted(const std::string& what, LossReport last)
        : std::runtime_error(what), last_(last) {}
    const LossReport& last_report() const noexcept { return last_; }

private:
    LossReport last_;
};

/// Draws index batches without replacement per epoch, or with replacement
/// when the pool is smaller than a batch.
class MinibatchSampler {
public:
    MinibatchSampler(std::size_t pool, std::size_t batch);
    std::vector<std::size_t> next(Rng& rng);

private:
    std::size_t pool_;
    std::size_t batch_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

/// One training run. Owns the networks, optimizers and random streams; the
/// whole run is a pure function of (config, bundle).
class Trainer {
public:
    Trainer(TrainConfig config, const DatasetBundle& bundle);

    StepBatches sample_batches();
    /// Objective terms at the current parameters, without updating anything.
    LossReport discriminator_objective(const StepBatches& batches) const;
    double generator_objective(const StepBatches& batches) const;
    /// One Adam update of the discriminator; returns the pre-update losses.
    LossReport discriminator_step(const StepBatches& batches);
    /// One Adam update of the generator against the current discriminator.
    double generator_step(const StepBatches& batches);
    /// sample_batches + discriminator_step + generator_step (when there is a generator).
    LossReport step();

    double test_mae() const;
    /// Runs the configured number of steps, recording history every eval_interval.
    TrainHistory run();

    const TrainConfig& config() const noexcept { return config_; }
    const Discriminator& discriminator() const noexcept { return d_; }
    const std::optional<Generator>& generator() const noexcept { return g_; }
    const UsageCounters& counters() const noexcept { return counters_; }
    long steps_done() const noexcept { return step_; }

private:
    struct Objective;
    Objective build_discriminator_objective(Tape& tape, const StepBatches& b, bool trainable) const;
    Tensor fake_batch(const Tensor& noise) const;

    TrainConfig config_;
    const DatasetBundle* bundle_;
    Tensor labeled_x_, labeled_y_, unlabeled_x_, test_x_;
    std::vector<double> test_y_;
    Discriminator d_;
    std::optional<Generator> g_;
    Adam adam_d_;
    Adam adam_g_;
    Rng sample_rng_;
    MinibatchSampler labeled_sampler_;
    std::optional<MinibatchSampler> unlabeled_sampler_;
    UsageCounters counters_;
    long step_ = 0;
};

struct TrainResult {
    Discriminator discriminator;
    std::optional<Generator> generator;
    TrainHistory history;
    UsageCounters counters;
    double test_mae = 0.0;
};

TrainResult train(const TrainConfig& config, const DatasetBundle& bundle);

/// Mean |D(x) - y| over labeled examples. Throws on an empty set.
double evaluate(const Discriminator& model, std::span<const Example> test_set);

}  // namespace srgan
