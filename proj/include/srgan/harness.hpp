#pragma once

// Sweep runner for the coefficient-estimation study: methods x labeled sizes
// x seeds, with incremental (resumable) result files and aggregate tables.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "srgan/losses.hpp"
#include "srgan/training.hpp"

namespace srgan {

struct SweepConfig {
    std::vector<Method> methods{Method::DNN, Method::SRGAN, Method::DGGAN};
    /// Contrast variants tried for SR-GAN; other methods ignore it.
    std::vector<LossVariant> variants{LossVariant::LogContrast};
    std::vector<std::size_t> labeled_sizes{50, 100, 500, 1000, 5000, 10000};
    std::size_t n_unlabeled = 50'000;
    std::size_t n_test = 1'000;
    std::size_t n_seeds = 3;
    double noise_sigma = kDefaultNoiseSigma;
    TrainConfig base;
    std::filesystem::path output_dir = "sweep_out";
    std::size_t workers = 0;  // 0 = hardware concurrency
    bool write_histories = true;

    /// Throws std::invalid_argument for unsorted sizes, zero seeds or empty lists.
    void validate() const;
};

/// Named presets: "desk" (minutes on one machine) and "paper" (full scale).
SweepConfig preset(std::string_view name);

/// Overlay `key=value` lines (or a JSON object) onto `base`. Keys mirror
/// SweepConfig and TrainConfig fields; lists are comma separated in key=value
/// form and arrays in JSON. Unknown keys throw std::invalid_argument.
SweepConfig parse_sweep_config(std::string_view text, SweepConfig base);
SweepConfig load_sweep_config(const std::filesystem::path& path, SweepConfig base);

struct ExperimentResult {
    Method method = Method::DNN;
    std::optional<LossVariant> variant;  // set for SR-GAN rows only
    std::size_t labeled_size = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    double test_mae = 0.0;
    double wall_time = 0.0;
    std::uint64_t bundle_checksum = 0;
    std::string history_path;
    std::string error;
};

using ResultKey = std::tuple<Method, std::optional<LossVariant>, std::size_t, std::uint64_t>;
ResultKey key_of(const ExperimentResult& r);

/// Result rows in `results.csv`; later rows for the same key win.
std::vector<ExperimentResult> read_results(const std::filesystem::path& path);
std::string format_result_row(const ExperimentResult& r);
inline constexpr std::string_view kResultsHeader =
    "method,variant,labeled_size,seed,status,test_mae,wall_time,bundle_checksum,history,error";

struct SweepProgress {
    std::size_t trials_run = 0;
    std::size_t trials_skipped = 0;
    std::size_t trials_failed = 0;
};

/// For each (size, seed): one bundle seeded with the seed index, every
/// requested method trained on it. Completed rows already present in
/// output_dir/results.csv are skipped. Returned rows are sorted by key.
std::vector<ExperimentResult> run_sweep(const SweepConfig& cfg, SweepProgress* progress = nullptr);

struct Cell {
    std::string method;  // "dnn", "srgan", "dggan" or "srgan-<variant>"
    std::size_t labeled_size = 0;
    std::vector<double> seed_maes;  // ordered by seed
    double mean_mae = 0.0;

    bool operator==(const Cell&) const = default;
};

struct RatioCell {
    std::string method;
    std::size_t labeled_size = 0;
    double ratio = 0.0;

    bool operator==(const RatioCell&) const = default;
};

struct AggregateTables {
    std::vector<Cell> accuracy;        // sorted by (labeled_size, method)
    std::vector<RatioCell> relative;   // model mean / DNN mean per size

    bool operator==(const AggregateTables&) const = default;
};

/// Means over successful seeds. With `with_ratios`, a ratio is formed for
/// every non-DNN cell and a size without a DNN cell throws std::runtime_error.
AggregateTables aggregate(const std::vector<ExperimentResult>& results, bool with_ratios = true);

struct VariantRow {
    LossVariant variant = LossVariant::LogContrast;
    std::vector<double> seed_maes;
    double mean_mae = 0.0;
};

/// SR-GAN at a single labeled size for each variant, same seeds for all.
std::vector<VariantRow> loss_variant_study(SweepConfig cfg, const std::vector<LossVariant>& variants,
                                           std::size_t labeled_size = 500);

/// accuracy.csv: labeled_size,method,mean_mae,n_seeds,seed_maes (';'-joined)
/// relative_error.csv: labeled_size,method,ratio
void emit_plot_data(const AggregateTables& tables, const std::filesystem::path& dir);
AggregateTables read_plot_data(const std::filesystem::path& dir);
void write_variant_table(const std::vector<VariantRow>& rows, const std::filesystem::path& path);

/// Human-readable tables for the `report` command.
std::string format_report(const AggregateTables& tables);

}  // namespace srgan
