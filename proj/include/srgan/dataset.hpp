#pragma once

// Polynomial coefficient-estimation benchmark.
//
// Each example concatenates noisy samples of five random quartic polynomials
// y = a4 x^4 + a3 x^3 + a2 x^2 + a1 x on a 10-point grid over [-1, 1]. The
// label is a3 of the first polynomial; the remaining 40 observations are
// distractors independent of the label.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "srgan/tensor.hpp"

namespace srgan {

using Rng = std::mt19937_64;

inline constexpr std::size_t kPointsPerPolynomial = 10;
inline constexpr std::size_t kPolynomialsPerExample = 5;
inline constexpr std::size_t kObservationCount = kPointsPerPolynomial * kPolynomialsPerExample;
inline constexpr double kDefaultNoiseSigma = 0.1;

struct PolynomialCoeffs {
    double a1 = 1.0;
    double a2 = 0.0;
    double a3 = 0.0;
    double a4 = 0.0;
};

struct Example {
    std::array<double, kObservationCount> observations{};
    std::optional<double> label;

    bool operator==(const Example&) const = default;
};

struct DatasetBundle {
    std::vector<Example> labeled;
    std::vector<Example> unlabeled;
    std::vector<Example> test;
    std::uint64_t seed = 0;
    double noise_sigma = kDefaultNoiseSigma;

    bool operator==(const DatasetBundle&) const = default;
};

PolynomialCoeffs sample_coeffs(Rng& rng);
double evaluate_polynomial(const PolynomialCoeffs& c, double x);
/// The 10-point inclusive grid over [-1, 1].
const std::array<double, kPointsPerPolynomial>& sample_grid();
std::array<double, kPointsPerPolynomial> sample_points(const PolynomialCoeffs& c);
/// Throws std::invalid_argument for negative noise_sigma.
Example generate_example(Rng& rng, double noise_sigma);

/// Generates test, then labeled, then unlabeled examples from one stream
/// seeded with `seed`, so the test and labeled sets never depend on n_unlabeled.
DatasetBundle build_bundle(std::uint64_t seed, std::size_t n_labeled, std::size_t n_unlabeled,
                           std::size_t n_test, double noise_sigma = kDefaultNoiseSigma);

/// Observation matrix (n x 50) and label column (n x 1) for a set of examples.
Tensor observations_matrix(std::span<const Example> examples);
Tensor labels_column(std::span<const Example> examples);

/// FNV-1a over every observation and label bit pattern plus the seed.
std::uint64_t bundle_checksum(const DatasetBundle& bundle);

/// CSV with a "# seed=..." metadata line, then rows
/// `set,obs0..obs49,label` (label empty for unlabeled rows), 17 significant digits.
void write_bundle_csv(const DatasetBundle& bundle, const std::filesystem::path& path);
DatasetBundle read_bundle_csv(const std::filesystem::path& path);

}  // namespace srgan
