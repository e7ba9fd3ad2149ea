#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "srgan/dataset.hpp"

using namespace srgan;

namespace {

// Least-squares fit of y = a1 x + a2 x^2 + a3 x^3 + a4 x^4 on the grid,
// solved from the 4x4 normal equations by Gaussian elimination.
std::array<double, 4> fit_quartic(std::span<const double> y) {
    const auto& grid = sample_grid();
    double a[4][5] = {};
    for (std::size_t k = 0; k < grid.size(); ++k) {
        double basis[4];
        for (int p = 0; p < 4; ++p) basis[p] = std::pow(grid[k], p + 1);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) a[i][j] += basis[i] * basis[j];
            a[i][4] += basis[i] * y[k];
        }
    }
    for (int c = 0; c < 4; ++c) {
        int pivot = c;
        for (int r = c + 1; r < 4; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
        }
        std::swap(a[c], a[pivot]);
        for (int r = 0; r < 4; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            for (int k = c; k < 5; ++k) a[r][k] -= f * a[c][k];
        }
    }
    return {a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]};
}

}  // namespace

TEST_CASE("coefficient draws") {
    Rng rng(0);
    double a3_sum = 0.0;
    for (int i = 0; i < 10'000; ++i) {
        const PolynomialCoeffs c = sample_coeffs(rng);
        CHECK(c.a1 == 1.0);
        CHECK(std::abs(c.a2) >= 1.0);
        CHECK(std::abs(c.a2) <= 2.0);
        CHECK(std::abs(c.a4) >= 1.0);
        CHECK(std::abs(c.a4) <= 2.0);
        CHECK(std::abs(c.a3) <= 1.0);
        a3_sum += c.a3;
    }
    CHECK(std::abs(a3_sum / 10'000.0) <= 0.05);
}

TEST_CASE("both signs of a2 and a4 occur") {
    Rng rng(4);
    int a2_neg = 0, a4_neg = 0;
    for (int i = 0; i < 1000; ++i) {
        const PolynomialCoeffs c = sample_coeffs(rng);
        a2_neg += c.a2 < 0;
        a4_neg += c.a4 < 0;
    }
    // Bernoulli(1/2): 1000 draws fall in [400, 600] except with probability ~1e-10.
    CHECK(a2_neg > 400);
    CHECK(a2_neg < 600);
    CHECK(a4_neg > 400);
    CHECK(a4_neg < 600);
}

TEST_CASE("polynomial evaluation") {
    CHECK(evaluate_polynomial({1.0, 1.7, -0.3, 1.2}, 0.0) == 0.0);
    CHECK(evaluate_polynomial({1.0, 2.0, -1.0, -1.0}, 1.0) == 1.0);
    CHECK(evaluate_polynomial({1.0, 1.0, 0.0, 0.0}, -1.0) == 0.0);
}

TEST_CASE("sample grid") {
    const auto& grid = sample_grid();
    CHECK(grid.front() == -1.0);
    CHECK(grid.back() == 1.0);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(std::abs(grid[i] - grid[i - 1] - 2.0 / 9.0) <= 1e-12);
    const auto y = sample_points({1.0, 0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(y[i] == grid[i]);
}

TEST_CASE("example generation") {
    Rng a(17), b(17);
    const Example ea = generate_example(a, 0.1);
    const Example eb = generate_example(b, 0.1);
    CHECK(ea == eb);
    CHECK(ea.observations.size() == 50);
    REQUIRE(ea.label.has_value());

    // Noise-free: the label is a3 of the first polynomial drawn from the stream.
    Rng c(23), d(23);
    const Example clean = generate_example(c, 0.0);
    const PolynomialCoeffs first = sample_coeffs(d);
    CHECK(clean.label == first.a3);
    const auto y = sample_points(first);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(clean.observations[i] == y[i]);

    Rng e(1);
    CHECK_THROWS_AS(generate_example(e, -0.1), std::invalid_argument);
}

TEST_CASE("least-squares oracle recovers the label from positions 0-9") {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const Example ex = generate_example(rng, 0.0);
        const auto coeffs = fit_quartic(std::span<const double>(ex.observations.data(), 10));
        CHECK(std::abs(coeffs[0] - 1.0) < 1e-9);
        CHECK(std::abs(coeffs[2] - *ex.label) < 1e-9);
    }
}

TEST_CASE("distractor positions carry no label information") {
    const DatasetBundle b = build_bundle(6, 10'000, 0, 0, 0.1);
    const std::size_t n = b.labeled.size();
    std::vector<double> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = *b.labeled[i].label;
    const double ly = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(n);

    // Sample correlation of the label with every distractor position; with
    // n = 10^4 independent pairs its standard error is 0.01.
    for (std::size_t pos = 10; pos < 50; ++pos) {
        double mx = 0.0;
        for (const Example& e : b.labeled) mx += e.observations[pos];
        mx /= static_cast<double>(n);
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = b.labeled[i].observations[pos] - mx, dy = labels[i] - ly;
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
        CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.05);
    }

    // Shuffling distractor blocks across examples leaves the oracle's
    // predictions unchanged.
    std::vector<Example> shuffled(b.labeled.begin(), b.labeled.begin() + 100);
    Rng rng(3);
    std::vector<std::size_t> perm(shuffled.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
        std::copy(b.labeled[perm[i]].observations.begin() + 10, b.labeled[perm[i]].observations.end(),
                  shuffled[i].observations.begin() + 10);
    }
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
        const auto before = fit_quartic(std::span<const double>(b.labeled[i].observations.data(), 10));
        const auto after = fit_quartic(std::span<const double>(shuffled[i].observations.data(), 10));
        CHECK(before == after);
    }
}

TEST_CASE("bundle stream order and determinism") {
    const DatasetBundle big = build_bundle(0, 50, 50'000, 1000);
    const DatasetBundle small = build_bundle(0, 50, 5'000, 1000);
    CHECK(big.test == small.test);
    CHECK(big.labeled == small.labeled);
    CHECK(big.unlabeled.size() == 50'000);
    CHECK(small.unlabeled.size() == 5'000);
    CHECK(build_bundle(0, 50, 5'000, 1000) == small);

    const DatasetBundle other = build_bundle(1, 50, 5'000, 1000);
    CHECK(other.labeled != small.labeled);
    CHECK(bundle_checksum(other) != bundle_checksum(small));

    for (const Example& e : small.unlabeled) CHECK_FALSE(e.label.has_value());
    for (const Example& e : small.labeled) CHECK(e.label.has_value());
    for (const Example& e : small.test) CHECK(e.label.has_value());
}

TEST_CASE("observation matrix and label column") {
    const DatasetBundle b = build_bundle(3, 4, 0, 0);
    const Tensor x = observations_matrix(b.labeled);
    const Tensor y = labels_column(b.labeled);
    CHECK(x.rows() == 4);
    CHECK(x.cols() == 50);
    CHECK(y.cols() == 1);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(y(i, 0) == *b.labeled[i].label);
        CHECK(x(i, 49) == b.labeled[i].observations[49]);
    }
}

TEST_CASE("CSV round trip is value-exact") {
    const DatasetBundle b = build_bundle(12, 7, 5, 3, 0.25);
    const auto path = std::filesystem::temp_directory_path() / "srgan_bundle_roundtrip.csv";
    write_bundle_csv(b, path);
    const DatasetBundle back = read_bundle_csv(path);
    CHECK(back == b);
    CHECK(bundle_checksum(back) == bundle_checksum(b));
    std::filesystem::remove(path);
}

TEST_CASE("10^5 examples satisfy every invariant") {
    Rng rng(99);
    double label_sum = 0.0, zero_mae = 0.0;
    bool ok = true;
    for (int i = 0; i < 100'000; ++i) {
        const Example e = generate_example(rng, kDefaultNoiseSigma);
        ok = ok && e.label && std::abs(*e.label) <= 1.0;
        label_sum += *e.label;
        zero_mae += std::abs(*e.label);
    }
    CHECK(ok);
    CHECK(std::abs(label_sum / 1e5) <= 0.05);
    CHECK(std::abs(zero_mae / 1e5 - 0.5) <= 0.01);
}
