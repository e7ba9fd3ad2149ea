#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "srgan/metrics.hpp"

using namespace srgan;

TEST_CASE("MAE") {
    CHECK(mae({{1, 2, 3}, {1, 2, 3}}) == 0.0);
    CHECK(mae({{2, 4}, {1, 2}}) == 1.5);
    CHECK(mae({{0}, {-3}}) == 3.0);
    CHECK_THROWS_AS(mae({{1, 2}, {1}}), std::invalid_argument);
    CHECK_THROWS_AS(mae({{}, {}}), std::invalid_argument);
}

TEST_CASE("range-normalized absolute error") {
    CHECK(nae_range({{1, 2}, {1, 2}}, 0, 10) == 0.0);
    CHECK(std::abs(nae_range({{1}, {2}}, 0, 10) - 10.0) <= 1e-12);
    CHECK(std::abs(nae_range({{1, 5}, {0, 2}}, -2, 2) - 50.0) <= 1e-12);
    CHECK_THROWS_AS(nae_range({{1}, {2}}, 3, 3), std::invalid_argument);
}

TEST_CASE("relative absolute error") {
    CHECK(nae_relative({{1, 4}, {1, 4}}) == 0.0);
    CHECK(nae_relative({{2}, {1}}) == 1.0);
    CHECK(nae_relative({{3, 6}, {2, 4}}) == 0.5);
    CHECK_THROWS_AS(nae_relative({{1}, {0}}), std::invalid_argument);
}

TEST_CASE("RMSE") {
    CHECK(rmse({{1, 2}, {1, 2}}) == 0.0);
    CHECK(std::abs(rmse({{3, 4}, {0, 0}}) - std::sqrt(12.5)) <= 1e-12);
    CHECK(std::abs(rmse({{3, 4}, {0, 0}}) - 3.5355) <= 1e-4);
    CHECK(rmse({{5}, {0}}) == 5.0);
}

TEST_CASE("relative error") {
    // Fig. data at 50 labels: SR-GAN 0.103021762 over DNN 0.152554658. The
    // plotted ratio 0.675310500 was rounded from unrounded MAEs; the quotient
    // of the rounded inputs is 0.6753105024, so agreement is to 1e-8.
    CHECK(std::abs(relative_error(0.103021762, 0.152554658) - 0.675310500) <= 1e-8);
    CHECK(relative_error(0.2, 0.2) == 1.0);
    CHECK(relative_error(0.0, 0.3) == 0.0);
    CHECK_THROWS_AS(relative_error(0.1, 0.0), std::invalid_argument);
}

TEST_CASE("MAE never exceeds RMSE and metrics ignore pair order") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::uniform_int_distribution<std::size_t> len(1, 40);
    for (int trial = 0; trial < 500; ++trial) {
        PredictionSet p;
        const std::size_t n = len(rng);
        for (std::size_t i = 0; i < n; ++i) {
            p.predicted.push_back(u(rng));
            p.actual.push_back(u(rng) + 5.1);  // positive for nae_relative
        }
        CHECK(mae(p) <= rmse(p) + 1e-15);

        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        PredictionSet q;
        for (std::size_t i : perm) {
            q.predicted.push_back(p.predicted[i]);
            q.actual.push_back(p.actual[i]);
        }
        CHECK(mae(q) == doctest::Approx(mae(p)).epsilon(1e-12));
        CHECK(rmse(q) == doctest::Approx(rmse(p)).epsilon(1e-12));
        CHECK(nae_relative(q) == doctest::Approx(nae_relative(p)).epsilon(1e-12));
        CHECK(nae_range(q, 0, 10) == doctest::Approx(nae_range(p, 0, 10)).epsilon(1e-12));
    }
}
