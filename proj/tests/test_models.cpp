#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "srgan/models.hpp"

using namespace srgan;
using oracle::random_tensor;

TEST_CASE("default layouts") {
    const MlpSpec d = discriminator_spec();
    CHECK(d.widths == std::vector<std::size_t>{50, 10, 10, 10, 10, 1});
    CHECK(d.feature_width() == 10);
    CHECK(d.feature_layer == 3);
    CHECK(discriminator_spec(2).output_width() == 2);
    const MlpSpec g = generator_spec();
    CHECK(g.widths == std::vector<std::size_t>{10, 10, 10, 10, 10, 50});
    CHECK_THROWS_AS((MlpSpec{{50, 1}, 0.1, 0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((MlpSpec{{50, 10, 1}, 0.1, 1}.validate()), std::invalid_argument);
}

TEST_CASE("zero parameters give zero outputs") {
    std::mt19937_64 rng(0);
    const Mlp d = zero_parameters(discriminator_spec());
    CHECK(predict(d, random_tensor(rng, 5, 50)) == Tensor(5, 1));
    const Mlp g = zero_parameters(generator_spec());
    Tape t;
    const Var fake = generator_forward(bind(t, g, false), t.constant(random_tensor(rng, 3, 10)));
    CHECK(fake.value() == Tensor(3, 50));
}

TEST_CASE("rows are independent") {
    std::mt19937_64 rng(1);
    const Mlp d = init_parameters(discriminator_spec(), rng);
    const Tensor batch = random_tensor(rng, 32, 50, -3.0, 3.0);
    const Tensor all = predict(d, batch);
    for (std::size_t r : {0u, 17u, 31u}) {
        Tensor one(1, 50, std::vector<double>(batch.row(r).begin(), batch.row(r).end()));
        CHECK(predict(d, one)(0, 0) == all(r, 0));
    }
}

TEST_CASE("forward pass matches a plain-array oracle") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const Mlp d = init_parameters(discriminator_spec(), rng);
        const Tensor x = random_tensor(rng, 6, 50, -4.0, 4.0);
        const oracle::PlainForward ref = oracle::plain_forward(d, x);
        Tape t;
        const DiscriminatorOutput out = discriminator_forward(bind(t, d, false), t.constant(x));
        for (std::size_t r = 0; r < x.rows(); ++r) {
            CHECK(std::abs(out.prediction.value()(r, 0) - ref.output[r][0]) <= 1e-12);
            for (std::size_t j = 0; j < 10; ++j) CHECK(std::abs(out.features.value()(r, j) - ref.features[r][j]) <= 1e-12);
        }
        CHECK_FALSE(out.realness_logit.has_value());
    }
}

TEST_CASE("dual-goal head splits regression and realness columns") {
    std::mt19937_64 rng(3);
    const Mlp d = init_parameters(discriminator_spec(2), rng);
    const Tensor x = random_tensor(rng, 4, 50);
    const Tensor full = predict(d, x);
    Tape t;
    const DiscriminatorOutput out = discriminator_forward(bind(t, d, false), t.constant(x));
    REQUIRE(out.realness_logit.has_value());
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(out.prediction.value()(r, 0) == full(r, 0));
        CHECK(out.realness_logit->value()(r, 0) == full(r, 1));
    }
}

TEST_CASE("output is unbounded") {
    std::mt19937_64 rng(4);
    const Mlp d = init_parameters(discriminator_spec(), rng);
    const Tensor x = random_tensor(rng, 1, 50);
    double best = 0.0;
    for (double c : {1.0, 1e2, 1e4}) {
        Tensor scaled = x;
        for (double& v : scaled.values()) v *= c;
        best = std::max(best, std::abs(predict(d, scaled)(0, 0)));
    }
    CHECK(best > 1.0);
}

TEST_CASE("input width mismatch throws") {
    std::mt19937_64 rng(5);
    const Mlp d = init_parameters(discriminator_spec(), rng);
    CHECK_THROWS_AS(predict(d, Tensor(2, 49)), std::invalid_argument);
    Tape t;
    const Mlp g = init_parameters(generator_spec(), rng);
    CHECK_THROWS_AS(generator_forward(bind(t, g, false), t.constant(Tensor(2, 11))), std::invalid_argument);
}

TEST_CASE("generator output shape and purity") {
    std::mt19937_64 rng(6);
    const Mlp g = init_parameters(generator_spec(), rng);
    for (std::size_t n : {1u, 7u, 32u}) {
        const Tensor z = sample_noise(rng, n, kDefaultNoiseDim);
        Tape t;
        const BoundMlp b = bind(t, g, false);
        const Var a = generator_forward(b, t.constant(z));
        const Var c = generator_forward(b, t.constant(z));
        CHECK(a.rows() == n);
        CHECK(a.cols() == 50);
        CHECK(a.value() == c.value());
    }
}

TEST_CASE("Glorot initialization") {
    std::mt19937_64 a(7), b(7);
    const Mlp net = init_parameters(discriminator_spec(), a);
    CHECK(net == init_parameters(discriminator_spec(), b));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const Tensor& w = net.weights[l];
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (double v : w.values()) CHECK(std::abs(v) <= limit);
        CHECK(net.biases[l] == Tensor(1, w.cols()));
    }
}

TEST_CASE("parameter hash tracks every parameter") {
    std::mt19937_64 rng(8);
    Mlp net = init_parameters(discriminator_spec(), rng);
    const std::uint64_t h = parameter_hash(net);
    net.biases[2][3] = 1e-300;
    CHECK(parameter_hash(net) != h);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    std::mt19937_64 rng(9);
    const Mlp net = init_parameters(discriminator_spec(2), rng);
    const auto path = std::filesystem::temp_directory_path() / "srgan_model.ckpt";
    save_checkpoint(net, {42, 1234}, path);
    CheckpointInfo info;
    const Mlp back = load_checkpoint(path, &info);
    CHECK(back == net);
    CHECK(info.seed == 42);
    CHECK(info.step == 1234);
    const Tensor x = random_tensor(rng, 5, 50);
    CHECK(predict(back, x) == predict(net, x));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
}
