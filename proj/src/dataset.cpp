#include "srgan/dataset.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace srgan {

namespace {

double magnitude_one_to_two(Rng& rng) {
    std::bernoulli_distribution negative(0.5);
    std::uniform_real_distribution<double> mag(1.0, 2.0);
    const bool b = negative(rng);
    const double m = mag(rng);
    return b ? -m : m;
}

std::string format_double(double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

double parse_double(std::string_view s) {
    // std::from_chars for double is available in libstdc++ 11.
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::runtime_error("bundle csv: bad number '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace

PolynomialCoeffs sample_coeffs(Rng& rng) {
    PolynomialCoeffs c;
    c.a1 = 1.0;
    c.a2 = magnitude_one_to_two(rng);
    c.a3 = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    c.a4 = magnitude_one_to_two(rng);
    return c;
}

double evaluate_polynomial(const PolynomialCoeffs& c, double x) {
    return ((c.a4 * x + c.a3) * x + c.a2) * x * x + c.a1 * x;
}

const std::array<double, kPointsPerPolynomial>& sample_grid() {
    static const auto grid = [] {
        std::array<double, kPointsPerPolynomial> g{};
        const double step = 2.0 / static_cast<double>(kPointsPerPolynomial - 1);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = -1.0 + step * static_cast<double>(i);
        g.back() = 1.0;
        return g;
    }();
    return grid;
}

std::array<double, kPointsPerPolynomial> sample_points(const PolynomialCoeffs& c) {
    std::array<double, kPointsPerPolynomial> y{};
    const auto& grid = sample_grid();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = evaluate_polynomial(c, grid[i]);
    return y;
}

Example generate_example(Rng& rng, double noise_sigma) {
    if (!(noise_sigma >= 0.0)) {
        throw std::invalid_argument("generate_example: noise_sigma must be >= 0, got " +
                                    std::to_string(noise_sigma));
    }
    Example ex;
    for (std::size_t p = 0; p < kPolynomialsPerExample; ++p) {
        const PolynomialCoeffs c = sample_coeffs(rng);
        if (p == 0) ex.label = c.a3;
        const auto ys = sample_points(c);
        std::copy(ys.begin(), ys.end(), ex.observations.begin() + p * kPointsPerPolynomial);
    }
    if (noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (double& y : ex.observations) y += noise(rng);
    }
    return ex;
}

DatasetBundle build_bundle(std::uint64_t seed, std::size_t n_labeled, std::size_t n_unlabeled,
                           std::size_t n_test, double noise_sigma) {
    Rng rng(seed);
    DatasetBundle b;
    b.seed = seed;
    b.noise_sigma = noise_sigma;
    b.test.reserve(n_test);
    b.labeled.reserve(n_labeled);
    b.unlabeled.reserve(n_unlabeled);
    for (std::size_t i = 0; i < n_test; ++i) b.test.push_back(generate_example(rng, noise_sigma));
    for (std::size_t i = 0; i < n_labeled; ++i) b.labeled.push_back(generate_example(rng, noise_sigma));
    for (std::size_t i = 0; i < n_unlabeled; ++i) {
        Example ex = generate_example(rng, noise_sigma);
        ex.label.reset();
        b.unlabeled.push_back(ex);
    }
    return b;
}

Tensor observations_matrix(std::span<const Example> examples) {
    Tensor m(examples.size(), kObservationCount);
    for (std::size_t i = 0; i < examples.size(); ++i)
        for (std::size_t j = 0; j < kObservationCount; ++j) m(i, j) = examples[i].observations[j];
    return m;
}

Tensor labels_column(std::span<const Example> examples) {
    Tensor y(examples.size(), 1);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (!examples[i].label) throw std::invalid_argument("labels_column: example without label");
        y[i] = *examples[i].label;
    }
    return y;
}

std::uint64_t bundle_checksum(const DatasetBundle& bundle) {
    std::uint64_t h = 1469598103934665603ULL;
    const auto mix = [&h](std::uint64_t word) {
        for (int i = 0; i < 8; ++i) {
            h ^= (word >> (8 * i)) & 0xffU;
            h *= 1099511628211ULL;
        }
    };
    mix(bundle.seed);
    for (const auto* set : {&bundle.test, &bundle.labeled, &bundle.unlabeled}) {
        mix(set->size());
        for (const auto& ex : *set) {
            for (double v : ex.observations) mix(std::bit_cast<std::uint64_t>(v));
            mix(ex.label ? std::bit_cast<std::uint64_t>(*ex.label) : 0x7ff8dead0000beefULL);
        }
    }
    return h;
}

void write_bundle_csv(const DatasetBundle& bundle, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# seed=" << bundle.seed << " noise_sigma=" << format_double(bundle.noise_sigma)
        << " labeled=" << bundle.labeled.size() << " unlabeled=" << bundle.unlabeled.size()
        << " test=" << bundle.test.size() << '\n';
    out << "set";
    for (std::size_t j = 0; j < kObservationCount; ++j) out << ",obs" << j;
    out << ",label\n";
    const auto emit = [&out](const char* name, const std::vector<Example>& set) {
        for (const auto& ex : set) {
            out << name;
            for (double v : ex.observations) out << ',' << format_double(v);
            out << ',';
            if (ex.label) out << format_double(*ex.label);
            out << '\n';
        }
    };
    emit("test", bundle.test);
    emit("labeled", bundle.labeled);
    emit("unlabeled", bundle.unlabeled);
    if (!out) throw std::runtime_error("error writing " + path.string());
}

DatasetBundle read_bundle_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    DatasetBundle b;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        throw std::runtime_error("bundle csv: missing metadata line");
    }
    {
        std::istringstream meta(line.substr(2));
        std::string kv;
        while (meta >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = kv.substr(0, eq);
            const std::string val = kv.substr(eq + 1);
            if (key == "seed") b.seed = std::stoull(val);
            if (key == "noise_sigma") b.noise_sigma = parse_double(val);
        }
    }
    std::getline(in, line);  // column header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (;;) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != kObservationCount + 2) {
            throw std::runtime_error("bundle csv: expected " + std::to_string(kObservationCount + 2) +
                                     " fields, got " + std::to_string(fields.size()));
        }
        Example ex;
        for (std::size_t j = 0; j < kObservationCount; ++j) ex.observations[j] = parse_double(fields[j + 1]);
        if (!fields.back().empty()) ex.label = parse_double(fields.back());
        const std::string_view set = fields.front();
        if (set == "test") b.test.push_back(ex);
        else if (set == "labeled") b.labeled.push_back(ex);
        else if (set == "unlabeled") b.unlabeled.push_back(ex);
        else throw std::runtime_error("bundle csv: unknown set '" + std::string(set) + "'");
    }
    return b;
}

}  // namespace srgan
