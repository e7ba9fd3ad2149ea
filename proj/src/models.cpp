#include "srgan/models.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace srgan {

void MlpSpec::validate() const {
    if (widths.size() < 3) throw std::invalid_argument("MlpSpec: need at least one hidden layer");
    for (std::size_t w : widths) {
        if (w == 0) throw std::invalid_argument("MlpSpec: layer widths must be positive");
    }
    if (feature_layer >= hidden_layers()) {
        throw std::invalid_argument("MlpSpec: feature layer " + std::to_string(feature_layer) +
                                    " out of range for " + std::to_string(hidden_layers()) +
                                    " hidden layers");
    }
    if (!std::isfinite(slope)) throw std::invalid_argument("MlpSpec: slope must be finite");
}

namespace {

MlpSpec hidden_stack(std::size_t in, std::size_t out) {
    MlpSpec s;
    s.widths.push_back(in);
    for (std::size_t i = 0; i < kHiddenLayers; ++i) s.widths.push_back(kHiddenWidth);
    s.widths.push_back(out);
    s.feature_layer = kHiddenLayers - 1;
    return s;
}

}  // namespace

MlpSpec discriminator_spec(std::size_t output_width) {
    return hidden_stack(kObservationCount, output_width);
}

MlpSpec generator_spec(std::size_t noise_dim) { return hidden_stack(noise_dim, kObservationCount); }

Mlp init_parameters(const MlpSpec& spec, Rng& rng) {
    spec.validate();
    Mlp net = zero_parameters(spec);
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        const double fan = static_cast<double>(spec.widths[l] + spec.widths[l + 1]);
        const double limit = std::sqrt(6.0 / fan);
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& w : net.weights[l].values()) w = dist(rng);
    }
    return net;
}

Mlp zero_parameters(const MlpSpec& spec) {
    spec.validate();
    Mlp net;
    net.spec = spec;
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        net.weights.emplace_back(spec.widths[l], spec.widths[l + 1]);
        net.biases.emplace_back(1, spec.widths[l + 1]);
    }
    return net;
}

BoundMlp bind(Tape& tape, const Mlp& net, bool trainable) {
    BoundMlp b;
    b.spec = &net.spec;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        b.weights.push_back(trainable ? tape.parameter(net.weights[l]) : tape.constant(net.weights[l]));
        b.biases.push_back(trainable ? tape.parameter(net.biases[l]) : tape.constant(net.biases[l]));
    }
    return b;
}

MlpOutput mlp_forward(const BoundMlp& net, Var input) {
    const MlpSpec& spec = *net.spec;
    if (input.cols() != spec.input_width()) {
        throw std::invalid_argument("mlp_forward: input width " + std::to_string(input.cols()) +
                                    " does not match network input " +
                                    std::to_string(spec.input_width()));
    }
    MlpOutput out;
    Var h = input;
    const std::size_t last = spec.layers() - 1;
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        h = add_bias(matmul(h, net.weights[l]), net.biases[l]);
        if (l == last) break;
        h = leaky_relu(h, spec.slope);
        if (l == spec.feature_layer) out.features = h;
    }
    out.output = h;
    return out;
}

DiscriminatorOutput discriminator_forward(const BoundMlp& d, Var batch) {
    const MlpOutput o = mlp_forward(d, batch);
    DiscriminatorOutput out;
    out.features = o.features;
    if (o.output.cols() == 1) {
        out.prediction = o.output;
    } else if (o.output.cols() == 2) {
        out.prediction = column(o.output, 0);
        out.realness_logit = column(o.output, 1);
    } else {
        throw std::invalid_argument("discriminator_forward: output width must be 1 or 2");
    }
    return out;
}

Var generator_forward(const BoundMlp& g, Var noise) { return mlp_forward(g, noise).output; }

Tensor predict(const Mlp& net, const Tensor& input) {
    if (input.cols() != net.spec.input_width()) {
        throw std::invalid_argument("predict: input width mismatch " + input.shape_str());
    }
    Tensor h = input;
    const std::size_t last = net.spec.layers() - 1;
    for (std::size_t l = 0; l < net.spec.layers(); ++l) {
        const Tensor& w = net.weights[l];
        const Tensor& b = net.biases[l];
        Tensor next(h.rows(), w.cols());
        for (std::size_t i = 0; i < h.rows(); ++i) {
            for (std::size_t j = 0; j < w.cols(); ++j) next(i, j) = b[j];
            for (std::size_t p = 0; p < w.rows(); ++p) {
                const double hv = h(i, p);
                if (hv == 0.0) continue;
                for (std::size_t j = 0; j < w.cols(); ++j) next(i, j) += hv * w(p, j);
            }
        }
        if (l != last) {
            for (double& v : next.values()) v = v > 0.0 ? v : net.spec.slope * v;
        }
        h = std::move(next);
    }
    return h;
}

Tensor sample_noise(Rng& rng, std::size_t rows, std::size_t noise_dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor z(rows, noise_dim);
    for (double& v : z.values()) v = normal(rng);
    return z;
}

std::uint64_t parameter_hash(const Mlp& net) {
    std::uint64_t h = 1469598103934665603ULL;
    const auto mix = [&h](const Tensor& t) {
        for (double v : t.values()) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xffU;
                h *= 1099511628211ULL;
            }
        }
    };
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        mix(net.weights[l]);
        mix(net.biases[l]);
    }
    return h;
}

namespace {

constexpr const char* kCheckpointMagic = "srgan-checkpoint v1";

void write_le(std::ostream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffU);
    out.write(bytes, 8);
}

double read_le(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
        throw std::runtime_error("checkpoint: truncated parameter block");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const Mlp& net, const CheckpointInfo& info, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out << kCheckpointMagic << '\n';
    out << "widths=";
    for (std::size_t i = 0; i < net.spec.widths.size(); ++i) {
        out << (i ? "," : "") << net.spec.widths[i];
    }
    char slope[40];
    std::snprintf(slope, sizeof slope, "%.17g", net.spec.slope);
    out << "\nslope=" << slope << "\nfeature_layer=" << net.spec.feature_layer << "\nseed=" << info.seed
        << "\nstep=" << info.step << "\nend\n";
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (double v : net.weights[l].values()) write_le(out, v);
        for (double v : net.biases[l].values()) write_le(out, v);
    }
    if (!out) throw std::runtime_error("error writing checkpoint " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic) {
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    }
    MlpSpec spec;
    CheckpointInfo meta;
    while (std::getline(in, line) && line != "end") {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("checkpoint: bad header line " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "widths") {
            std::istringstream ss(val);
            std::string item;
            while (std::getline(ss, item, ',')) spec.widths.push_back(std::stoull(item));
        } else if (key == "slope") {
            spec.slope = std::stod(val);
        } else if (key == "feature_layer") {
            spec.feature_layer = std::stoull(val);
        } else if (key == "seed") {
            meta.seed = std::stoull(val);
        } else if (key == "step") {
            meta.step = std::stoull(val);
        }
    }
    if (line != "end") throw std::runtime_error("checkpoint: header not terminated");
    Mlp net = zero_parameters(spec);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (double& v : net.weights[l].values()) v = read_le(in);
        for (double& v : net.biases[l].values()) v = read_le(in);
    }
    if (info) *info = meta;
    return net;
}

}  // namespace srgan
