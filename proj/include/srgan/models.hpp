#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "srgan/autodiff.hpp"
#include "srgan/dataset.hpp"
#include "srgan/tensor.hpp"

namespace srgan {

inline constexpr double kDefaultSlope = 0.1;
inline constexpr std::size_t kDefaultNoiseDim = 10;
inline constexpr std::size_t kHiddenWidth = 10;
inline constexpr std::size_t kHiddenLayers = 4;

/// Fully connected layout: widths[0] is the input, widths.back() the linear
/// output, everything between is a leaky-ReLU hidden layer.
struct MlpSpec {
    std::vector<std::size_t> widths;
    double slope = kDefaultSlope;
    std::size_t feature_layer = 0;  // index among hidden layers

    std::size_t hidden_layers() const { return widths.size() < 2 ? 0 : widths.size() - 2; }
    std::size_t layers() const { return widths.empty() ? 0 : widths.size() - 1; }
    std::size_t input_width() const { return widths.front(); }
    std::size_t output_width() const { return widths.back(); }
    std::size_t feature_width() const { return widths.at(feature_layer + 1); }
    /// Throws std::invalid_argument when the layout is unusable.
    void validate() const;

    bool operator==(const MlpSpec&) const = default;
};

/// 50 -> 10 x4 -> output_width, features tapped at the last hidden layer.
/// output_width is 1 for SR-GAN/DNN and 2 for the dual-goal discriminator.
MlpSpec discriminator_spec(std::size_t output_width = 1);
/// noise_dim -> 10 x4 -> 50.
MlpSpec generator_spec(std::size_t noise_dim = kDefaultNoiseDim);

struct Mlp {
    MlpSpec spec;
    std::vector<Tensor> weights;  // layer l: widths[l] x widths[l+1]
    std::vector<Tensor> biases;   // layer l: 1 x widths[l+1]

    bool operator==(const Mlp&) const = default;
};

/// Glorot-uniform weights, zero biases.
Mlp init_parameters(const MlpSpec& spec, Rng& rng);
/// All-zero weights and biases.
Mlp zero_parameters(const MlpSpec& spec);

struct Discriminator {
    Mlp net;
};

struct Generator {
    Mlp net;
};

/// An Mlp's parameters placed on a tape for one forward pass.
struct BoundMlp {
    const MlpSpec* spec = nullptr;
    std::vector<Var> weights;
    std::vector<Var> biases;
};

/// `trainable` leaves receive gradients in Tape::backward().
BoundMlp bind(Tape& tape, const Mlp& net, bool trainable);

struct MlpOutput {
    Var output;
    Var features;
};

MlpOutput mlp_forward(const BoundMlp& net, Var input);

struct DiscriminatorOutput {
    Var prediction;                     // n x 1, unbounded regression value
    Var features;                       // n x F
    std::optional<Var> realness_logit;  // n x 1, dual-goal head only
};

DiscriminatorOutput discriminator_forward(const BoundMlp& d, Var batch);
Var generator_forward(const BoundMlp& g, Var noise);

/// Tape-free forward pass returning the final layer output.
Tensor predict(const Mlp& net, const Tensor& input);

/// Standard-normal noise batch.
Tensor sample_noise(Rng& rng, std::size_t rows, std::size_t noise_dim);

/// FNV-1a over parameter bit patterns; changes iff any parameter changes.
std::uint64_t parameter_hash(const Mlp& net);

struct CheckpointInfo {
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
};

/// Text header (spec, seed, step) followed by layer-ordered little-endian doubles.
void save_checkpoint(const Mlp& net, const CheckpointInfo& info, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace srgan
