#pragma once

// Define-by-run reverse-mode differentiation over 2-D tensors.
//
// A Tape records every operation of one forward pass as a Node, in
// topological order. Tape::backward() accumulates d(root)/d(node) into every
// node that requires a gradient. Tape::gradient_graph() instead records the
// backward pass itself as new nodes, so that a quantity built from input
// gradients (the gradient penalty) can be differentiated once more.

#include <array>
#include <cstddef>
#include <map>
#include <string_view>
#include <vector>

#include "srgan/tensor.hpp"

namespace srgan {

class Tape;

enum class OpKind {
    Leaf,
    MatMul,
    Add,
    Sub,
    AddBias,
    LeakyRelu,
    Abs,
    Log1pAbs,
    Square,
    SqrtShift,
    MeanRows,
    Sum,
    Scale,
    Transpose,
    BroadcastRows,
    Fill,
    MulConst,
    Softplus,
    Column,
    Sqrt,
};

std::string_view op_name(OpKind op) noexcept;

/// Handle to a node on a tape. Cheap to copy; valid until the tape is reset.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Tensor& grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

struct Node {
    OpKind op = OpKind::Leaf;
    Tensor value;
    Tensor grad;  // empty until backward() touches it
    std::array<std::size_t, 2> parents{};
    std::size_t n_parents = 0;
    bool requires_grad = false;
    double param = 0.0;     // slope, scale factor or column index
    Tensor aux;             // constant multiplier for MulConst
};

class Tape {
public:
    explicit Tape(bool validate = false) : validate_(validate) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Trainable leaf: backward() fills its gradient.
    Var parameter(Tensor value);
    /// Leaf that receives no gradient unless it is later passed to gradient_graph().
    Var constant(Tensor value);
    /// Leaf that records its gradient (e.g. an input whose gradient is inspected).
    Var input(Tensor value) { return parameter(std::move(value)); }

    /// Numeric reverse sweep from a 1x1 root. Earlier gradients are cleared.
    void backward(Var root);

    /// Records d(root)/d(wrt) as nodes on this tape and returns it. Only the
    /// ops on a dense-network path (matmul, bias, leaky relu, row means, sums,
    /// linear combinations) support this.
    Var gradient_graph(Var root, Var wrt);

    void reset() { nodes_.clear(); }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool validating() const noexcept { return validate_; }

    const Node& node(std::size_t id) const { return nodes_.at(id); }
    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    /// Gradient after backward(); zeros when the node was unreachable.
    const Tensor& grad(Var v) const;

    // Internal: used by the op functions below.
    Var push(OpKind op, Tensor value, std::initializer_list<Var> parents, double param = 0.0,
             Tensor aux = {});

private:
    bool owns(Var v) const noexcept { return v.tape == this && v.id < nodes_.size(); }
    void accumulate(std::size_t id, const Tensor& delta);
    void backprop_node(std::size_t id);
    std::array<Var, 2> symbolic_rule(std::size_t id, Var upstream, const std::array<bool, 2>& want);

    std::vector<Node> nodes_;
    bool validate_ = false;
    mutable Tensor zero_grad_;
};

/// Gradients of all trainable leaves after backward(), keyed by node id.
using GradientMap = std::map<std::size_t, Tensor>;
GradientMap backward(Tape& tape, Var root);

// Forward primitives. All throw std::invalid_argument on shape mismatch.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_bias(Var a, Var bias);  // bias is 1xC, broadcast over rows
Var leaky_relu(Var a, double slope);
Var abs(Var a);
Var log1p_abs(Var a);   // log(|a| + 1)
Var square(Var a);
Var sqrt_shift(Var a);  // sqrt(|a| + 1)
Var mean_rows(Var a);   // n x C -> 1 x C
Var sum(Var a);         // -> 1 x 1
Var scale(Var a, double c);

// Helpers that the backward rules are expressed in.
Var transpose(Var a);
Var broadcast_rows(Var a, std::size_t rows);               // 1 x C -> rows x C
Var fill(Var a, std::size_t rows, std::size_t cols);       // 1 x 1 -> rows x cols
Var mul_const(Var a, Tensor factor);                       // elementwise, factor is constant
Var softplus(Var a);                                       // log(1 + e^a)
Var column(Var a, std::size_t j);                          // n x C -> n x 1
Var sqrt(Var a);                                           // elementwise, a > 0 for gradients

/// Mean over batch rows of the squared L2 norm of each row's input gradient
/// of sum(feature_mean). feature_mean must be the row mean of features
/// computed from `input`; the result is differentiable to everything
/// upstream of the features except `input` itself.
Var grad_norm_sq_wrt_input(Var feature_mean, Var input);

}  // namespace srgan
