#include "srgan/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace srgan {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
}

Tape& tape_of(Var a) {
    if (a.tape == nullptr) throw std::invalid_argument("variable is not attached to a tape");
    return *a.tape;
}

Tape& common_tape(Var a, Var b) {
    if (a.tape != b.tape) throw std::invalid_argument("operands live on different tapes");
    return tape_of(a);
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

Tensor matmul_values(const Tensor& a, const Tensor& b) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out(n, m);
    const double* __restrict ap = a.values().data();
    const double* __restrict bp = b.values().data();
    double* __restrict op = out.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        double* __restrict orow = op + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ap[i * k + p];
            const double* __restrict brow = bp + p * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

// a^T * b without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out(k, m);
    const double* __restrict ap = a.values().data();
    const double* __restrict bp = b.values().data();
    double* __restrict op = out.values().data();
    for (std::size_t p = 0; p < n; ++p) {
        const double* __restrict brow = bp + p * m;
        for (std::size_t i = 0; i < k; ++i) {
            const double av = ap[p * k + i];
            double* __restrict orow = op + i * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    Tensor out(n, m);
    const double* __restrict ap = a.values().data();
    const double* __restrict bp = b.values().data();
    double* __restrict op = out.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* __restrict arow = ap + i * k;
        for (std::size_t j = 0; j < m; ++j) {
            const double* __restrict brow = bp + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            op[i * m + j] = acc;
        }
    }
    return out;
}

template <typename F>
Tensor map(const Tensor& a, F f) {
    Tensor out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

Tensor leaky_mask(const Tensor& a, double slope) {
    return map(a, [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

}  // namespace

std::string_view op_name(OpKind op) noexcept {
    switch (op) {
        case OpKind::Leaf: return "leaf";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::AddBias: return "add_bias";
        case OpKind::LeakyRelu: return "leaky_relu";
        case OpKind::Abs: return "abs";
        case OpKind::Log1pAbs: return "log1p_abs";
        case OpKind::Square: return "square";
        case OpKind::SqrtShift: return "sqrt_shift";
        case OpKind::MeanRows: return "mean_rows";
        case OpKind::Sum: return "sum";
        case OpKind::Scale: return "scale";
        case OpKind::Transpose: return "transpose";
        case OpKind::BroadcastRows: return "broadcast_rows";
        case OpKind::Fill: return "fill";
        case OpKind::MulConst: return "mul_const";
        case OpKind::Softplus: return "softplus";
        case OpKind::Column: return "column";
        case OpKind::Sqrt: return "sqrt";
    }
    return "?";
}

const Tensor& Var::value() const { return tape_of(*this).value(*this); }
const Tensor& Var::grad() const { return tape_of(*this).grad(*this); }

Var Tape::parameter(Tensor value) {
    if (validate_) value.require_finite("parameter");
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
    if (validate_) value.require_finite("constant");
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::push(OpKind op, Tensor value, std::initializer_list<Var> parents, double param, Tensor aux) {
    if (validate_) value.require_finite(op_name(op).data());
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.param = param;
    n.aux = std::move(aux);
    for (Var p : parents) {
        if (!owns(p)) throw std::invalid_argument("operand is not on this tape");
        n.parents[n.n_parents++] = p.id;
        n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
    }
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

const Tensor& Tape::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.size() == n.value.size() && n.grad.same_shape(n.value)) return n.grad;
    zero_grad_ = Tensor(n.value.rows(), n.value.cols());
    return zero_grad_;
}

void Tape::accumulate(std::size_t id, const Tensor& delta) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.grad.same_shape(n.value) || n.grad.size() != n.value.size()) {
        n.grad = delta;
        return;
    }
    for (std::size_t i = 0; i < delta.size(); ++i) n.grad[i] += delta[i];
}

void Tape::backward(Var root) {
    if (!owns(root)) throw std::invalid_argument("backward: root is not on this tape");
    const Tensor& rv = nodes_[root.id].value;
    if (rv.rows() != 1 || rv.cols() != 1) {
        throw std::invalid_argument("backward: root must be 1x1, got " + rv.shape_str());
    }
    for (auto& n : nodes_) n.grad = Tensor();
    if (!nodes_[root.id].requires_grad) return;
    nodes_[root.id].grad = Tensor::scalar(1.0);
    for (std::size_t id = root.id + 1; id-- > 0;) {
        const Node& n = nodes_[id];
        if (n.op == OpKind::Leaf || !n.requires_grad || n.grad.size() == 0) continue;
        backprop_node(id);
    }
}

void Tape::backprop_node(std::size_t id) {
    // nodes_ does not grow during backward(), so references stay valid.
    const Node& n = nodes_[id];
    const Tensor& g = n.grad;
    const std::size_t p0 = n.parents[0];
    const std::size_t p1 = n.parents[1];
    const auto needs = [&](std::size_t p) { return nodes_[p].requires_grad; };

    switch (n.op) {
        case OpKind::Leaf:
            return;
        case OpKind::MatMul: {
            const Tensor& a = nodes_[p0].value;
            const Tensor& b = nodes_[p1].value;
            if (needs(p0)) accumulate(p0, matmul_nt(g, b));
            if (needs(p1)) accumulate(p1, matmul_tn(a, g));
            return;
        }
        case OpKind::Add:
            accumulate(p0, g);
            accumulate(p1, g);
            return;
        case OpKind::Sub:
            accumulate(p0, g);
            if (needs(p1)) accumulate(p1, map(g, [](double x) { return -x; }));
            return;
        case OpKind::AddBias: {
            accumulate(p0, g);
            if (needs(p1)) {
                Tensor gb(1, g.cols());
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
                accumulate(p1, gb);
            }
            return;
        }
        case OpKind::LeakyRelu: {
            const Tensor& a = nodes_[p0].value;
            Tensor d(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * (a[i] > 0.0 ? 1.0 : n.param);
            accumulate(p0, d);
            return;
        }
        case OpKind::Abs: {
            const Tensor& a = nodes_[p0].value;
            Tensor d(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * sign(a[i]);
            accumulate(p0, d);
            return;
        }
        case OpKind::Log1pAbs: {
            const Tensor& a = nodes_[p0].value;
            Tensor d(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * sign(a[i]) / (std::abs(a[i]) + 1.0);
            accumulate(p0, d);
            return;
        }
        case OpKind::Square: {
            const Tensor& a = nodes_[p0].value;
            Tensor d(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.size(); ++i) d[i] = 2.0 * a[i] * g[i];
            accumulate(p0, d);
            return;
        }
        case OpKind::SqrtShift: {
            const Tensor& a = nodes_[p0].value;
            Tensor d(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.size(); ++i)
                d[i] = g[i] * sign(a[i]) / (2.0 * n.value[i]);
            accumulate(p0, d);
            return;
        }
        case OpKind::MeanRows: {
            const Tensor& a = nodes_[p0].value;
            const double inv = 1.0 / static_cast<double>(a.rows());
            Tensor d(a.rows(), a.cols());
            for (std::size_t i = 0; i < a.rows(); ++i)
                for (std::size_t j = 0; j < a.cols(); ++j) d(i, j) = g[j] * inv;
            accumulate(p0, d);
            return;
        }
        case OpKind::Sum: {
            const Tensor& a = nodes_[p0].value;
            accumulate(p0, Tensor(a.rows(), a.cols(), g[0]));
            return;
        }
        case OpKind::Scale:
            accumulate(p0, map(g, [c = n.param](double x) { return c * x; }));
            return;
        case OpKind::Transpose: {
            Tensor d(g.cols(), g.rows());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) d(j, i) = g(i, j);
            accumulate(p0, d);
            return;
        }
        case OpKind::BroadcastRows: {
            Tensor d(1, g.cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) d[j] += g(i, j);
            accumulate(p0, d);
            return;
        }
        case OpKind::Fill: {
            double total = 0.0;
            for (double v : g.values()) total += v;
            accumulate(p0, Tensor::scalar(total));
            return;
        }
        case OpKind::MulConst: {
            Tensor d(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * n.aux[i];
            accumulate(p0, d);
            return;
        }
        case OpKind::Softplus: {
            const Tensor& a = nodes_[p0].value;
            Tensor d(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] / (1.0 + std::exp(-a[i]));
            accumulate(p0, d);
            return;
        }
        case OpKind::Sqrt: {
            Tensor d(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] / (2.0 * n.value[i]);
            accumulate(p0, d);
            return;
        }
        case OpKind::Column: {
            const Tensor& a = nodes_[p0].value;
            const auto j = static_cast<std::size_t>(n.param);
            Tensor d(a.rows(), a.cols());
            for (std::size_t i = 0; i < a.rows(); ++i) d(i, j) = g[i];
            accumulate(p0, d);
            return;
        }
    }
}

std::array<Var, 2> Tape::symbolic_rule(std::size_t id, Var up, const std::array<bool, 2>& want) {
    // Copy what the rule needs: creating nodes may reallocate nodes_.
    const OpKind op = nodes_[id].op;
    const double param = nodes_[id].param;
    const Var a{this, nodes_[id].parents[0]};
    const Var b{this, nodes_[id].parents[1]};
    std::array<Var, 2> out{};

    switch (op) {
        case OpKind::MatMul:
            if (want[0]) out[0] = matmul(up, transpose(b));
            if (want[1]) out[1] = matmul(transpose(a), up);
            return out;
        case OpKind::Add:
            out[0] = up;
            out[1] = up;
            return out;
        case OpKind::Sub:
            out[0] = up;
            if (want[1]) out[1] = scale(up, -1.0);
            return out;
        case OpKind::AddBias:
            out[0] = up;
            if (want[1]) {
                const auto rows = static_cast<double>(up.rows());
                out[1] = scale(mean_rows(up), rows);
            }
            return out;
        case OpKind::LeakyRelu:
            out[0] = mul_const(up, leaky_mask(nodes_[a.id].value, param));
            return out;
        case OpKind::MeanRows: {
            const std::size_t rows = nodes_[a.id].value.rows();
            out[0] = scale(broadcast_rows(up, rows), 1.0 / static_cast<double>(rows));
            return out;
        }
        case OpKind::Sum:
            out[0] = fill(up, nodes_[a.id].value.rows(), nodes_[a.id].value.cols());
            return out;
        case OpKind::Scale:
            out[0] = scale(up, param);
            return out;
        case OpKind::Transpose:
            out[0] = transpose(up);
            return out;
        case OpKind::BroadcastRows: {
            const auto rows = static_cast<double>(up.rows());
            out[0] = scale(mean_rows(up), rows);
            return out;
        }
        case OpKind::Fill:
            out[0] = sum(up);
            return out;
        case OpKind::MulConst: {
            Tensor factor = nodes_[id].aux;
            out[0] = mul_const(up, std::move(factor));
            return out;
        }
        default:
            throw std::logic_error("gradient_graph: no recorded backward rule for " +
                                   std::string(op_name(op)));
    }
}

Var Tape::gradient_graph(Var root, Var wrt) {
    if (!owns(root)) throw std::invalid_argument("gradient_graph: root is not on this tape");
    if (!owns(wrt)) throw std::invalid_argument("gradient_graph: input is not on this tape");
    if (!nodes_[root.id].value.same_shape(Tensor(1, 1))) {
        throw std::invalid_argument("gradient_graph: root must be 1x1, got " +
                                    nodes_[root.id].value.shape_str());
    }
    const std::size_t end = root.id + 1;

    std::vector<bool> depends(end, false);
    if (wrt.id < end) depends[wrt.id] = true;
    for (std::size_t id = wrt.id + 1; id < end; ++id) {
        const Node& n = nodes_[id];
        for (std::size_t k = 0; k < n.n_parents; ++k) {
            if (depends[n.parents[k]]) depends[id] = true;
        }
    }
    const Tensor& wv = nodes_[wrt.id].value;
    if (wrt.id >= end || !depends[root.id]) return constant(Tensor(wv.rows(), wv.cols()));

    std::vector<std::size_t> grad_id(end, 0);
    std::vector<bool> has_grad(end, false);
    grad_id[root.id] = constant(Tensor::scalar(1.0)).id;
    has_grad[root.id] = true;

    for (std::size_t id = end; id-- > wrt.id + 1;) {
        if (!has_grad[id] || !depends[id]) continue;
        const std::size_t np = nodes_[id].n_parents;
        std::array<bool, 2> want{};
        for (std::size_t k = 0; k < np; ++k) want[k] = depends[nodes_[id].parents[k]];
        const auto contrib = symbolic_rule(id, Var{this, grad_id[id]}, want);
        for (std::size_t k = 0; k < np; ++k) {
            if (!want[k]) continue;
            const std::size_t p = nodes_[id].parents[k];
            if (has_grad[p]) {
                grad_id[p] = add(Var{this, grad_id[p]}, contrib[k]).id;
            } else {
                grad_id[p] = contrib[k].id;
                has_grad[p] = true;
            }
        }
    }
    return Var{this, grad_id[wrt.id]};
}

GradientMap backward(Tape& tape, Var root) {
    tape.backward(root);
    GradientMap out;
    for (std::size_t id = 0; id < tape.size(); ++id) {
        const Node& n = tape.node(id);
        if (n.op == OpKind::Leaf && n.requires_grad) out.emplace(id, tape.grad(Var{&tape, id}));
    }
    return out;
}

Var matmul(Var a, Var b) {
    Tape& t = common_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
    return t.push(OpKind::MatMul, matmul_values(av, bv), {a, b});
}

Var add(Var a, Var b) {
    Tape& t = common_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) shape_error("add", av, bv);
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return t.push(OpKind::Add, std::move(out), {a, b});
}

Var sub(Var a, Var b) {
    Tape& t = common_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) shape_error("sub", av, bv);
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return t.push(OpKind::Sub, std::move(out), {a, b});
}

Var add_bias(Var a, Var bias) {
    Tape& t = common_tape(a, bias);
    const Tensor& av = a.value();
    const Tensor& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != av.cols()) shape_error("add_bias", av, bv);
    Tensor out = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) += bv[j];
    return t.push(OpKind::AddBias, std::move(out), {a, bias});
}

Var leaky_relu(Var a, double slope) {
    return tape_of(a).push(OpKind::LeakyRelu,
                           map(a.value(), [slope](double x) { return x > 0.0 ? x : (slope == 0.0 ? 0.0 : slope * x); }),
                           {a}, slope);
}

Var abs(Var a) {
    return tape_of(a).push(OpKind::Abs, map(a.value(), [](double x) { return std::abs(x); }), {a});
}

Var log1p_abs(Var a) {
    return tape_of(a).push(OpKind::Log1pAbs,
                           map(a.value(), [](double x) { return std::log1p(std::abs(x)); }), {a});
}

Var square(Var a) {
    return tape_of(a).push(OpKind::Square, map(a.value(), [](double x) { return x * x; }), {a});
}

Var sqrt_shift(Var a) {
    return tape_of(a).push(OpKind::SqrtShift,
                           map(a.value(), [](double x) { return std::sqrt(std::abs(x) + 1.0); }),
                           {a});
}

Var mean_rows(Var a) {
    const Tensor& av = a.value();
    if (av.rows() == 0) throw std::invalid_argument("mean_rows: empty batch");
    Tensor out(1, av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out[j] += av(i, j);
    const double inv = 1.0 / static_cast<double>(av.rows());
    for (double& v : out.values()) v *= inv;
    return tape_of(a).push(OpKind::MeanRows, std::move(out), {a});
}

Var sum(Var a) {
    double total = 0.0;
    for (double v : a.value().values()) total += v;
    return tape_of(a).push(OpKind::Sum, Tensor::scalar(total), {a});
}

Var scale(Var a, double c) {
    return tape_of(a).push(OpKind::Scale, map(a.value(), [c](double x) { return c * x; }), {a}, c);
}

Var transpose(Var a) {
    const Tensor& av = a.value();
    Tensor out(av.cols(), av.rows());
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out(j, i) = av(i, j);
    return tape_of(a).push(OpKind::Transpose, std::move(out), {a});
}

Var broadcast_rows(Var a, std::size_t rows) {
    const Tensor& av = a.value();
    if (av.rows() != 1) shape_error("broadcast_rows", av, Tensor(1, av.cols()));
    Tensor out(rows, av.cols());
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av[j];
    return tape_of(a).push(OpKind::BroadcastRows, std::move(out), {a});
}

Var fill(Var a, std::size_t rows, std::size_t cols) {
    const Tensor& av = a.value();
    if (av.rows() != 1 || av.cols() != 1) shape_error("fill", av, Tensor(1, 1));
    return tape_of(a).push(OpKind::Fill, Tensor(rows, cols, av[0]), {a});
}

Var mul_const(Var a, Tensor factor) {
    const Tensor& av = a.value();
    if (!av.same_shape(factor)) shape_error("mul_const", av, factor);
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor[i];
    return tape_of(a).push(OpKind::MulConst, std::move(out), {a}, 0.0, std::move(factor));
}

Var softplus(Var a) {
    return tape_of(a).push(OpKind::Softplus, map(a.value(), [](double x) {
                               return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
                           }),
                           {a});
}

Var column(Var a, std::size_t j) {
    const Tensor& av = a.value();
    if (j >= av.cols()) {
        throw std::invalid_argument("column: index " + std::to_string(j) + " out of range for " +
                                    av.shape_str());
    }
    Tensor out(av.rows(), 1);
    for (std::size_t i = 0; i < av.rows(); ++i) out[i] = av(i, j);
    return tape_of(a).push(OpKind::Column, std::move(out), {a}, static_cast<double>(j));
}

Var sqrt(Var a) {
    for (double v : a.value().values()) {
        if (v < 0.0) throw std::domain_error("sqrt: negative operand");
    }
    return tape_of(a).push(OpKind::Sqrt, map(a.value(), [](double x) { return std::sqrt(x); }), {a});
}

Var grad_norm_sq_wrt_input(Var feature_mean, Var input) {
    if (feature_mean.tape == nullptr || feature_mean.tape != input.tape || input.id >= input.tape->size()) {
        throw std::invalid_argument("grad_norm_sq_wrt_input: input is not on the feature tape");
    }
    if (feature_mean.rows() != 1) {
        throw std::invalid_argument("grad_norm_sq_wrt_input: expected a 1xF feature mean, got " +
                                    feature_mean.value().shape_str());
    }
    Tape& t = *input.tape;
    const Var g = t.gradient_graph(sum(feature_mean), input);
    // Row i of g is (1/n) times the gradient of that row's summed features.
    const auto rows = static_cast<double>(input.rows());
    return scale(sum(square(g)), rows);
}

}  // namespace srgan
