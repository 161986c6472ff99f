#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "exitrack/nn/parameters.hpp"
#include "exitrack/nn/tensor.hpp"

namespace exitrack::nn {

/// Handle to a value recorded on a Tape.
struct Var {
    int id{-1};
    [[nodiscard]] bool valid() const { return id >= 0; }
};

/// Reverse-mode differentiation tape. Every op appends a node holding its value and a
/// closure that pushes the node's gradient back to its inputs. A tape is single-use:
/// build the graph, call backward() once on a scalar, read gradients.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

    /// `param_grad[i]` says whether parameter i is differentiated; empty means all of them.
    explicit Tape(const ParameterSet* params = nullptr, std::vector<bool> param_grad = {})
        : params_(params), param_grad_(std::move(param_grad)) {
        nodes_.reserve(256);
    }

    Var constant(Matrix value);
    /// Leaf whose gradient is tracked (network inputs we differentiate against).
    Var variable(Matrix value);
    /// Leaf bound to a parameter tensor; its gradient is reported by accumulate_param_grads().
    Var param(int param_id);

    [[nodiscard]] const Matrix& value(Var v) const;
    /// Gradient after backward(); zeros if nothing flowed into `v`.
    [[nodiscard]] Matrix grad(Var v) const;
    [[nodiscard]] bool requires_grad(Var v) const { return node(v).requires_grad; }
    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

    /// Appends an op result. `fn` is kept only when some input requires a gradient.
    Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
    Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn);

    /// Accumulates into the gradient of `v` (no-op for constants).
    void add_grad(Var v, const Matrix& g);

    /// Seeds d(root)/d(root) = 1; root must be 1x1.
    void backward(Var root);

    /// Adds this tape's parameter gradients into `acc` (sized like the ParameterSet).
    void accumulate_param_grads(Gradients& acc) const;

private:
    struct Node {
        Matrix value;
        const Matrix* external{nullptr};
        Matrix grad;
        BackwardFn backward;
        int param_id{-1};
        bool requires_grad{false};
        bool has_grad{false};
    };

    [[nodiscard]] const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }
    [[nodiscard]] Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }

    const ParameterSet* params_;
    std::vector<bool> param_grad_;
    std::vector<Node> nodes_;
};

// Linear algebra
Var matmul(Tape& t, Var a, Var b);
Var matmul_t(Tape& t, Var a, Var b);  // a * b^T
Var transpose(Tape& t, Var a);

// Elementwise (same shape)
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var div(Tape& t, Var a, Var b);
Var maximum(Tape& t, Var a, Var b);
Var minimum(Tape& t, Var a, Var b);

// Broadcasts
Var add_row(Tape& t, Var a, Var row);  // row is 1 x cols
Var mul_col(Tape& t, Var a, Var col);  // col is rows x 1
Var div_scalar(Tape& t, Var a, Var s);  // s is 1 x 1

Var scale(Tape& t, Var a, double k);
Var add_const(Tape& t, Var a, double k);
Var relu(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
Var abs(Tape& t, Var a);
Var clamp_min(Tape& t, Var a, double lo);

// Row-wise
Var softmax_rows(Tape& t, Var a);
Var layer_norm(Tape& t, Var a, Var gamma, Var beta, double eps = 1e-5);
Var l2_normalize_rows(Tape& t, Var a, double eps = 1e-12);

// Reductions
Var mean_rows(Tape& t, Var a);  // column means, 1 x cols
Var sum(Tape& t, Var a);
Var mean(Tape& t, Var a);
Var max_all(Tape& t, Var a);

// Shape
Var concat_rows(Tape& t, std::span<const Var> parts);
Var slice_rows(Tape& t, Var a, int start, int count);
Var slice_cols(Tape& t, Var a, int start, int count);

/// Patch extraction for a (h*w) x C map: output row (oy*wo + ox) holds the k x k patch,
/// column index (ky*k + kx)*C + c. Zero padding.
Var im2col(Tape& t, Var a, int h, int w, int k, int stride, int pad);

// Losses on a single example
Var cross_entropy(Tape& t, Var logits, int label);  // logits 1 x K
Var bce_with_logits(Tape& t, Var logit, double target);  // logit 1 x 1

}  // namespace exitrack::nn
