#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mtbr/tensor.hpp"

namespace mtbr {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    Tensor& grad() const;
    const Shape& shape() const { return value().shape(); }
};

// Records operations in execution order and replays their local backward
// rules in exact reverse order. Confined to one thread.
class Tape {
public:
    using BackwardRule = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Appends an op node. requires_grad is inherited from the inputs.
    Var record(Tensor value, std::vector<std::size_t> inputs, BackwardRule rule);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    Tensor& grad(std::size_t id) { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
    std::size_t size() const noexcept { return nodes_.size(); }

    void zero_grad();
    void backward(Var loss);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::vector<std::size_t> inputs;
        BackwardRule rule;
    };
    std::vector<Node> nodes_;
};

// --- primitives -----------------------------------------------------------
// All ops take rank-2 operands unless noted; biases and norm affines are
// rank-1. The only broadcasting is a bias vector across the batch rows.

Var matmul(Var a, Var b);
Var dense(Var x, Var weight, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var concat(const std::vector<Var>& parts);       // along the last axis
Var concat_rows(const std::vector<Var>& parts);  // along the first axis
Var slice_cols(Var x, std::size_t start, std::size_t count);
Var row_scale(Var x, Var s);  // x[b×d] * s[b×1], row by row
Var mean(Var x);              // all entries -> scalar
Var mean_rows(Var x);         // [n×d] -> [1×d]
Var relu(Var x);
Var sigmoid(Var x);
Var softmax(Var x);           // row-wise
Var layer_norm(Var x, Var gamma, Var beta, double eps);
Var transpose(Var x);
Var reshape(Var x, Shape shape);

inline constexpr double kBceEps = 1e-7;

// Mean binary cross-entropy; probabilities are clamped to [eps, 1 - eps].
Var bce_loss(Var probs, const Tensor& targets);

// Plain (non-recording) kernels shared with evaluators.
double sigmoid_scalar(double x);
void softmax_row(std::span<const double> in, std::span<double> out);

// --- finite-difference checker --------------------------------------------

using LossFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
};

// Compares tape gradients of f against central differences, coordinate by
// coordinate. Relative error uses max(|analytic|, |numeric|, 1e-8) as the
// denominator.
GradCheckResult grad_check(const LossFn& f, const std::vector<Tensor>& params, double h);

}  // namespace mtbr
