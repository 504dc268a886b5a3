#pragma once

#include <array>
#include <deque>
#include <cstdint>
#include <string>
#include <vector>

#include "qnn/rng.hpp"
#include "qnn/tensor.hpp"

namespace qnn {

/// Elementwise activation kinds understood by Tape::activation.
enum class Act { identity, relu, leaky_relu, sigmoid, tanh };

Act parse_activation(const std::string& name);  // ConfigError on unknown name
std::string activation_name(Act a);

class Tape;

/// Handle to a tape node. Cheap to copy; only valid for the owning tape's
/// lifetime.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff over the dense ops the layer formulas need.
///
/// Nodes are appended in topological order (inputs always precede consumers)
/// and backward() walks them exactly once in reverse. A tape and its values
/// form a single-owner unit: one thread builds, runs forward and backward.
/// Distinct tapes are independent and may live on distinct threads.
///
/// Rank conventions: rank-1 ops mirror the per-sample formulas; the *_batch /
/// rowwise ops treat the leading extent as a batch of independent rows.
class Tape {
public:
    // --- graph construction -------------------------------------------------

    /// Registers a differentiable leaf (parameter or input).
    Var leaf(Tensor value);

    /// y = W x with W [out x in], x [in].
    Var matvec(Var W, Var x);
    /// Y = X W^T with X [B x in], W [out x in]; the batched linear map.
    Var linear(Var X, Var W);
    /// Elementwise product; shapes must match exactly.
    Var hadamard(Var a, Var b);
    /// Sum-pooled Khatri-Rao product: a [D'], B [M x D'] -> out[j] = a[j] * sum_p B[p,j].
    Var krp_sum(Var a, Var B);
    /// Batched variant: A [B x D'], U [B x (M*D')] laid out per-sample as M
    /// rows of D'; out[b,j] = A[b,j] * sum_p U[b, p*D'+j].
    Var krp_sum_batch(Var A, Var U, std::size_t m);
    /// Elementwise activation.
    Var activation(Var x, Act kind);
    /// Concatenation along the last axis. Rank-1 parts give a rank-1 result;
    /// rank-2 parts must share the leading extent.
    Var concat(const std::vector<Var>& parts);
    /// Inverted dropout: zero with probability rate, survivors scaled by
    /// 1/(1-rate). Identity when training is false. Mask drawn from rng.
    Var dropout(Var x, double rate, Rng& rng, bool training);
    /// a + b, same shape.
    Var add(Var a, Var b);
    /// c * x for a compile-time constant c (not a tape value).
    Var scale(Var x, double c);
    /// out[b,j] = X[b,j] * v[j]; v broadcast over rows. Rank-1 X degenerates
    /// to hadamard.
    Var mul_rowvec(Var X, Var v);
    /// out[b,j] = X[b,j] + v[j].
    Var add_rowvec(Var X, Var v);
    /// Row-wise dot product: A, B [B x D] -> [B x 1]. Rank-1 inputs give [1].
    Var rowwise_dot(Var a, Var b);
    /// s [B x 1] -> [B x width] (each row filled with its scalar). Rank-1 [1]
    /// broadcasts to [width].
    Var broadcast_col(Var s, std::size_t width);
    /// Sum of all elements -> scalar [1].
    Var sum(Var x);
    /// Columns [lo, lo+width) of a rank-2 tensor (or elements of a rank-1).
    Var slice_cols(Var x, std::size_t lo, std::size_t width);
    /// Row gather: E [V x d], indices [B] -> [B x d]. Backward scatter-adds.
    Var gather_rows(Var E, const std::vector<std::uint32_t>& indices);
    /// Elementwise clamp to [lo, hi]; gradient is zero where clamped.
    Var clamp(Var x, double lo, double hi);
    /// Same flat data under a new shape (element count must match).
    Var reshape(Var x, Shape s);
    /// Elementwise natural log; inputs must be strictly positive.
    Var log(Var x);
    /// Mean binary cross-entropy against fixed labels (labels are plain data,
    /// never on the tape, so they receive no gradient). p must be in (0,1).
    Var bce_loss(const std::vector<double>& labels, Var p);

    // --- execution ----------------------------------------------------------

    /// Populates grad for every ancestor of loss; loss must be scalar.
    /// Gradients accumulate additively when a node is consumed twice.
    void backward(Var loss);

    const Tensor& value(Var v) const;
    /// Gradient of the last backward() w.r.t. node v (zeros if unreachable).
    const Tensor& grad(Var v) const;
    /// Scalar convenience accessor.
    double scalar(Var v) const;

    /// Smallest |pre-activation| seen by any relu on the tape; used by
    /// finite-difference tests to reject near-kink instances.
    double relu_kink_margin() const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : std::uint8_t {
        leaf, matvec, linear, hadamard, krp_sum, krp_sum_batch, act, concat,
        dropout, add, scale, mul_rowvec, add_rowvec, rowwise_dot,
        broadcast_col, sum, slice_cols, gather_rows, clamp, reshape, log_, bce
    };

    struct Node {
        Op op;
        Act act = Act::identity;
        std::array<int, 2> in{-1, -1};
        std::size_t u0 = 0, u1 = 0;       // op-specific (M, slice lo, width...)
        double d0 = 0.0, d1 = 0.0;        // op-specific (scale, clamp bounds)
        Tensor val;
        Tensor grd;                       // allocated lazily in backward
        std::vector<double> aux;          // dropout mask, bce labels
        std::vector<std::uint32_t> iaux;  // gather indices, concat input ids
    };

    int push(Node n);
    Node& at(Var v);
    const Node& at(Var v) const;
    Tensor& grad_buf(int id);

    void backward_node(Node& n);

    // deque: node references stay valid across push_back, so value()/grad()
    // references survive later op construction.
    std::deque<Node> nodes_;
};

}  // namespace qnn
