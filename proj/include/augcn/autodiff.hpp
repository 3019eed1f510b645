#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "augcn/tensor.hpp"

namespace augcn {

class Node;
using Var = std::shared_ptr<Node>;

/// One vertex of the reverse-mode graph. Trainable parameters are leaves
/// that outlive the graphs built over them; every other node is created by
/// an op during a forward pass and freed when the root goes out of scope.
///
/// `grad` always has the shape of `value` and starts at zero; backward()
/// accumulates into it, so callers zero parameter grads between steps.
class Node {
public:
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<Var> parents;
    // Pulls this node's grad into its parents. Must not capture shared
    // ownership of the node itself (that would leak the graph).
    std::function<void(Node&)> backprop;

    Node(Tensor v, bool req)
        : value(std::move(v)), grad(value.shape()), requires_grad(req) {}

    void zero_grad() { grad.fill(0.0); }
};

/// Leaf with no gradient (inputs, targets, fixed matrices).
Var constant(Tensor v);

/// Trainable leaf: value plus a persistent gradient slot.
Var parameter(Tensor v);

/// Builds an interior node; requires_grad is inherited from the parents and
/// the backprop closure is dropped when no parent needs gradients.
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop);

// ---- ops -------------------------------------------------------------

/// Matrix product of a (m x k) and b (k x n).
Var matmul(const Var& a, const Var& b);

/// Elementwise sum; shapes must match.
Var add(const Var& a, const Var& b);

/// Adds a length-c row vector to every row of an (r x c) matrix.
Var add_rowvec(const Var& m, const Var& row);

Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);

/// Elementwise max(0, x). The subgradient at exactly 0 is taken as 0.
Var relu(const Var& x);

/// Elementwise logistic function, stable over the full double range.
Var sigmoid(const Var& x);

/// Elementwise |x|; subgradient at 0 is 0.
Var abs(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);

/// Same data, new shape (sizes must agree).
Var reshape(const Var& x, std::vector<std::size_t> shape);

/// Stacks k vectors of length d into a k x d matrix.
Var stack_rows(const std::vector<Var>& rows);

/// Interleaves R matrices of shape (batch x d) into a (batch*R) x d matrix
/// whose row b*R + r is row b of input r.
Var stack_roi_rows(const std::vector<Var>& mats, std::size_t batch);

/// Left-multiplies every (R x d) block of z by the fixed matrix g (R x R).
/// z has shape (batch*R) x d; g carries no gradient.
Var graph_matmul(const Tensor& g, const Var& z, std::size_t batch);

/// Inverted dropout: in training mode each element is zeroed independently
/// with probability `rate` and survivors are scaled by 1/(1-rate); in eval
/// mode the op is the identity. Requires 0 <= rate < 1.
Var dropout(const Var& x, double rate, bool train, SeededRng& rng);

/// Mean binary cross entropy of an (rows x c) probability matrix against
/// 0/1 targets:  -(1/(rows*c)) sum w_c [y log p + (1-y) log(1-p)].
/// `col_weights` is a length-c weight vector or empty for all-ones.
/// Probabilities are clamped to [delta, 1-delta], so the value is finite
/// for any input; gradients do not flow through clamped entries.
Var bce_mean(const Var& probs, const Tensor& targets, const Tensor& col_weights,
             double delta = 1e-7);

// ---- graph execution ---------------------------------------------------

/// Reverse-mode sweep from a single-element root. Seeds the root gradient
/// with 1 and accumulates into every reachable leaf that requires grad.
void backward(const Var& root);

// ---- parameters ----------------------------------------------------------

/// Named collection of trainable leaves. Names are unique; iteration is in
/// sorted name order, which fixes the serialization layout. Creation order
/// fixes how many rng draws initialization consumes, so model constructors
/// must create parameters in a deterministic sequence.
class ParameterStore {
public:
    /// Uniform init in +-sqrt(6/(fan_in+fan_out)); shape must be rank 2.
    Var create(const std::string& name, std::vector<std::size_t> shape, SeededRng& rng);

    /// Zero-initialized parameter of any shape (biases).
    Var create_zeros(const std::string& name, std::vector<std::size_t> shape);

    /// Parameter seeded with an existing value (checkpoint restore).
    Var adopt(const std::string& name, Tensor value);

    Var get(const std::string& name) const;
    bool contains(const std::string& name) const;

    void zero_grad();
    std::size_t size() const { return entries_.size(); }
    const std::map<std::string, Var>& entries() const { return entries_; }
    std::vector<Var> values() const;

private:
    Var insert(const std::string& name, Tensor value);
    std::map<std::string, Var> entries_;
};

// ---- gradient checking -----------------------------------------------

/// Compares reverse-mode gradients of `loss_fn` against central differences
/// for every entry of every parameter and returns the maximum relative
/// error |a-b| / max(1e-8, |a|+|b|). `loss_fn` must rebuild the graph from
/// the parameters' current values and be deterministic; two initial forward
/// passes that disagree raise an error.
double grad_check(const std::function<Var()>& loss_fn, const std::vector<Var>& params,
                  double eps);

}  // namespace augcn
