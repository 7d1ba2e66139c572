#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vitkit/error.hpp"
#include "vitkit/rng.hpp"

namespace vitkit {

// Dense n-dimensional array of 64-bit floats in row-major order, with an
// optional gradient buffer of the same length. Copies share storage (handle
// semantics); clone() makes an independent value. Ops executed while
// gradients are enabled link their output to the operand tensors, forming
// the compute graph that backward() replays in reverse.
class Tensor {
   public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }

    const std::vector<std::size_t> &shape() const;
    std::size_t rank() const;
    std::size_t dim(std::size_t i) const;
    std::size_t numel() const;

    std::vector<double> &data();
    const std::vector<double> &data() const;
    double item() const;  // requires numel() == 1

    bool requires_grad() const;
    void set_requires_grad(bool flag);  // enabling allocates a zeroed grad
    std::vector<double> &grad();
    const std::vector<double> &grad() const;
    void zero_grad();

    Tensor clone() const;  // deep copy of the value, detached from any graph

    bool is_leaf() const;
    const std::string &op_name() const;
    const std::vector<Tensor> &parents() const;

    // Graph linkage, used by op implementations: registers the operands and
    // the rule that accumulates this node's grad into theirs.
    void attach_node(std::vector<Tensor> parents,
                     std::function<void(const Tensor &self)> backprop, std::string op);

    bool same_storage(const Tensor &other) const { return impl_ == other.impl_; }

   private:
    struct Impl;
    std::shared_ptr<Impl> impl_;

    friend class ComputeGraph;
    friend void backward(const Tensor &);
    Impl *raw() const { return impl_.get(); }
};

// Whether ops currently record graph nodes (thread-local).
bool grad_enabled();

// RAII guard disabling graph recording on this thread.
class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard &) = delete;
    NoGradGuard &operator=(const NoGradGuard &) = delete;

   private:
    bool previous_;
};

// Topologically ordered record of the operations reaching one output:
// every node's operands appear before the node itself.
class ComputeGraph {
   public:
    static ComputeGraph from(const Tensor &output);
    const std::vector<Tensor> &nodes() const { return nodes_; }

   private:
    std::vector<Tensor> nodes_;
};

// Reverse-mode sweep from a scalar loss. Accumulates (adds) into the grad of
// every requires_grad tensor in the graph. A second call on the same loss
// without a fresh forward pass throws.
void backward(const Tensor &loss);

// --- ops ------------------------------------------------------------------

Tensor matmul(const Tensor &a, const Tensor &b);              // [m x k] * [k x n]
Tensor softmax(const Tensor &x);                              // along the last axis
Tensor layer_norm(const Tensor &x, const Tensor &gamma, const Tensor &beta, double eps = 1e-5);
Tensor gelu(const Tensor &x);                                 // tanh approximation
Tensor cross_entropy(const Tensor &logits, const std::vector<int> &labels);  // [b x c]

Tensor add(const Tensor &a, const Tensor &b);                 // same shape
Tensor mul(const Tensor &a, const Tensor &b);                 // elementwise
Tensor scale(const Tensor &a, double alpha);
Tensor add_row_bias(const Tensor &x, const Tensor &bias);     // [r x c] + [c]
Tensor transpose(const Tensor &x);                            // 2-D
Tensor slice_rows(const Tensor &x, std::size_t start, std::size_t count);
Tensor slice_cols(const Tensor &x, std::size_t start, std::size_t count);
Tensor concat_rows(const Tensor &a, const Tensor &b);
Tensor concat_cols(const std::vector<Tensor> &parts);
Tensor reshape(const Tensor &x, std::vector<std::size_t> new_shape);
Tensor sum(const Tensor &x);                                  // scalar
Tensor dropout(const Tensor &x, double rate, SplitMix64 &rng);  // inverted dropout

// Max over checked entries of |analytic - numeric| / max(1, |numeric|),
// numeric being the central difference (f(x+h) - f(x-h)) / 2h. The default
// checks every entry of x; the entries overload restricts to a subset.
double finite_diff_check(const std::function<Tensor(const Tensor &)> &f, const Tensor &x,
                         double step);
double finite_diff_check(const std::function<Tensor(const Tensor &)> &f, const Tensor &x,
                         double step, const std::vector<std::size_t> &entries);

std::string shape_str(const std::vector<std::size_t> &shape);

}  // namespace vitkit
