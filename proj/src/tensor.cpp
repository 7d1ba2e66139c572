#include "vitkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>
#include <utility>

#include "vitkit/kernels.hpp"

namespace vitkit {

namespace {

thread_local bool t_grad_enabled = true;

std::size_t shape_numel(const std::vector<std::size_t> &shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void check_positive_dims(const std::vector<std::size_t> &shape) {
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + shape_str(shape));
    }
}

}  // namespace

std::string shape_str(const std::vector<std::size_t> &shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

struct Tensor::Impl {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty unless requires_grad
    bool requires_grad = false;
    bool consumed = false;  // set on a loss node after backward

    std::vector<Tensor> parents;
    std::function<void(const Tensor &self)> backprop;
    std::string op;
};

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    check_positive_dims(shape);
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->data.assign(shape_numel(shape), 0.0);
    t.impl_->shape = std::move(shape);
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
    return t;
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
    check_positive_dims(shape);
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
    }
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(data);
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

const std::vector<std::size_t> &Tensor::shape() const {
    if (!impl_) throw Error("undefined tensor");
    return impl_->shape;
}

std::size_t Tensor::rank() const { return shape().size(); }

std::size_t Tensor::dim(std::size_t i) const { return shape().at(i); }

std::size_t Tensor::numel() const {
    if (!impl_) throw Error("undefined tensor");
    return impl_->data.size();
}

std::vector<double> &Tensor::data() {
    if (!impl_) throw Error("undefined tensor");
    return impl_->data;
}

const std::vector<double> &Tensor::data() const {
    if (!impl_) throw Error("undefined tensor");
    return impl_->data;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor has shape " + shape_str(shape()));
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
    if (!impl_) throw Error("undefined tensor");
    impl_->requires_grad = flag;
    if (flag && impl_->grad.size() != impl_->data.size()) {
        impl_->grad.assign(impl_->data.size(), 0.0);
    }
}

std::vector<double> &Tensor::grad() {
    if (!requires_grad()) throw Error("grad: tensor does not require gradients");
    return impl_->grad;
}

const std::vector<double> &Tensor::grad() const {
    if (!requires_grad()) throw Error("grad: tensor does not require gradients");
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_ && !impl_->grad.empty()) {
        std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }
}

Tensor Tensor::clone() const {
    if (!impl_) throw Error("undefined tensor");
    return from_data(impl_->shape, impl_->data);
}

bool Tensor::is_leaf() const { return impl_ && impl_->parents.empty(); }

const std::string &Tensor::op_name() const {
    if (!impl_) throw Error("undefined tensor");
    return impl_->op;
}

const std::vector<Tensor> &Tensor::parents() const {
    if (!impl_) throw Error("undefined tensor");
    return impl_->parents;
}

void Tensor::attach_node(std::vector<Tensor> parents,
                         std::function<void(const Tensor &self)> backprop, std::string op) {
    if (!impl_) throw Error("undefined tensor");
    impl_->parents = std::move(parents);
    impl_->backprop = std::move(backprop);
    impl_->op = std::move(op);
    set_requires_grad(true);
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

ComputeGraph ComputeGraph::from(const Tensor &output) {
    ComputeGraph g;
    if (!output.defined()) throw Error("compute graph: undefined output");
    std::unordered_set<const Tensor::Impl *> visited;
    // Iterative post-order DFS over parents: operands land before dependents.
    struct Frame {
        Tensor node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({output, 0});
    visited.insert(output.raw());
    while (!stack.empty()) {
        Frame &f = stack.back();
        const auto &parents = f.node.parents();
        if (f.next_parent < parents.size()) {
            const Tensor &p = parents[f.next_parent++];
            if (visited.insert(p.raw()).second) {
                stack.push_back({p, 0});
            }
        } else {
            g.nodes_.push_back(f.node);
            stack.pop_back();
        }
    }
    return g;
}

void backward(const Tensor &loss) {
    if (!loss.defined()) throw Error("backward: undefined loss");
    if (loss.numel() != 1) {
        throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    if (loss.raw()->consumed) {
        throw Error("backward: graph already consumed; run a fresh forward pass first");
    }
    ComputeGraph graph = ComputeGraph::from(loss);
    if (loss.requires_grad()) {
        loss.raw()->grad.assign(1, 1.0);
    }
    const auto &nodes = graph.nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        const Tensor &node = *it;
        if (node.raw()->backprop) {
            node.raw()->backprop(node);
        }
    }
    loss.raw()->consumed = true;
}

// --- op helpers -------------------------------------------------------------

namespace {

bool should_track(std::initializer_list<const Tensor *> operands) {
    if (!grad_enabled()) return false;
    for (const Tensor *t : operands) {
        if (t->requires_grad()) return true;
    }
    return false;
}

void accumulate(Tensor &dst, const double *src, std::size_t n) {
    kernels::axpy(1.0, src, dst.grad().data(), n);
    (void)n;
}

}  // namespace

// --- ops --------------------------------------------------------------------

Tensor matmul(const Tensor &a, const Tensor &b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n});
    kernels::gemm(false, false, m, n, k, a.data().data(), b.data().data(), out.data().data(),
                  false);
    if (should_track({&a, &b})) {
        out.attach_node(
            {a, b},
            [a, b, m, n, k](const Tensor &self) {
                const double *dc = self.grad().data();
                if (a.requires_grad()) {
                    Tensor ga = a;  // handle; grad shared
                    kernels::gemm(false, true, m, k, n, dc, b.data().data(), ga.grad().data(),
                                  true);
                }
                if (b.requires_grad()) {
                    Tensor gb = b;
                    kernels::gemm(true, false, k, n, m, a.data().data(), dc, gb.grad().data(),
                                  true);
                }
            },
            "matmul");
    }
    return out;
}

Tensor softmax(const Tensor &x) {
    if (x.rank() < 1) throw ShapeError("softmax: rank-0 input");
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw ValueError("softmax: non-finite input");
    }
    const std::size_t cols = x.dim(x.rank() - 1);
    const std::size_t rows = x.numel() / cols;
    Tensor out = Tensor::zeros(x.shape());
    kernels::softmax_rows(x.data().data(), out.data().data(), rows, cols);
    if (should_track({&x})) {
        out.attach_node(
            {x},
            [x, rows, cols](const Tensor &self) {
                Tensor gx = x;
                kernels::softmax_backward_rows(self.data().data(), self.grad().data(),
                                               gx.grad().data(), rows, cols);
            },
            "softmax");
    }
    return out;
}

Tensor layer_norm(const Tensor &x, const Tensor &gamma, const Tensor &beta, double eps) {
    if (x.rank() < 1) throw ShapeError("layer_norm: rank-0 input");
    const std::size_t cols = x.dim(x.rank() - 1);
    if (gamma.rank() != 1 || gamma.dim(0) != cols || beta.rank() != 1 || beta.dim(0) != cols) {
        throw ShapeError("layer_norm: affine shapes " + shape_str(gamma.shape()) + ", " +
                         shape_str(beta.shape()) + " do not match last dim " +
                         std::to_string(cols));
    }
    const std::size_t rows = x.numel() / cols;
    Tensor out = Tensor::zeros(x.shape());
    auto mean = std::make_shared<std::vector<double>>(rows);
    auto rstd = std::make_shared<std::vector<double>>(rows);
    kernels::layer_norm_rows(x.data().data(), gamma.data().data(), beta.data().data(), eps,
                             out.data().data(), mean->data(), rstd->data(), rows, cols);
    if (should_track({&x, &gamma, &beta})) {
        out.attach_node(
            {x, gamma, beta},
            [x, gamma, beta, mean, rstd, rows, cols](const Tensor &self) {
                Tensor gx = x;
                Tensor gg = gamma;
                Tensor gb = beta;
                // A throwaway buffer absorbs dx when x is a non-grad leaf.
                std::vector<double> sink;
                double *dx = nullptr;
                if (x.requires_grad()) {
                    dx = gx.grad().data();
                } else {
                    sink.assign(rows * cols, 0.0);
                    dx = sink.data();
                }
                kernels::layer_norm_backward_rows(
                    x.data().data(), gamma.data().data(), mean->data(), rstd->data(),
                    self.grad().data(), dx,
                    gamma.requires_grad() ? gg.grad().data() : nullptr,
                    beta.requires_grad() ? gb.grad().data() : nullptr, rows, cols);
            },
            "layer_norm");
    }
    return out;
}

Tensor gelu(const Tensor &x) {
    Tensor out = Tensor::zeros(x.shape());
    kernels::gelu(x.data().data(), out.data().data(), x.numel());
    if (should_track({&x})) {
        out.attach_node(
            {x},
            [x](const Tensor &self) {
                Tensor gx = x;
                kernels::gelu_backward(x.data().data(), self.grad().data(), gx.grad().data(),
                                       x.numel());
            },
            "gelu");
    }
    return out;
}

Tensor cross_entropy(const Tensor &logits, const std::vector<int> &labels) {
    if (logits.rank() != 2) {
        throw ShapeError("cross_entropy: logits must be [batch x classes], got " +
                         shape_str(logits.shape()));
    }
    const std::size_t b = logits.dim(0), c = logits.dim(1);
    if (labels.size() != b) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(b));
    }
    for (std::size_t i = 0; i < b; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
            throw ValueError("cross_entropy: label " + std::to_string(labels[i]) + " at index " +
                             std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
        }
    }
    auto probs = std::make_shared<std::vector<double>>(b * c);
    kernels::softmax_rows(logits.data().data(), probs->data(), b, c);
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double *row = logits.data().data() + i * c;
        double m = row[0];
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
        double se = 0.0;
        for (std::size_t j = 0; j < c; ++j) se += std::exp(row[j] - m);
        total += m + std::log(se) - row[labels[i]];
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(b));
    if (should_track({&logits})) {
        auto labels_copy = std::make_shared<std::vector<int>>(labels);
        out.attach_node(
            {logits},
            [logits, probs, labels_copy, b, c](const Tensor &self) {
                Tensor gl = logits;
                const double g = self.grad()[0] / static_cast<double>(b);
                double *dst = gl.grad().data();
                for (std::size_t i = 0; i < b; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        const double onehot =
                            (static_cast<std::size_t>((*labels_copy)[i]) == j) ? 1.0 : 0.0;
                        dst[i * c + j] += ((*probs)[i * c + j] - onehot) * g;
                    }
                }
            },
            "cross_entropy");
    }
    return out;
}

Tensor add(const Tensor &a, const Tensor &b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    Tensor out = Tensor::zeros(a.shape());
    kernels::add(a.data().data(), b.data().data(), out.data().data(), a.numel());
    if (should_track({&a, &b})) {
        out.attach_node(
            {a, b},
            [a, b](const Tensor &self) {
                const double *dy = self.grad().data();
                if (a.requires_grad()) {
                    Tensor ga = a;
                    accumulate(ga, dy, a.numel());
                }
                if (b.requires_grad()) {
                    Tensor gb = b;
                    accumulate(gb, dy, b.numel());
                }
            },
            "add");
    }
    return out;
}

Tensor mul(const Tensor &a, const Tensor &b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    Tensor out = Tensor::zeros(a.shape());
    kernels::mul(a.data().data(), b.data().data(), out.data().data(), a.numel());
    if (should_track({&a, &b})) {
        out.attach_node(
            {a, b},
            [a, b](const Tensor &self) {
                const std::size_t n = a.numel();
                const double *dy = self.grad().data();
                if (a.requires_grad()) {
                    Tensor ga = a;
                    double *dst = ga.grad().data();
                    for (std::size_t i = 0; i < n; ++i) dst[i] += dy[i] * b.data()[i];
                }
                if (b.requires_grad()) {
                    Tensor gb = b;
                    double *dst = gb.grad().data();
                    for (std::size_t i = 0; i < n; ++i) dst[i] += dy[i] * a.data()[i];
                }
            },
            "mul");
    }
    return out;
}

Tensor scale(const Tensor &a, double alpha) {
    Tensor out = Tensor::zeros(a.shape());
    kernels::scale(a.data().data(), alpha, out.data().data(), a.numel());
    if (should_track({&a})) {
        out.attach_node(
            {a},
            [a, alpha](const Tensor &self) {
                Tensor ga = a;
                kernels::axpy(alpha, self.grad().data(), ga.grad().data(), a.numel());
            },
            "scale");
    }
    return out;
}

Tensor add_row_bias(const Tensor &x, const Tensor &bias) {
    if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
        throw ShapeError("add_row_bias: shapes " + shape_str(x.shape()) + " + " +
                         shape_str(bias.shape()));
    }
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    Tensor out = Tensor::zeros(x.shape());
    kernels::add_row_bias(x.data().data(), bias.data().data(), out.data().data(), rows, cols);
    if (should_track({&x, &bias})) {
        out.attach_node(
            {x, bias},
            [x, bias, rows, cols](const Tensor &self) {
                const double *dy = self.grad().data();
                if (x.requires_grad()) {
                    Tensor gx = x;
                    accumulate(gx, dy, rows * cols);
                }
                if (bias.requires_grad()) {
                    Tensor gb = bias;
                    kernels::col_sums_acc(dy, gb.grad().data(), rows, cols);
                }
            },
            "add_row_bias");
    }
    return out;
}

Tensor transpose(const Tensor &x) {
    if (x.rank() != 2) throw ShapeError("transpose: expected 2-D, got " + shape_str(x.shape()));
    const std::size_t r = x.dim(0), c = x.dim(1);
    Tensor out = Tensor::zeros({c, r});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out.data()[j * r + i] = x.data()[i * c + j];
        }
    }
    if (should_track({&x})) {
        out.attach_node(
            {x},
            [x, r, c](const Tensor &self) {
                Tensor gx = x;
                const double *dy = self.grad().data();
                double *dst = gx.grad().data();
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        dst[i * c + j] += dy[j * r + i];
                    }
                }
            },
            "transpose");
    }
    return out;
}

Tensor slice_rows(const Tensor &x, std::size_t start, std::size_t count) {
    if (x.rank() != 2 || start + count > x.dim(0) || count == 0) {
        throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") of " + shape_str(x.shape()));
    }
    const std::size_t cols = x.dim(1);
    Tensor out = Tensor::zeros({count, cols});
    std::copy_n(x.data().data() + start * cols, count * cols, out.data().data());
    if (should_track({&x})) {
        out.attach_node(
            {x},
            [x, start, count, cols](const Tensor &self) {
                Tensor gx = x;
                kernels::axpy(1.0, self.grad().data(), gx.grad().data() + start * cols,
                              count * cols);
            },
            "slice_rows");
    }
    return out;
}

Tensor slice_cols(const Tensor &x, std::size_t start, std::size_t count) {
    if (x.rank() != 2 || start + count > x.dim(1) || count == 0) {
        throw ShapeError("slice_cols: cols [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") of " + shape_str(x.shape()));
    }
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    Tensor out = Tensor::zeros({rows, count});
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(x.data().data() + r * cols + start, count, out.data().data() + r * count);
    }
    if (should_track({&x})) {
        out.attach_node(
            {x},
            [x, start, count, rows, cols](const Tensor &self) {
                Tensor gx = x;
                const double *dy = self.grad().data();
                double *dst = gx.grad().data();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < count; ++j) {
                        dst[r * cols + start + j] += dy[r * count + j];
                    }
                }
            },
            "slice_cols");
    }
    return out;
}

Tensor concat_rows(const Tensor &a, const Tensor &b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
        throw ShapeError("concat_rows: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const std::size_t cols = a.dim(1);
    Tensor out = Tensor::zeros({a.dim(0) + b.dim(0), cols});
    std::copy_n(a.data().data(), a.numel(), out.data().data());
    std::copy_n(b.data().data(), b.numel(), out.data().data() + a.numel());
    if (should_track({&a, &b})) {
        out.attach_node(
            {a, b},
            [a, b](const Tensor &self) {
                const double *dy = self.grad().data();
                if (a.requires_grad()) {
                    Tensor ga = a;
                    kernels::axpy(1.0, dy, ga.grad().data(), a.numel());
                }
                if (b.requires_grad()) {
                    Tensor gb = b;
                    kernels::axpy(1.0, dy + a.numel(), gb.grad().data(), b.numel());
                }
            },
            "concat_rows");
    }
    return out;
}

Tensor concat_cols(const std::vector<Tensor> &parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const std::size_t rows = parts[0].dim(0);
    std::size_t total_cols = 0;
    for (const Tensor &p : parts) {
        if (p.rank() != 2 || p.dim(0) != rows) {
            throw ShapeError("concat_cols: mismatched part shape " + shape_str(p.shape()));
        }
        total_cols += p.dim(1);
    }
    Tensor out = Tensor::zeros({rows, total_cols});
    std::size_t offset = 0;
    for (const Tensor &p : parts) {
        const std::size_t pc = p.dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(p.data().data() + r * pc, pc, out.data().data() + r * total_cols + offset);
        }
        offset += pc;
    }
    bool track = grad_enabled();
    if (track) {
        track = false;
        for (const Tensor &p : parts) track = track || p.requires_grad();
    }
    if (track) {
        out.attach_node(
            parts,
            [parts, rows, total_cols](const Tensor &self) {
                const double *dy = self.grad().data();
                std::size_t offset = 0;
                for (const Tensor &p : parts) {
                    const std::size_t pc = p.dim(1);
                    if (p.requires_grad()) {
                        Tensor gp = p;
                        double *dst = gp.grad().data();
                        for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t j = 0; j < pc; ++j) {
                                dst[r * pc + j] += dy[r * total_cols + offset + j];
                            }
                        }
                    }
                    offset += pc;
                }
            },
            "concat_cols");
    }
    return out;
}

Tensor reshape(const Tensor &x, std::vector<std::size_t> new_shape) {
    check_positive_dims(new_shape);
    std::size_t n = 1;
    for (std::size_t d : new_shape) n *= d;
    if (n != x.numel()) {
        throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(new_shape));
    }
    Tensor out = Tensor::from_data(std::move(new_shape), x.data());
    if (should_track({&x})) {
        out.attach_node(
            {x},
            [x](const Tensor &self) {
                Tensor gx = x;
                kernels::axpy(1.0, self.grad().data(), gx.grad().data(), x.numel());
            },
            "reshape");
    }
    return out;
}

Tensor sum(const Tensor &x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    Tensor out = Tensor::scalar(total);
    if (should_track({&x})) {
        out.attach_node(
            {x},
            [x](const Tensor &self) {
                Tensor gx = x;
                const double g = self.grad()[0];
                double *dst = gx.grad().data();
                for (std::size_t i = 0; i < x.numel(); ++i) dst[i] += g;
            },
            "sum");
    }
    return out;
}

Tensor dropout(const Tensor &x, double rate, SplitMix64 &rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ValueError("dropout: rate " + std::to_string(rate) + " outside [0, 1)");
    }
    if (rate == 0.0) return x;
    const double keep = 1.0 - rate;
    const double inv_keep = 1.0 / keep;
    auto mask = std::make_shared<std::vector<double>>(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        (*mask)[i] = rng.next_double() < keep ? inv_keep : 0.0;
    }
    Tensor out = Tensor::zeros(x.shape());
    kernels::mul(x.data().data(), mask->data(), out.data().data(), x.numel());
    if (should_track({&x})) {
        out.attach_node(
            {x},
            [x, mask](const Tensor &self) {
                Tensor gx = x;
                const double *dy = self.grad().data();
                double *dst = gx.grad().data();
                for (std::size_t i = 0; i < x.numel(); ++i) dst[i] += dy[i] * (*mask)[i];
            },
            "dropout");
    }
    return out;
}

double finite_diff_check(const std::function<Tensor(const Tensor &)> &f, const Tensor &x,
                         double step) {
    std::vector<std::size_t> entries(x.numel());
    std::iota(entries.begin(), entries.end(), 0);
    return finite_diff_check(f, x, step, entries);
}

double finite_diff_check(const std::function<Tensor(const Tensor &)> &f, const Tensor &x,
                         double step, const std::vector<std::size_t> &entries) {
    Tensor xg = x.clone();
    xg.set_requires_grad(true);
    Tensor loss = f(xg);
    if (loss.numel() != 1) {
        throw ShapeError("finite_diff_check: f must be scalar-valued, got " +
                         shape_str(loss.shape()));
    }
    backward(loss);
    const std::vector<double> analytic = xg.grad();

    Tensor xw = x.clone();
    double max_err = 0.0;
    NoGradGuard no_grad;
    for (std::size_t i : entries) {
        const double orig = xw.data()[i];
        xw.data()[i] = orig + step;
        const double fp = f(xw).item();
        xw.data()[i] = orig - step;
        const double fm = f(xw).item();
        xw.data()[i] = orig;
        const double numeric = (fp - fm) / (2.0 * step);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

}  // namespace vitkit
