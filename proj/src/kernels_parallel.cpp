#include <cmath>

#include "vitkit/kernels.hpp"

// OpenMP variants. Each output element is owned by exactly one thread and the
// inner summation order matches the serial reference, so results are
// bit-identical for any thread count. Small sizes stay serial via the `if`
// clause. Without OpenMP these compile to the same loops.

namespace vitkit::kernels {

namespace {
constexpr double kGeluCoeff0 = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCoeff1 = 0.044715;
constexpr std::size_t kParallelCutoff = 4096;  // elements of work per kernel
using idx_t = long long;
}  // namespace

void gemm_parallel(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                   const double *a, const double *b, double *c, bool accumulate) {
    const bool big = m * n * k >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (idx_t i = 0; i < static_cast<idx_t>(m); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = trans_a ? a[p * m + i] : a[i * k + p];
                const double bv = trans_b ? b[j * k + p] : b[p * n + j];
                acc += av * bv;
            }
            if (accumulate) {
                c[i * n + j] += acc;
            } else {
                c[i * n + j] = acc;
            }
        }
    }
}

void softmax_rows_parallel(const double *x, double *y, std::size_t rows, std::size_t cols) {
    const bool big = rows * cols >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (idx_t r = 0; r < static_cast<idx_t>(rows); ++r) {
        const double *xr = x + r * cols;
        double *yr = y + r * cols;
        double m = xr[0];
        for (std::size_t j = 1; j < cols; ++j) m = std::max(m, xr[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - m);
            sum += yr[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

void softmax_backward_rows_parallel(const double *y, const double *dy, double *dx,
                                    std::size_t rows, std::size_t cols) {
    const bool big = rows * cols >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (idx_t r = 0; r < static_cast<idx_t>(rows); ++r) {
        const double *yr = y + r * cols;
        const double *dyr = dy + r * cols;
        double *dxr = dx + r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += dyr[j] * yr[j];
        for (std::size_t j = 0; j < cols; ++j) dxr[j] += yr[j] * (dyr[j] - dot);
    }
}

void layer_norm_rows_parallel(const double *x, const double *gamma, const double *beta, double eps,
                              double *y, double *mean, double *rstd,
                              std::size_t rows, std::size_t cols) {
    const bool big = rows * cols >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (idx_t r = 0; r < static_cast<idx_t>(rows); ++r) {
        const double *xr = x + r * cols;
        double *yr = y + r * cols;
        double mu = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mu += xr[j];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double d = xr[j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        const double rs = 1.0 / std::sqrt(var + eps);
        mean[r] = mu;
        rstd[r] = rs;
        for (std::size_t j = 0; j < cols; ++j) {
            yr[j] = (xr[j] - mu) * rs * gamma[j] + beta[j];
        }
    }
}

void layer_norm_backward_rows_parallel(const double *x, const double *gamma, const double *mean,
                                       const double *rstd, const double *dy, double *dx,
                                       double *dgamma, double *dbeta,
                                       std::size_t rows, std::size_t cols) {
    const double inv_cols = 1.0 / static_cast<double>(cols);
    const bool big = rows * cols >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (idx_t r = 0; r < static_cast<idx_t>(rows); ++r) {
        const double *xr = x + r * cols;
        const double *dyr = dy + r * cols;
        double *dxr = dx + r * cols;
        const double mu = mean[r];
        const double rs = rstd[r];
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double xhat = (xr[j] - mu) * rs;
            const double dxhat = dyr[j] * gamma[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
        }
        for (std::size_t j = 0; j < cols; ++j) {
            const double xhat = (xr[j] - mu) * rs;
            const double dxhat = dyr[j] * gamma[j];
            dxr[j] += rs * (dxhat - inv_cols * sum_dxhat - xhat * inv_cols * sum_dxhat_xhat);
        }
    }
    if (dgamma != nullptr || dbeta != nullptr) {
#pragma omp parallel for schedule(static) if (big)
        for (idx_t j = 0; j < static_cast<idx_t>(cols); ++j) {
            double dg = 0.0;
            double db = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
                const double xhat = (x[r * cols + j] - mean[r]) * rstd[r];
                dg += dy[r * cols + j] * xhat;
                db += dy[r * cols + j];
            }
            if (dgamma != nullptr) dgamma[j] += dg;
            if (dbeta != nullptr) dbeta[j] += db;
        }
    }
}

void gelu_parallel(const double *x, double *y, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
    for (idx_t i = 0; i < static_cast<idx_t>(n); ++i) {
        const double v = x[i];
        const double inner = kGeluCoeff0 * (v + kGeluCoeff1 * v * v * v);
        y[i] = 0.5 * v * (1.0 + std::tanh(inner));
    }
}

void gelu_backward_parallel(const double *x, const double *dy, double *dx, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
    for (idx_t i = 0; i < static_cast<idx_t>(n); ++i) {
        const double v = x[i];
        const double inner = kGeluCoeff0 * (v + kGeluCoeff1 * v * v * v);
        const double t = std::tanh(inner);
        const double dinner = kGeluCoeff0 * (1.0 + 3.0 * kGeluCoeff1 * v * v);
        const double grad = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner;
        dx[i] += dy[i] * grad;
    }
}

void add_parallel(const double *a, const double *b, double *out, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
    for (idx_t i = 0; i < static_cast<idx_t>(n); ++i) out[i] = a[i] + b[i];
}

void mul_parallel(const double *a, const double *b, double *out, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
    for (idx_t i = 0; i < static_cast<idx_t>(n); ++i) out[i] = a[i] * b[i];
}

void scale_parallel(const double *a, double alpha, double *out, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
    for (idx_t i = 0; i < static_cast<idx_t>(n); ++i) out[i] = a[i] * alpha;
}

void axpy_parallel(double alpha, const double *x, double *y, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
    for (idx_t i = 0; i < static_cast<idx_t>(n); ++i) y[i] += alpha * x[i];
}

void add_row_bias_parallel(const double *x, const double *bias, double *out,
                           std::size_t rows, std::size_t cols) {
    const bool big = rows * cols >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (idx_t r = 0; r < static_cast<idx_t>(rows); ++r) {
        for (std::size_t j = 0; j < cols; ++j) {
            out[r * cols + j] = x[r * cols + j] + bias[j];
        }
    }
}

void col_sums_acc_parallel(const double *dy, double *dbias, std::size_t rows, std::size_t cols) {
    const bool big = rows * cols >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (idx_t j = 0; j < static_cast<idx_t>(cols); ++j) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) acc += dy[r * cols + j];
        dbias[j] += acc;
    }
}

}  // namespace vitkit::kernels
