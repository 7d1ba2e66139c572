#include "vitkit/kernels.hpp"

#include <atomic>

namespace vitkit::kernels {

namespace {
std::atomic<Backend> g_backend{parallel_available() ? Backend::parallel : Backend::serial};
}

bool parallel_available() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

#define VITKIT_DISPATCH(NAME, ...)                    \
    do {                                              \
        if (active_backend() == Backend::parallel) {  \
            NAME##_parallel(__VA_ARGS__);             \
        } else {                                      \
            NAME##_serial(__VA_ARGS__);               \
        }                                             \
    } while (0)

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double *a, const double *b, double *c, bool accumulate) {
    VITKIT_DISPATCH(gemm, trans_a, trans_b, m, n, k, a, b, c, accumulate);
}

void softmax_rows(const double *x, double *y, std::size_t rows, std::size_t cols) {
    VITKIT_DISPATCH(softmax_rows, x, y, rows, cols);
}

void softmax_backward_rows(const double *y, const double *dy, double *dx,
                           std::size_t rows, std::size_t cols) {
    VITKIT_DISPATCH(softmax_backward_rows, y, dy, dx, rows, cols);
}

void layer_norm_rows(const double *x, const double *gamma, const double *beta, double eps,
                     double *y, double *mean, double *rstd, std::size_t rows, std::size_t cols) {
    VITKIT_DISPATCH(layer_norm_rows, x, gamma, beta, eps, y, mean, rstd, rows, cols);
}

void layer_norm_backward_rows(const double *x, const double *gamma, const double *mean,
                              const double *rstd, const double *dy, double *dx, double *dgamma,
                              double *dbeta, std::size_t rows, std::size_t cols) {
    VITKIT_DISPATCH(layer_norm_backward_rows, x, gamma, mean, rstd, dy, dx, dgamma, dbeta, rows,
                    cols);
}

void gelu(const double *x, double *y, std::size_t n) { VITKIT_DISPATCH(gelu, x, y, n); }

void gelu_backward(const double *x, const double *dy, double *dx, std::size_t n) {
    VITKIT_DISPATCH(gelu_backward, x, dy, dx, n);
}

void add(const double *a, const double *b, double *out, std::size_t n) {
    VITKIT_DISPATCH(add, a, b, out, n);
}

void mul(const double *a, const double *b, double *out, std::size_t n) {
    VITKIT_DISPATCH(mul, a, b, out, n);
}

void scale(const double *a, double alpha, double *out, std::size_t n) {
    VITKIT_DISPATCH(scale, a, alpha, out, n);
}

void axpy(double alpha, const double *x, double *y, std::size_t n) {
    VITKIT_DISPATCH(axpy, alpha, x, y, n);
}

void add_row_bias(const double *x, const double *bias, double *out,
                  std::size_t rows, std::size_t cols) {
    VITKIT_DISPATCH(add_row_bias, x, bias, out, rows, cols);
}

void col_sums_acc(const double *dy, double *dbias, std::size_t rows, std::size_t cols) {
    VITKIT_DISPATCH(col_sums_acc, dy, dbias, rows, cols);
}

#undef VITKIT_DISPATCH

}  // namespace vitkit::kernels
