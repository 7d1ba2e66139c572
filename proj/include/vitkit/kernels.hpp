#pragma once

#include <cstddef>

// Dense numeric kernels behind the tensor ops. Every kernel ships in two
// variants: a plain serial loop (the reference) and an OpenMP version that
// assigns each output element to exactly one thread with the same inner
// summation order, so both produce bit-identical results. The serial
// variants stay exported for the test suite and the benchmark tool.
namespace vitkit::kernels {

enum class Backend { serial, parallel };

Backend active_backend();
void set_backend(Backend b);
bool parallel_available();  // true when compiled with OpenMP

// C(m x n) = opA(m x k) * opB(k x n), row-major. trans_a/trans_b select
// whether a/b are stored transposed. accumulate: C += instead of C =.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double *a, const double *b, double *c, bool accumulate);
void gemm_serial(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 const double *a, const double *b, double *c, bool accumulate);
void gemm_parallel(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                   const double *a, const double *b, double *c, bool accumulate);

// Row-wise softmax with max subtraction.
void softmax_rows(const double *x, double *y, std::size_t rows, std::size_t cols);
void softmax_rows_serial(const double *x, double *y, std::size_t rows, std::size_t cols);
void softmax_rows_parallel(const double *x, double *y, std::size_t rows, std::size_t cols);

// dx += y * (dy - sum_j dy_j y_j), per row.
void softmax_backward_rows(const double *y, const double *dy, double *dx,
                           std::size_t rows, std::size_t cols);
void softmax_backward_rows_serial(const double *y, const double *dy, double *dx,
                                  std::size_t rows, std::size_t cols);
void softmax_backward_rows_parallel(const double *y, const double *dy, double *dx,
                                    std::size_t rows, std::size_t cols);

// y = (x - mean) * rstd * gamma + beta per row; mean/rstd saved per row for
// the backward pass. Variance is the biased (1/cols) estimate.
void layer_norm_rows(const double *x, const double *gamma, const double *beta, double eps,
                     double *y, double *mean, double *rstd, std::size_t rows, std::size_t cols);
void layer_norm_rows_serial(const double *x, const double *gamma, const double *beta, double eps,
                            double *y, double *mean, double *rstd,
                            std::size_t rows, std::size_t cols);
void layer_norm_rows_parallel(const double *x, const double *gamma, const double *beta, double eps,
                              double *y, double *mean, double *rstd,
                              std::size_t rows, std::size_t cols);

// dx += ..., dgamma += column sums of dy*xhat, dbeta += column sums of dy.
void layer_norm_backward_rows(const double *x, const double *gamma, const double *mean,
                              const double *rstd, const double *dy, double *dx, double *dgamma,
                              double *dbeta, std::size_t rows, std::size_t cols);
void layer_norm_backward_rows_serial(const double *x, const double *gamma, const double *mean,
                                     const double *rstd, const double *dy, double *dx,
                                     double *dgamma, double *dbeta,
                                     std::size_t rows, std::size_t cols);
void layer_norm_backward_rows_parallel(const double *x, const double *gamma, const double *mean,
                                       const double *rstd, const double *dy, double *dx,
                                       double *dgamma, double *dbeta,
                                       std::size_t rows, std::size_t cols);

// tanh-approximation GELU, elementwise.
void gelu(const double *x, double *y, std::size_t n);
void gelu_serial(const double *x, double *y, std::size_t n);
void gelu_parallel(const double *x, double *y, std::size_t n);

void gelu_backward(const double *x, const double *dy, double *dx, std::size_t n);
void gelu_backward_serial(const double *x, const double *dy, double *dx, std::size_t n);
void gelu_backward_parallel(const double *x, const double *dy, double *dx, std::size_t n);

// Elementwise out = a + b / out = a * b / out = a * alpha; acc adds into dst.
void add(const double *a, const double *b, double *out, std::size_t n);
void add_serial(const double *a, const double *b, double *out, std::size_t n);
void add_parallel(const double *a, const double *b, double *out, std::size_t n);

void mul(const double *a, const double *b, double *out, std::size_t n);
void mul_serial(const double *a, const double *b, double *out, std::size_t n);
void mul_parallel(const double *a, const double *b, double *out, std::size_t n);

void scale(const double *a, double alpha, double *out, std::size_t n);
void scale_serial(const double *a, double alpha, double *out, std::size_t n);
void scale_parallel(const double *a, double alpha, double *out, std::size_t n);

void axpy(double alpha, const double *x, double *y, std::size_t n);  // y += alpha * x
void axpy_serial(double alpha, const double *x, double *y, std::size_t n);
void axpy_parallel(double alpha, const double *x, double *y, std::size_t n);

// out(r x c) = x(r x c) + bias(c) broadcast over rows.
void add_row_bias(const double *x, const double *bias, double *out,
                  std::size_t rows, std::size_t cols);
void add_row_bias_serial(const double *x, const double *bias, double *out,
                         std::size_t rows, std::size_t cols);
void add_row_bias_parallel(const double *x, const double *bias, double *out,
                           std::size_t rows, std::size_t cols);

// dbias += column sums of dy (serial over rows inside each column).
void col_sums_acc(const double *dy, double *dbias, std::size_t rows, std::size_t cols);
void col_sums_acc_serial(const double *dy, double *dbias, std::size_t rows, std::size_t cols);
void col_sums_acc_parallel(const double *dy, double *dbias, std::size_t rows, std::size_t cols);

}  // namespace vitkit::kernels
