#pragma once

#include <cstdint>
#include <vector>

namespace qfta::kernels {

// Dense numeric kernels behind the tensor ops. Every kernel has a serial
// reference implementation (the _serial variant) and an OpenMP variant that
// parallelizes over output elements only, so both produce bit-identical
// results; the unit tests assert exact equality and tools/bench-kernels
// compares their throughput.
//
// All matrices are row-major. No aliasing between inputs and outputs.

// c[m x n] = a[m x k] * b[k x n]
void matmul_serial(const double* a, const double* b, double* c, int64_t m,
                   int64_t k, int64_t n);
void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k,
            int64_t n);

// c[m x n] += a[m x k] * b[k x n]   (accumulating; used by matmul adjoints)
void matmul_nn_acc_serial(const double* a, const double* b, double* c,
                          int64_t m, int64_t k, int64_t n);
void matmul_nn_acc(const double* a, const double* b, double* c, int64_t m,
                   int64_t k, int64_t n);

// c[m x n] += a[k x m]^T * b[k x n]   (accumulating; used by matmul adjoints)
void matmul_tn_acc_serial(const double* a, const double* b, double* c,
                          int64_t k, int64_t m, int64_t n);
void matmul_tn_acc(const double* a, const double* b, double* c, int64_t k,
                   int64_t m, int64_t n);

// c[m x n] += a[m x k] * b[n x k]^T
void matmul_nt_acc_serial(const double* a, const double* b, double* c,
                          int64_t m, int64_t k, int64_t n);
void matmul_nt_acc(const double* a, const double* b, double* c, int64_t m,
                   int64_t k, int64_t n);

// Full convolution: y[i] = sum_j x[j] * h[i - j], len(y) = n + m - 1.
void conv1d_full_serial(const double* x, int64_t n, const double* h, int64_t m,
                        double* y);
void conv1d_full(const double* x, int64_t n, const double* h, int64_t m,
                 double* y);

// Causal same-length convolution: the first n samples of the full result.
void conv1d_causal_serial(const double* x, int64_t n, const double* h,
                          int64_t m, double* y);
void conv1d_causal(const double* x, int64_t n, const double* h, int64_t m,
                   double* y);

// Centered same-length convolution (delay-compensated, for linear-phase FIR):
// y[i] = full[i + (m-1)/2].
void conv1d_same_serial(const double* x, int64_t n, const double* h, int64_t m,
                        double* y);
void conv1d_same(const double* x, int64_t n, const double* h, int64_t m,
                 double* y);

// Adjoint of y = conv(x, h) w.r.t. x given upstream dy over the full output:
// dx[j] += sum_i dy[i] * h[i - j]. `y_len` selects full/causal/same layouts
// via the offset of dy into the full output.
void conv1d_adjoint_x_acc(const double* dy, int64_t y_len, int64_t y_offset,
                          const double* h, int64_t m, double* dx, int64_t n);

}  // namespace qfta::kernels
