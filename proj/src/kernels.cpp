#include "qfta/kernels.hpp"

#include <algorithm>

namespace qfta::kernels {

namespace {
// Below this many output elements the OpenMP fork costs more than the loop.
constexpr int64_t kParallelCutoff = 4096;
}  // namespace

void matmul_serial(const double* a, const double* b, double* c, int64_t m,
                   int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    std::fill(ci, ci + n, 0.0);
    for (int64_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k,
            int64_t n) {
  if (m * n < kParallelCutoff) {
    matmul_serial(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    std::fill(ci, ci + n, 0.0);
    for (int64_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_nn_acc_serial(const double* a, const double* b, double* c,
                          int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_nn_acc(const double* a, const double* b, double* c, int64_t m,
                   int64_t k, int64_t n) {
  if (m * n < kParallelCutoff) {
    matmul_nn_acc_serial(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_tn_acc_serial(const double* a, const double* b, double* c,
                          int64_t k, int64_t m, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double api = a[p * m + i];
      const double* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c, int64_t k,
                   int64_t m, int64_t n) {
  if (m * n < kParallelCutoff) {
    matmul_tn_acc_serial(a, b, c, k, m, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double api = a[p * m + i];
      const double* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

void matmul_nt_acc_serial(const double* a, const double* b, double* c,
                          int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

void matmul_nt_acc(const double* a, const double* b, double* c, int64_t m,
                   int64_t k, int64_t n) {
  if (m * n < kParallelCutoff) {
    matmul_nt_acc_serial(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

namespace {

// One output sample of the full convolution; the accumulation order over j
// is identical in the serial and parallel variants.
inline double conv_point(const double* x, int64_t n, const double* h,
                         int64_t m, int64_t i) {
  const int64_t j_lo = std::max<int64_t>(0, i - m + 1);
  const int64_t j_hi = std::min<int64_t>(n - 1, i);
  double acc = 0.0;
  for (int64_t j = j_lo; j <= j_hi; ++j) acc += x[j] * h[i - j];
  return acc;
}

}  // namespace

void conv1d_full_serial(const double* x, int64_t n, const double* h, int64_t m,
                        double* y) {
  const int64_t out = n + m - 1;
  for (int64_t i = 0; i < out; ++i) y[i] = conv_point(x, n, h, m, i);
}

void conv1d_full(const double* x, int64_t n, const double* h, int64_t m,
                 double* y) {
  const int64_t out = n + m - 1;
  if (out * std::min(n, m) < kParallelCutoff) {
    conv1d_full_serial(x, n, h, m, y);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < out; ++i) y[i] = conv_point(x, n, h, m, i);
}

void conv1d_causal_serial(const double* x, int64_t n, const double* h,
                          int64_t m, double* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = conv_point(x, n, h, m, i);
}

void conv1d_causal(const double* x, int64_t n, const double* h, int64_t m,
                   double* y) {
  if (n * std::min(n, m) < kParallelCutoff) {
    conv1d_causal_serial(x, n, h, m, y);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = conv_point(x, n, h, m, i);
}

void conv1d_same_serial(const double* x, int64_t n, const double* h, int64_t m,
                        double* y) {
  const int64_t off = (m - 1) / 2;
  for (int64_t i = 0; i < n; ++i) y[i] = conv_point(x, n, h, m, i + off);
}

void conv1d_same(const double* x, int64_t n, const double* h, int64_t m,
                 double* y) {
  if (n * std::min(n, m) < kParallelCutoff) {
    conv1d_same_serial(x, n, h, m, y);
    return;
  }
  const int64_t off = (m - 1) / 2;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = conv_point(x, n, h, m, i + off);
}

void conv1d_adjoint_x_acc(const double* dy, int64_t y_len, int64_t y_offset,
                          const double* h, int64_t m, double* dx, int64_t n) {
  // dx[j] += sum over full-output positions i of dy[i - y_offset] * h[i - j],
  // restricted to i within [y_offset, y_offset + y_len).
  const bool parallel = n * std::min(y_len, m) >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (parallel)
  for (int64_t j = 0; j < n; ++j) {
    const int64_t i_lo = std::max(j, y_offset);
    const int64_t i_hi = std::min(j + m - 1, y_offset + y_len - 1);
    double acc = 0.0;
    for (int64_t i = i_lo; i <= i_hi; ++i) acc += dy[i - y_offset] * h[i - j];
    dx[j] += acc;
  }
}

}  // namespace qfta::kernels
