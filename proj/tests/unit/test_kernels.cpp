#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qfta/kernels.hpp"
#include "qfta/rng.hpp"
#include "testutil.hpp"

using namespace qfta;

namespace {

std::vector<double> rand_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("matmul matches a naive triple loop") {
  Rng rng(1);
  const int64_t m = 7, k = 13, n = 5;
  const auto a = rand_vec(static_cast<size_t>(m * k), rng);
  const auto b = rand_vec(static_cast<size_t>(k * n), rng);
  std::vector<double> got(static_cast<size_t>(m * n));
  kernels::matmul(a.data(), b.data(), got.data(), m, k, n);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double want = 0.0;
      for (int64_t p = 0; p < k; ++p)
        want += a[static_cast<size_t>(i * k + p)] *
                b[static_cast<size_t>(p * n + j)];
      CHECK(got[static_cast<size_t>(i * n + j)] == doctest::Approx(want));
    }
}

TEST_CASE("serial and OpenMP kernels are bit-identical") {
  Rng rng(2);
  // sizes above the parallel cutoff so the OpenMP path actually runs
  const int64_t m = 120, k = 96, n = 80;
  const auto a = rand_vec(static_cast<size_t>(m * k), rng);
  const auto b = rand_vec(static_cast<size_t>(k * n), rng);
  std::vector<double> c_serial(static_cast<size_t>(m * n)),
      c_omp(static_cast<size_t>(m * n));
  kernels::matmul_serial(a.data(), b.data(), c_serial.data(), m, k, n);
  kernels::matmul(a.data(), b.data(), c_omp.data(), m, k, n);
  CHECK(c_serial == c_omp);

  const int64_t xn = 9000, hm = 300;
  const auto x = rand_vec(static_cast<size_t>(xn), rng);
  const auto h = rand_vec(static_cast<size_t>(hm), rng);
  std::vector<double> y_serial(static_cast<size_t>(xn + hm - 1)),
      y_omp(static_cast<size_t>(xn + hm - 1));
  kernels::conv1d_full_serial(x.data(), xn, h.data(), hm, y_serial.data());
  kernels::conv1d_full(x.data(), xn, h.data(), hm, y_omp.data());
  CHECK(y_serial == y_omp);

  std::vector<double> s_serial(static_cast<size_t>(xn)),
      s_omp(static_cast<size_t>(xn));
  kernels::conv1d_same_serial(x.data(), xn, h.data(), hm, s_serial.data());
  kernels::conv1d_same(x.data(), xn, h.data(), hm, s_omp.data());
  CHECK(s_serial == s_omp);

  kernels::conv1d_causal_serial(x.data(), xn, h.data(), hm, s_serial.data());
  kernels::conv1d_causal(x.data(), xn, h.data(), hm, s_omp.data());
  CHECK(s_serial == s_omp);
}

TEST_CASE("convolution variants agree with the full result") {
  Rng rng(3);
  const int64_t n = 50, m = 7;
  const auto x = rand_vec(static_cast<size_t>(n), rng);
  const auto h = rand_vec(static_cast<size_t>(m), rng);
  std::vector<double> full(static_cast<size_t>(n + m - 1));
  kernels::conv1d_full(x.data(), n, h.data(), m, full.data());

  std::vector<double> causal(static_cast<size_t>(n));
  kernels::conv1d_causal(x.data(), n, h.data(), m, causal.data());
  for (int64_t i = 0; i < n; ++i)
    CHECK(causal[static_cast<size_t>(i)] == full[static_cast<size_t>(i)]);

  std::vector<double> same(static_cast<size_t>(n));
  kernels::conv1d_same(x.data(), n, h.data(), m, same.data());
  const int64_t off = (m - 1) / 2;
  for (int64_t i = 0; i < n; ++i)
    CHECK(same[static_cast<size_t>(i)] == full[static_cast<size_t>(i + off)]);
}

TEST_CASE("convolution with a unit impulse is the identity") {
  Rng rng(4);
  const int64_t n = 64;
  const auto x = rand_vec(static_cast<size_t>(n), rng);
  const std::vector<double> delta = {1.0};
  std::vector<double> y(static_cast<size_t>(n));
  kernels::conv1d_causal(x.data(), n, delta.data(), 1, y.data());
  CHECK(x == y);
}

TEST_CASE("accumulating transpose products match explicit transposes") {
  Rng rng(5);
  const int64_t m = 6, k = 9, n = 4;
  const auto a = rand_vec(static_cast<size_t>(m * k), rng);
  const auto g = rand_vec(static_cast<size_t>(m * n), rng);

  // dB = A^T G via matmul_tn_acc
  std::vector<double> db(static_cast<size_t>(k * n), 0.0);
  kernels::matmul_tn_acc(a.data(), g.data(), db.data(), m, k, n);
  for (int64_t i = 0; i < k; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double want = 0.0;
      for (int64_t p = 0; p < m; ++p)
        want += a[static_cast<size_t>(p * k + i)] *
                g[static_cast<size_t>(p * n + j)];
      CHECK(db[static_cast<size_t>(i * n + j)] == doctest::Approx(want));
    }

  // dA = G B^T via matmul_nt_acc
  const auto b = rand_vec(static_cast<size_t>(k * n), rng);
  std::vector<double> da(static_cast<size_t>(m * k), 0.0);
  kernels::matmul_nt_acc(g.data(), b.data(), da.data(), m, n, k);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < k; ++j) {
      double want = 0.0;
      for (int64_t p = 0; p < n; ++p)
        want += g[static_cast<size_t>(i * n + p)] *
                b[static_cast<size_t>(j * n + p)];
      CHECK(da[static_cast<size_t>(i * k + j)] == doctest::Approx(want));
    }
}
