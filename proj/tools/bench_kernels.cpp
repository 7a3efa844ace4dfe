// Compares the serial reference kernels against their OpenMP variants:
// throughput and bit-exactness on the shapes the attack pipeline actually
// uses (STFT-sized matmuls, RIR-length convolutions, full score passes).

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "qfta/features.hpp"
#include "qfta/kernels.hpp"
#include "qfta/rng.hpp"

using namespace qfta;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - start).count() / reps;
}

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a == b;
}

}  // namespace

int main() {
  Rng rng(42);
  std::printf("threads: %d\n\n", omp_get_max_threads());
  std::printf("%-34s %10s %10s %8s %s\n", "kernel", "serial ms", "omp ms",
              "speedup", "bit-equal");

  {
    // STFT-shaped matmul: frames x window times window x bins
    const int64_t m = 98, k = 400, n = 257;
    const auto a = random_vec(static_cast<size_t>(m * k), rng);
    const auto b = random_vec(static_cast<size_t>(k * n), rng);
    std::vector<double> c1(static_cast<size_t>(m * n)),
        c2(static_cast<size_t>(m * n));
    const double ts = time_ms(
        [&] { kernels::matmul_serial(a.data(), b.data(), c1.data(), m, k, n); },
        20);
    const double tp = time_ms(
        [&] { kernels::matmul(a.data(), b.data(), c2.data(), m, k, n); }, 20);
    std::printf("%-34s %10.3f %10.3f %7.2fx %s\n", "matmul 98x400x257", ts, tp,
                ts / tp, bit_equal(c1, c2) ? "yes" : "NO");
  }

  {
    // reverberation-shaped convolution: 1 s of audio against a 4000-tap RIR
    const int64_t n = 16000, m = 4000;
    const auto x = random_vec(static_cast<size_t>(n), rng);
    const auto h = random_vec(static_cast<size_t>(m), rng);
    std::vector<double> y1(static_cast<size_t>(n)), y2(static_cast<size_t>(n));
    const double ts = time_ms(
        [&] {
          kernels::conv1d_causal_serial(x.data(), n, h.data(), m, y1.data());
        },
        5);
    const double tp = time_ms(
        [&] { kernels::conv1d_causal(x.data(), n, h.data(), m, y2.data()); },
        5);
    std::printf("%-34s %10.3f %10.3f %7.2fx %s\n", "conv1d 16000x4000", ts, tp,
                ts / tp, bit_equal(y1, y2) ? "yes" : "NO");
  }

  {
    // notch-filter-shaped convolution
    const int64_t n = 16000, m = 101;
    const auto x = random_vec(static_cast<size_t>(n), rng);
    const auto h = random_vec(static_cast<size_t>(m), rng);
    std::vector<double> y1(static_cast<size_t>(n)), y2(static_cast<size_t>(n));
    const double ts = time_ms(
        [&] {
          kernels::conv1d_same_serial(x.data(), n, h.data(), m, y1.data());
        },
        50);
    const double tp = time_ms(
        [&] { kernels::conv1d_same(x.data(), n, h.data(), m, y2.data()); },
        50);
    std::printf("%-34s %10.3f %10.3f %7.2fx %s\n", "conv1d 16000x101", ts, tp,
                ts / tp, bit_equal(y1, y2) ? "yes" : "NO");
  }

  {
    // end-to-end feature extraction (dominated by the DFT matmuls)
    Waveform w;
    w.samples = random_vec(16000, rng);
    for (double& v : w.samples) v *= 0.1;
    FeatureConfig cfg;
    const double t_fbank = time_ms(
        [&] { extract_features(w, FeatureKind::kFbank, cfg); }, 5);
    std::printf("%-34s %10s %10.3f %8s %s\n", "fbank 1s (pipeline)", "-",
                t_fbank, "-", "-");
  }
  return 0;
}
