#include "qfta/corrosion.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "qfta/errors.hpp"
#include "qfta/kernels.hpp"

namespace qfta {

const char* mod_kind_name(ModKind k) {
  switch (k) {
    case ModKind::kRD: return "rd";
    case ModKind::kNF: return "nf";
    case ModKind::kSA: return "sa";
    case ModKind::kCD: return "cd";
    case ModKind::kFD: return "fd";
    case ModKind::kTW: return "tw";
    case ModKind::kTM: return "tm";
    case ModKind::kFM: return "fm";
  }
  return "?";
}

bool is_time_domain(ModKind k) {
  return k == ModKind::kRD || k == ModKind::kNF || k == ModKind::kSA ||
         k == ModKind::kCD || k == ModKind::kFD;
}

// ---------------------------------------------------------------------------
// Factories

ModFn rd_mod(std::shared_ptr<const std::vector<Tensor>> rirs) {
  if (!rirs || rirs->empty()) throw Error("rd_mod: empty RIR set");
  ModFn fn;
  fn.kind = ModKind::kRD;
  fn.rirs = std::move(rirs);
  return fn;
}

ModFn nf_mod(double snr_l_db, double snr_h_db) {
  if (snr_l_db < 0.0 || snr_l_db > snr_h_db)
    throw Error("nf_mod: need 0 <= snr_l <= snr_h");
  ModFn fn;
  fn.kind = ModKind::kNF;
  fn.snr_l_db = snr_l_db;
  fn.snr_h_db = snr_h_db;
  return fn;
}

ModFn sa_mod(std::vector<double> ratios) {
  if (ratios.empty()) throw Error("sa_mod: empty ratio list");
  for (double r : ratios)
    if (r <= 0.0) throw Error("sa_mod: ratios must be positive");
  ModFn fn;
  fn.kind = ModKind::kSA;
  fn.ratios = std::move(ratios);
  return fn;
}

ModFn cd_mod(int64_t t_l, int64_t t_u, int c_l, int c_u) {
  if (t_l > t_u || c_l > c_u || t_l < 0 || c_l < 0)
    throw Error("cd_mod: need T_l <= T_u and C_l <= C_u");
  ModFn fn;
  fn.kind = ModKind::kCD;
  fn.span_l = t_l;
  fn.span_u = t_u;
  fn.count_l = c_l;
  fn.count_u = c_u;
  return fn;
}

ModFn cd_mod_untargeted() { return cd_mod(2000, 4000, 0, 5); }

ModFn fd_mod(double f_l_hz, double f_u_hz, int c_l, int c_u) {
  if (f_l_hz < 0.0 || f_l_hz >= f_u_hz || f_u_hz > kSampleRateHz / 2.0 ||
      c_l > c_u || c_l < 0)
    throw Error("fd_mod: bad frequency or count bounds");
  ModFn fn;
  fn.kind = ModKind::kFD;
  fn.freq_l_hz = f_l_hz;
  fn.freq_u_hz = f_u_hz;
  fn.count_l = c_l;
  fn.count_u = c_u;
  return fn;
}

ModFn tw_mod(int w) {
  if (w < 1) throw Error("tw_mod: W >= 1");
  ModFn fn;
  fn.kind = ModKind::kTW;
  fn.warp_frames = w;
  return fn;
}

ModFn tm_mod(int64_t t_max, int c) {
  ModFn fn;
  fn.kind = ModKind::kTM;
  fn.mask_max = t_max;
  fn.mask_count = c;
  return fn;
}

ModFn fm_mod(int64_t f_max, int c) {
  ModFn fn;
  fn.kind = ModKind::kFM;
  fn.mask_max = f_max;
  fn.mask_count = c;
  return fn;
}

// ---------------------------------------------------------------------------
// FIR design

Tensor design_band_stop(double notch_hz, int taps, double stop_band_hz) {
  const int m = (taps - 1) / 2;
  const double fs = kSampleRateHz;
  const double lo = std::max(0.0, notch_hz - stop_band_hz / 2.0);
  const double hi = std::min(fs / 2.0, notch_hz + stop_band_hz / 2.0);

  auto lowpass_tap = [&](double fc, int n) {
    const double x = static_cast<double>(n - m);
    const double arg = 2.0 * fc / fs;
    if (arg == 0.0) return 0.0;  // zero-cutoff low-pass is the zero filter
    if (n == m) return arg;
    return arg * std::sin(M_PI * arg * x) / (M_PI * arg * x);
  };

  Tensor h = Tensor::zeros({taps});
  for (int n = 0; n < taps; ++n) {
    const double hamming =
        0.54 - 0.46 * std::cos(2.0 * M_PI * n / (taps - 1));
    const double bandpass = (lowpass_tap(hi, n) - lowpass_tap(lo, n)) * hamming;
    h.data[static_cast<size_t>(n)] = (n == m ? 1.0 : 0.0) - bandpass;
  }
  return h;
}

double fir_response_at(const Tensor& fir, double freq_hz) {
  double re = 0.0, im = 0.0;
  const double w = 2.0 * M_PI * freq_hz / kSampleRateHz;
  for (int64_t n = 0; n < fir.numel(); ++n) {
    re += fir.data[static_cast<size_t>(n)] * std::cos(w * n);
    im -= fir.data[static_cast<size_t>(n)] * std::sin(w * n);
  }
  return std::sqrt(re * re + im * im);
}

// ---------------------------------------------------------------------------
// Time-domain draws and applications

namespace {

double peak_abs(const std::vector<double>& v) {
  double p = 0.0;
  for (double x : v) p = std::max(p, std::abs(x));
  return p;
}

FrozenDraw draw_time(const ModFn& fn, const Tensor& x, Rng& rng) {
  const int64_t n = x.numel();
  FrozenDraw d;
  d.kind = fn.kind;
  switch (fn.kind) {
    case ModKind::kRD: {
      d.rir_index = static_cast<int>(rng.uniform_int(
          0, static_cast<int64_t>(fn.rirs->size()) - 1));
      // renorm_scale is filled in during application (depends on the output)
      break;
    }
    case ModKind::kNF: {
      // the stored noise is already scaled so the frozen map is fully fixed:
      // P_n = P_v / 10^(snr/10), sigma from the theoretical unit variance
      d.snr_db = rng.uniform(fn.snr_l_db, fn.snr_h_db);
      double p_v = 0.0;
      for (double v : x.data) p_v += v * v;
      p_v /= static_cast<double>(n);
      const double sigma = std::sqrt(p_v / std::pow(10.0, d.snr_db / 10.0));
      d.noise.resize(static_cast<size_t>(n));
      for (double& v : d.noise) v = sigma * rng.normal();
      break;
    }
    case ModKind::kSA: {
      d.ratio = fn.ratios[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(fn.ratios.size()) - 1))];
      break;
    }
    case ModKind::kCD: {
      if (fn.span_u >= n)
        throw ContractError("cd: T_u " + std::to_string(fn.span_u) +
                            " must be < input length " + std::to_string(n));
      const int c =
          static_cast<int>(rng.uniform_int(fn.count_l, fn.count_u));
      for (int i = 0; i < c; ++i) {
        const int64_t len = rng.uniform_int(fn.span_l, fn.span_u);
        const int64_t off = rng.uniform_int(0, n - len);
        d.spans.emplace_back(off, len);
      }
      break;
    }
    case ModKind::kFD: {
      const int c =
          static_cast<int>(rng.uniform_int(fn.count_l, fn.count_u));
      for (int i = 0; i < c; ++i)
        d.notch_hz.push_back(rng.uniform(fn.freq_l_hz, fn.freq_u_hz));
      break;
    }
    default:
      throw ContractError(std::string("draw_time: ") +
                          mod_kind_name(fn.kind) +
                          " is not a time-domain function");
  }
  return d;
}

}  // namespace

Var apply_time_mod_frozen(Tape& tape, const ModFn& fn, Var x,
                          const FrozenDraw& d) {
  const Tensor& xv = tape.value(x);
  const int64_t n = xv.numel();
  switch (fn.kind) {
    case ModKind::kRD: {
      Var rir = tape.constant((*fn.rirs)[static_cast<size_t>(d.rir_index)]);
      Var wet = tape.conv1d_causal(x, rir);
      return tape.mul_scalar(wet, d.renorm_scale);
    }
    case ModKind::kNF: {
      if (static_cast<int64_t>(d.noise.size()) != n)
        throw ContractError("nf: frozen noise length mismatch");
      return tape.add(x, tape.constant(Tensor::vec(d.noise)));
    }
    case ModKind::kSA: {
      if (d.ratio == 1.0) return x;
      const int64_t out_n = static_cast<int64_t>(
          std::floor(static_cast<double>(n) / d.ratio + 0.5));
      std::vector<double> pos(static_cast<size_t>(out_n));
      for (int64_t i = 0; i < out_n; ++i)
        pos[static_cast<size_t>(i)] = static_cast<double>(i) * d.ratio;
      return tape.interp1d(x, std::move(pos));
    }
    case ModKind::kCD: {
      if (d.spans.empty()) return x;
      Tensor mask = Tensor::zeros({n});
      std::fill(mask.data.begin(), mask.data.end(), 1.0);
      for (const auto& [off, len] : d.spans)
        for (int64_t i = off; i < off + len; ++i)
          mask.data[static_cast<size_t>(i)] = 0.0;
      return tape.mask_mul(x, std::move(mask));
    }
    case ModKind::kFD: {
      Var y = x;
      for (double f : d.notch_hz)
        y = tape.conv1d_same(y, tape.constant(design_band_stop(f)));
      return y;
    }
    default:
      throw ContractError(std::string("apply_time_mod: ") +
                          mod_kind_name(fn.kind) +
                          " is not a time-domain function");
  }
}

Var apply_time_mod(Tape& tape, const ModFn& fn, Var x, Rng& rng,
                   FrozenDraw* draw_out) {
  FrozenDraw d = draw_time(fn, tape.value(x), rng);
  if (fn.kind == ModKind::kRD) {
    // scale the wet signal back to the dry peak; the factor is detached
    const Tensor& xv = tape.value(x);
    const Tensor& rir = (*fn.rirs)[static_cast<size_t>(d.rir_index)];
    Tensor wet = Tensor::zeros({xv.numel()});
    kernels::conv1d_causal(xv.data.data(), xv.numel(), rir.data.data(),
                           rir.numel(), wet.data.data());
    const double wet_peak = peak_abs(wet.data);
    const double dry_peak = peak_abs(xv.data);
    d.renorm_scale = wet_peak > 0.0 ? dry_peak / wet_peak : 1.0;
  }
  Var y = apply_time_mod_frozen(tape, fn, x, d);
  if (draw_out) *draw_out = std::move(d);
  return y;
}

// ---------------------------------------------------------------------------
// Frequency-domain draws and applications

namespace {

FrozenDraw draw_freq(const ModFn& fn, const Tensor& m, Rng& rng) {
  const int64_t t = m.rows(), f = m.cols();
  FrozenDraw d;
  d.kind = fn.kind;
  switch (fn.kind) {
    case ModKind::kTW: {
      const int64_t w_param = fn.warp_frames;
      if (t <= 2 * w_param) {
        d.skipped = true;
        break;
      }
      d.warp_point = rng.uniform_int(w_param, t - w_param);
      d.warp_to = std::clamp<int64_t>(
          rng.uniform_int(d.warp_point - w_param, d.warp_point + w_param), 1,
          t - 1);
      break;
    }
    case ModKind::kTM: {
      if (fn.mask_max > t)
        throw ContractError("tm: t' " + std::to_string(fn.mask_max) +
                            " exceeds frame count " + std::to_string(t));
      for (int i = 0; i < fn.mask_count; ++i) {
        const int64_t len = rng.uniform_int(0, fn.mask_max);
        const int64_t off = rng.uniform_int(0, t - len);
        d.spans.emplace_back(off, len);
      }
      break;
    }
    case ModKind::kFM: {
      if (fn.mask_max > f)
        throw ContractError("fm: f' " + std::to_string(fn.mask_max) +
                            " exceeds channel count " + std::to_string(f));
      for (int i = 0; i < fn.mask_count; ++i) {
        const int64_t len = rng.uniform_int(0, fn.mask_max);
        const int64_t off = rng.uniform_int(0, f - len);
        d.spans.emplace_back(off, len);
      }
      break;
    }
    default:
      throw ContractError(std::string("draw_freq: ") +
                          mod_kind_name(fn.kind) +
                          " is not a frequency-domain function");
  }
  return d;
}

}  // namespace

Var apply_freq_mod_frozen(Tape& tape, const ModFn& fn, Var feat,
                          const FrozenDraw& d) {
  const Tensor& mv = tape.value(feat);
  const int64_t t = mv.rows(), f = mv.cols();
  switch (fn.kind) {
    case ModKind::kTW: {
      if (d.skipped || d.warp_to == d.warp_point) return feat;
      const int64_t p = d.warp_point, w = d.warp_to;
      std::vector<double> pos(static_cast<size_t>(t));
      for (int64_t i = 0; i < w; ++i)
        pos[static_cast<size_t>(i)] =
            (static_cast<double>(i) + 0.5) * static_cast<double>(p) /
                static_cast<double>(w) -
            0.5;
      for (int64_t i = w; i < t; ++i)
        pos[static_cast<size_t>(i)] =
            static_cast<double>(p) +
            (static_cast<double>(i - w) + 0.5) * static_cast<double>(t - p) /
                static_cast<double>(t - w) -
            0.5;
      return tape.row_interp(feat, std::move(pos));
    }
    case ModKind::kTM: {
      if (d.spans.empty()) return feat;
      Tensor mask = Tensor::zeros({t, f});
      std::fill(mask.data.begin(), mask.data.end(), 1.0);
      for (const auto& [off, len] : d.spans)
        for (int64_t i = off; i < off + len; ++i)
          for (int64_t j = 0; j < f; ++j) mask.at(i, j) = 0.0;
      return tape.mask_mul(feat, std::move(mask));
    }
    case ModKind::kFM: {
      if (d.spans.empty()) return feat;
      Tensor mask = Tensor::zeros({t, f});
      std::fill(mask.data.begin(), mask.data.end(), 1.0);
      for (const auto& [off, len] : d.spans)
        for (int64_t j = off; j < off + len; ++j)
          for (int64_t i = 0; i < t; ++i) mask.at(i, j) = 0.0;
      return tape.mask_mul(feat, std::move(mask));
    }
    default:
      throw ContractError(std::string("apply_freq_mod: ") +
                          mod_kind_name(fn.kind) +
                          " is not a frequency-domain function");
  }
}

Var apply_freq_mod(Tape& tape, const ModFn& fn, Var feat, Rng& rng,
                   FrozenDraw* draw_out) {
  FrozenDraw d = draw_freq(fn, tape.value(feat), rng);
  Var y = apply_freq_mod_frozen(tape, fn, feat, d);
  if (draw_out) *draw_out = std::move(d);
  return y;
}

// ---------------------------------------------------------------------------
// Plain-value wrappers

std::pair<Waveform, FrozenDraw> apply_time_mod(const ModFn& fn,
                                               const Waveform& x, Rng& rng) {
  Tape tape;
  Var in = tape.constant(Tensor::vec(x.samples));
  FrozenDraw d;
  Var out = apply_time_mod(tape, fn, in, rng, &d);
  Waveform w;
  w.samples = tape.value(out).data;
  return {std::move(w), std::move(d)};
}

Waveform apply_time_mod_frozen(const ModFn& fn, const Waveform& x,
                               const FrozenDraw& draw) {
  Tape tape;
  Var in = tape.constant(Tensor::vec(x.samples));
  Var out = apply_time_mod_frozen(tape, fn, in, draw);
  Waveform w;
  w.samples = tape.value(out).data;
  return w;
}

std::pair<Tensor, FrozenDraw> apply_freq_mod(const ModFn& fn, const Tensor& m,
                                             Rng& rng) {
  Tape tape;
  Var in = tape.constant(m);
  FrozenDraw d;
  Var out = apply_freq_mod(tape, fn, in, rng, &d);
  return {tape.value(out), std::move(d)};
}

Tensor apply_freq_mod_frozen(const ModFn& fn, const Tensor& m,
                             const FrozenDraw& draw) {
  Tape tape;
  Var in = tape.constant(m);
  Var out = apply_freq_mod_frozen(tape, fn, in, draw);
  return tape.value(out);
}

// ---------------------------------------------------------------------------
// Composition and simulated SRSs

std::string SerialMod::name() const {
  if (fns.empty()) return "none";
  std::string out;
  for (size_t i = 0; i < fns.size(); ++i) {
    if (i) out += "+";
    out += mod_kind_name(fns[i].kind);
  }
  return out;
}

SerialMod compose_serial(std::vector<ModFn> fns) {
  bool seen_freq = false;
  for (const ModFn& fn : fns) {
    if (is_time_domain(fn.kind)) {
      if (seen_freq)
        throw ContractError(
            std::string("compose_serial: time-domain function ") +
            mod_kind_name(fn.kind) +
            " must precede all frequency-domain functions");
    } else {
      seen_freq = true;
    }
  }
  return SerialMod{std::move(fns)};
}

std::vector<SerialMod> default_parallel_mods(
    Scenario scenario, std::shared_ptr<const std::vector<Tensor>> rirs) {
  const ModFn cd =
      scenario == Scenario::kTargetedOSI ? cd_mod() : cd_mod_untargeted();
  return {
      compose_serial({rd_mod(std::move(rirs)), nf_mod()}),
      compose_serial({sa_mod(), cd, fd_mod()}),
      compose_serial({tw_mod(), tm_mod(), fm_mod()}),
  };
}

Var SimulatedSRS::score(Tape& tape, Var x, Rng& rng, FeatureCache* cache,
                        std::vector<FrozenDraw>* draws_out) const {
  Var wave = x;
  std::vector<FrozenDraw> draws;
  size_t i = 0;
  for (; i < mod.fns.size() && is_time_domain(mod.fns[i].kind); ++i) {
    FrozenDraw d;
    wave = apply_time_mod(tape, mod.fns[i], wave, rng, &d);
    draws.push_back(std::move(d));
  }
  Var power = cache ? cache->power(tape, wave, base->feature_cfg)
                    : spectrogram_on_tape(tape, wave, base->feature_cfg);
  for (; i < mod.fns.size(); ++i) {
    FrozenDraw d;
    power = apply_freq_mod(tape, mod.fns[i], power, rng, &d);
    draws.push_back(std::move(d));
  }
  Var feats = features_from_power(tape, power, base->spec.feature_kind,
                                  base->feature_cfg);
  if (draws_out) *draws_out = std::move(draws);
  return score_from_features(tape, *base, feats);
}

Var SimulatedSRS::score_frozen(Tape& tape, Var x,
                               const std::vector<FrozenDraw>& draws,
                               FeatureCache* cache) const {
  if (draws.size() != mod.fns.size())
    throw ContractError("score_frozen: draw count mismatch");
  Var wave = x;
  size_t i = 0;
  for (; i < mod.fns.size() && is_time_domain(mod.fns[i].kind); ++i)
    wave = apply_time_mod_frozen(tape, mod.fns[i], wave, draws[i]);
  Var power = cache ? cache->power(tape, wave, base->feature_cfg)
                    : spectrogram_on_tape(tape, wave, base->feature_cfg);
  for (; i < mod.fns.size(); ++i)
    power = apply_freq_mod_frozen(tape, mod.fns[i], power, draws[i]);
  Var feats = features_from_power(tape, power, base->spec.feature_kind,
                                  base->feature_cfg);
  return score_from_features(tape, *base, feats);
}

std::vector<SimulatedSRS> build_simulated_zoo(
    const std::vector<const SRSModel*>& srs_zoo,
    const std::vector<SerialMod>& mods) {
  if (srs_zoo.empty()) throw ContractError("build_simulated_zoo: empty zoo");
  std::vector<SimulatedSRS> out;
  if (mods.empty()) {
    for (const SRSModel* m : srs_zoo) out.push_back({m, SerialMod{}});
    return out;
  }
  for (const SRSModel* m : srs_zoo)
    for (const SerialMod& mod : mods) out.push_back({m, mod});
  return out;
}

// ---------------------------------------------------------------------------
// Room impulse responses

std::vector<Tensor> gen_rirs(int n, const RoomRanges& ranges, uint64_t seed) {
  if (n < 1) throw Error("gen_rirs: n >= 1");
  constexpr int kTaps = 4000;
  constexpr double kSpeedOfSound = 343.0;
  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) {
    Rng rng(Rng::derive(seed, 0x7269720ULL + static_cast<uint64_t>(r)));
    double dims[3], src[3], mic[3];
    for (int k = 0; k < 3; ++k) {
      dims[k] = rng.uniform(ranges.dim_lo_m, ranges.dim_hi_m);
      src[k] = rng.uniform(0.5, dims[k] - 0.5);
      mic[k] = rng.uniform(0.5, dims[k] - 0.5);
    }
    const double rt60 = rng.uniform(ranges.rt60_lo_s, ranges.rt60_hi_s);

    // Sabine absorption -> wall reflection coefficient
    const double volume = dims[0] * dims[1] * dims[2];
    const double surface = 2.0 * (dims[0] * dims[1] + dims[0] * dims[2] +
                                  dims[1] * dims[2]);
    const double absorption =
        std::min(0.95, 0.163 * volume / (surface * rt60));
    const double beta = std::sqrt(1.0 - absorption);

    double direct_dist = 0.0;
    for (int k = 0; k < 3; ++k)
      direct_dist += (src[k] - mic[k]) * (src[k] - mic[k]);
    direct_dist = std::sqrt(std::max(direct_dist, 0.1));

    Tensor rir = Tensor::zeros({kTaps});
    // direct path at tap 0 (absolute propagation delay dropped)
    rir.data[0] = 1.0;

    // first-order images: one reflection per wall
    for (int k = 0; k < 3; ++k) {
      for (int side = 0; side < 2; ++side) {
        double img[3] = {src[0], src[1], src[2]};
        img[k] = side == 0 ? -src[k] : 2.0 * dims[k] - src[k];
        double dist = 0.0;
        for (int q = 0; q < 3; ++q)
          dist += (img[q] - mic[q]) * (img[q] - mic[q]);
        dist = std::sqrt(dist);
        const int64_t delay = static_cast<int64_t>(
            std::llround((dist - direct_dist) / kSpeedOfSound *
                         kSampleRateHz));
        if (delay >= 1 && delay < kTaps)
          rir.data[static_cast<size_t>(delay)] +=
              beta * direct_dist / dist;
      }
    }

    // geometric-decay tail: -60 dB at RT60
    const double decay_per_sample =
        std::log(10.0) * 3.0 / (rt60 * kSampleRateHz);
    const int64_t tail_start =
        1 + static_cast<int64_t>(0.004 * kSampleRateHz);
    const double tail_level = 0.12 * beta * beta;
    for (int64_t i = tail_start; i < kTaps; ++i)
      rir.data[static_cast<size_t>(i)] +=
          tail_level * rng.normal() *
          std::exp(-decay_per_sample * static_cast<double>(i - tail_start));

    // keep the direct path dominant even when reflections collide on a tap
    double late_peak = 0.0;
    for (int64_t i = 1; i < kTaps; ++i)
      late_peak = std::max(late_peak,
                           std::abs(rir.data[static_cast<size_t>(i)]));
    if (late_peak >= 0.95) {
      const double shrink = 0.95 / late_peak;
      for (int64_t i = 1; i < kTaps; ++i)
        rir.data[static_cast<size_t>(i)] *= shrink;
    }
    out.push_back(std::move(rir));
  }
  return out;
}

void save_rirs(const std::string& path, const std::vector<Tensor>& rirs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("save_rirs: cannot open " + path);
  auto put = [&](double v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  };
  put(static_cast<double>(rirs.size()));
  put(rirs.empty() ? 0.0 : static_cast<double>(rirs.front().numel()));
  for (const Tensor& r : rirs)
    for (double v : r.data) put(v);
  if (!out) throw FormatError("save_rirs: write failed for " + path);
}

std::vector<Tensor> load_rirs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_rirs: cannot open " + path);
  auto get = [&]() {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  const int64_t count = static_cast<int64_t>(get());
  const int64_t taps = static_cast<int64_t>(get());
  std::vector<Tensor> out;
  for (int64_t r = 0; r < count; ++r) {
    Tensor t = Tensor::zeros({taps});
    for (double& v : t.data) v = get();
    out.push_back(std::move(t));
  }
  if (!in) throw FormatError("load_rirs: truncated file " + path);
  return out;
}

}  // namespace qfta
