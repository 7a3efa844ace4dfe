#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qfta/audio.hpp"
#include "qfta/losses.hpp"
#include "qfta/rng.hpp"
#include "qfta/srs.hpp"
#include "qfta/tensor.hpp"

namespace qfta {

// Time-domain functions act on the waveform before feature extraction;
// frequency-domain functions act on the power spectrogram.
enum class ModKind { kRD, kNF, kSA, kCD, kFD, kTW, kTM, kFM };

const char* mod_kind_name(ModKind k);
bool is_time_domain(ModKind k);

// One randomized modification function with its tuned parameters. Only the
// fields of the active kind are meaningful; use the factory functions.
struct ModFn {
  ModKind kind = ModKind::kNF;

  std::shared_ptr<const std::vector<Tensor>> rirs;  // RD
  double snr_l_db = 0.0, snr_h_db = 5.0;            // NF
  std::vector<double> ratios{0.95, 1.0, 1.05};      // SA
  int64_t span_l = 0, span_u = 0;                   // CD sample-span bounds
  double freq_l_hz = 0.0, freq_u_hz = 8000.0;       // FD notch range
  int count_l = 0, count_u = 0;                     // CD/FD repetition bounds
  int warp_frames = 11;                             // TW parameter W
  int64_t mask_max = 0;                             // TM t' / FM f'
  int mask_count = 2;                               // TM/FM parameter c
};

// Factories with the tuned defaults.
ModFn rd_mod(std::shared_ptr<const std::vector<Tensor>> rirs);
ModFn nf_mod(double snr_l_db = 0.0, double snr_h_db = 5.0);
ModFn sa_mod(std::vector<double> ratios = {0.95, 1.0, 1.05});
ModFn cd_mod(int64_t t_l = 5000, int64_t t_u = 5000, int c_l = 4, int c_u = 5);
ModFn cd_mod_untargeted();  // T_l=2000, T_u=4000, C_l=0, C_u=5
ModFn fd_mod(double f_l_hz = 0.0, double f_u_hz = 8000.0, int c_l = 4,
             int c_u = 5);
ModFn tw_mod(int w = 11);
ModFn tm_mod(int64_t t_max = 90, int c = 2);
ModFn fm_mod(int64_t f_max = 7, int c = 2);

// Realized randomness of one application, recorded so the modified output
// can be replayed bit-exactly and differentiated as a fixed deterministic map.
struct FrozenDraw {
  ModKind kind = ModKind::kNF;
  int rir_index = -1;
  double renorm_scale = 1.0;  // RD peak renormalization (detached)
  double snr_db = 0.0;
  std::vector<double> noise;  // NF realized noise (unscaled unit gaussians)
  double ratio = 1.0;
  std::vector<std::pair<int64_t, int64_t>> spans;  // CD/TM/FM (offset, len)
  std::vector<double> notch_hz;
  int64_t warp_point = -1, warp_to = -1;  // TW P and w
  bool skipped = false;                   // TW on degenerate inputs
};

// --- single-function application (waveform side) ---
// Draw fresh randomness from `rng`, apply on-tape, and record the draw.
Var apply_time_mod(Tape& tape, const ModFn& fn, Var x, Rng& rng,
                   FrozenDraw* draw_out);
// Replay a recorded draw (bit-exact for equal inputs).
Var apply_time_mod_frozen(Tape& tape, const ModFn& fn, Var x,
                          const FrozenDraw& draw);

// --- single-function application (feature side, on the power spectrogram) ---
Var apply_freq_mod(Tape& tape, const ModFn& fn, Var feat, Rng& rng,
                   FrozenDraw* draw_out);
Var apply_freq_mod_frozen(Tape& tape, const ModFn& fn, Var feat,
                          const FrozenDraw& draw);

// Plain-value convenience wrappers.
std::pair<Waveform, FrozenDraw> apply_time_mod(const ModFn& fn,
                                               const Waveform& x, Rng& rng);
Waveform apply_time_mod_frozen(const ModFn& fn, const Waveform& x,
                               const FrozenDraw& draw);
std::pair<Tensor, FrozenDraw> apply_freq_mod(const ModFn& fn, const Tensor& m,
                                             Rng& rng);
Tensor apply_freq_mod_frozen(const ModFn& fn, const Tensor& m,
                             const FrozenDraw& draw);

// Serial composite: time-domain members must precede frequency-domain ones.
struct SerialMod {
  std::vector<ModFn> fns;
  bool empty() const { return fns.empty(); }
  std::string name() const;
};

SerialMod compose_serial(std::vector<ModFn> fns);

// The default parallel set {RD+NF, SA+CD+FD, TW+TM+FM}; CD uses the
// untargeted bounds outside targeted OSI.
std::vector<SerialMod> default_parallel_mods(
    Scenario scenario, std::shared_ptr<const std::vector<Tensor>> rirs);

// A surrogate SRS wrapped with a serial modification chain. Score path:
// time-domain mods -> feature extraction -> frequency-domain mods -> embedder.
struct SimulatedSRS {
  const SRSModel* base = nullptr;
  SerialMod mod;

  Var score(Tape& tape, Var x, Rng& rng, FeatureCache* cache,
            std::vector<FrozenDraw>* draws_out) const;
  Var score_frozen(Tape& tape, Var x, const std::vector<FrozenDraw>& draws,
                   FeatureCache* cache) const;
};

// Cartesian product zoo x mods; the bare zoo when mods is empty.
std::vector<SimulatedSRS> build_simulated_zoo(
    const std::vector<const SRSModel*>& srs_zoo,
    const std::vector<SerialMod>& mods);

// --- room impulse responses ---

struct RoomRanges {
  double dim_lo_m = 3.0, dim_hi_m = 8.0;
  double rt60_lo_s = 0.2, rt60_hi_s = 0.8;
};

// Shoebox image-source RIRs (direct path, first-order reflections, and a
// geometric-decay tail), truncated to 4000 taps, direct tap at index 0.
std::vector<Tensor> gen_rirs(int n, const RoomRanges& ranges, uint64_t seed);

// Raw little-endian float64 file: [count, taps, data...].
void save_rirs(const std::string& path, const std::vector<Tensor>& rirs);
std::vector<Tensor> load_rirs(const std::string& path);

// Linear-phase FIR band-stop used by FD (101 taps, Hamming-windowed sinc).
// The stop band is centered on `notch_hz`; 600 Hz is the narrowest width at
// which 101 taps reach a 20 dB notch across the whole band.
Tensor design_band_stop(double notch_hz, int taps = 101,
                        double stop_band_hz = 600.0);

// Magnitude response of an FIR filter at one frequency.
double fir_response_at(const Tensor& fir, double freq_hz);

}  // namespace qfta
