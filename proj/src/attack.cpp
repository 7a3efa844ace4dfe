#include "qfta/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "qfta/errors.hpp"

namespace qfta {

AttackConfig default_config(Scenario scenario) {
  AttackConfig cfg;
  cfg.scenario = scenario;
  cfg.loss = default_loss(scenario);
  return cfg;
}

double EnsembleStats::update(int k, double f) {
  if (n_ < 1) throw ContractError("EnsembleStats: call next_iteration first");
  double& mu = mu_[static_cast<size_t>(k)];
  double& sigma = sigma_[static_cast<size_t>(k)];
  mu += (f - mu) / static_cast<double>(n_);
  const double dev = f - mu;
  sigma += (dev * dev - sigma) / static_cast<double>(n_);
  sigma = std::max(sigma, kSigmaFloor);
  return dev / std::sqrt(sigma);  // 0 / sqrt(floor) == 0 for constant streams
}

namespace {

void check_zoo(const std::vector<SimulatedSRS>& zoo) {
  if (zoo.empty()) throw ContractError("ensemble_attack: empty zoo");
  const auto& ids = zoo.front().base->enrolled_ids;
  for (const SimulatedSRS& sim : zoo) {
    if (sim.base->n_enrolled() == 0)
      throw ContractError("ensemble_attack: zoo member has no enrollment");
    if (sim.base->enrolled_ids != ids)
      throw ContractError(
          "ensemble_attack: zoo members have mismatched enrolled groups");
  }
}

// Distinct base models in first-appearance order.
std::vector<const SRSModel*> distinct_bases(
    const std::vector<SimulatedSRS>& zoo) {
  std::vector<const SRSModel*> out;
  for (const SimulatedSRS& sim : zoo)
    if (std::find(out.begin(), out.end(), sim.base) == out.end())
      out.push_back(sim.base);
  return out;
}

void clip_iterate(std::vector<double>& x, const std::vector<double>& x0,
                  double epsilon) {
  for (size_t i = 0; i < x.size(); ++i) {
    const double lo = std::max(-1.0, x0[i] - epsilon);
    const double hi = std::min(1.0, x0[i] + epsilon);
    x[i] = std::min(std::max(x[i], lo), hi);
  }
}

bool needs_anchor(Scenario s) { return s == Scenario::kUntargetedOSI; }

// Margin loss for the CW baseline: the quantity that must reach -kappa.
Var cw_margin_loss(Tape& tape, Scenario scenario, Var scores, int target,
                   double theta) {
  switch (scenario) {
    case Scenario::kTargetedOSI:
      return loss_targeted_osi(tape, LossKind::kMargin, scores, target, theta);
    case Scenario::kUntargetedOSI:
      return tape.add_scalar(tape.neg(tape.max_all(scores)), theta);
    case Scenario::kTargetedSV:
      return loss_sv(tape, LossKind::kF3B,
                     tape.value(scores).numel() == 1 ? scores
                                                     : tape.index(scores, 0),
                     theta);
  }
  throw Error("cw_margin_loss: bad scenario");
}

}  // namespace

AttackResult ensemble_attack_from(const Waveform& x0, const Waveform& start,
                                  const std::vector<SimulatedSRS>& zoo,
                                  const AttackConfig& cfg) {
  check_zoo(zoo);
  // alpha <= epsilon except in the degenerate epsilon = 0 case, where the
  // clip collapses every step anyway
  if (cfg.epsilon < 0 || cfg.alpha <= 0 ||
      (cfg.epsilon > 0 && cfg.alpha > cfg.epsilon))
    throw ContractError("ensemble_attack: need 0 < alpha <= epsilon");
  if (cfg.n_steps < 1 || cfg.sampling_size < 1)
    throw ContractError("ensemble_attack: need N >= 1 and beta >= 1");
  if (!loss_legal_for(cfg.loss, cfg.scenario) && !cfg.cw_kappa)
    throw ContractError(std::string("loss ") + loss_kind_name(cfg.loss) +
                        " is illegal for scenario " +
                        scenario_name(cfg.scenario));

  const int k_count = static_cast<int>(zoo.size());
  const int n_speakers = zoo.front().base->n_enrolled();
  if (cfg.scenario == Scenario::kTargetedOSI &&
      (cfg.target_speaker < 0 || cfg.target_speaker >= n_speakers))
    throw ContractError("ensemble_attack: target speaker out of range");
  if (cfg.scenario == Scenario::kTargetedSV && n_speakers != 1)
    throw ContractError("ensemble_attack: SV needs exactly one enrollment");

  // Static anchors for the anchored untargeted losses come from the seed
  // voice through the base models (no corrosion randomness).
  std::vector<std::vector<double>> seed_scores;
  if (needs_anchor(cfg.scenario))
    for (const SimulatedSRS& sim : zoo)
      seed_scores.push_back(score(*sim.base, x0));

  EnsembleStats stats(k_count);
  Rng rng(cfg.seed);
  std::vector<double> x = start.samples;
  clip_iterate(x, x0.samples, cfg.epsilon);

  AttackResult result;
  int iterations = 0;
  for (int n = 1; n <= cfg.n_steps; ++n) {
    stats.next_iteration();
    Tape tape;
    FeatureCache cache;
    Var xvar = tape.input(Tensor::vec(x));

    // forward all beta draws of every zoo member
    std::vector<std::vector<Var>> member_scores(
        static_cast<size_t>(k_count));
    for (int k = 0; k < k_count; ++k)
      for (int r = 0; r < cfg.sampling_size; ++r)
        member_scores[static_cast<size_t>(k)].push_back(
            zoo[static_cast<size_t>(k)].score(tape, xvar, rng, &cache,
                                              nullptr));

    // anchor selection before the beta-averaged losses are formed, using the
    // beta-averaged score vectors of the current iterate
    int anchor = cfg.target_speaker;
    if (needs_anchor(cfg.scenario)) {
      std::vector<std::vector<double>> avg(static_cast<size_t>(k_count));
      for (int k = 0; k < k_count; ++k) {
        std::vector<double> acc(static_cast<size_t>(n_speakers), 0.0);
        for (const Var& s : member_scores[static_cast<size_t>(k)]) {
          const Tensor& sv = tape.value(s);
          for (int i = 0; i < n_speakers; ++i)
            acc[static_cast<size_t>(i)] += sv.data[static_cast<size_t>(i)];
        }
        for (double& v : acc) v /= cfg.sampling_size;
        avg[static_cast<size_t>(k)] = std::move(acc);
      }
      anchor = select_anchor(cfg.rank_strategy, cfg.loss, seed_scores, avg);
    }

    TraceRow row;
    row.iteration = n;
    Var f_ens{};
    bool stop_early = false;
    for (int k = 0; k < k_count; ++k) {
      const double theta = zoo[static_cast<size_t>(k)].base->threshold;
      Var f_k{};
      double margin_value = 0.0;
      for (int r = 0; r < cfg.sampling_size; ++r) {
        Var s = member_scores[static_cast<size_t>(k)][static_cast<size_t>(r)];
        Var term;
        if (cfg.cw_kappa) {
          Var margin = cw_margin_loss(tape, cfg.scenario, s,
                                      cfg.target_speaker, theta);
          margin_value += tape.scalar_value(margin);
          term = tape.maximum(margin, -*cfg.cw_kappa);
        } else {
          term = attack_loss(tape, cfg.scenario, cfg.loss, s, anchor, theta);
        }
        f_k = r == 0 ? term : tape.add(f_k, term);
      }
      if (cfg.sampling_size > 1)
        f_k = tape.mul_scalar(f_k, 1.0 / cfg.sampling_size);
      const double f_value = tape.scalar_value(f_k);
      if (!std::isfinite(f_value))
        throw Error("ensemble_attack: loss of SRS " + std::to_string(k) +
                    " is not finite at iteration " + std::to_string(n));
      if (cfg.cw_kappa && margin_value / cfg.sampling_size <= -*cfg.cw_kappa)
        stop_early = true;

      const double normalized = stats.update(k, f_value);
      row.raw_loss.push_back(f_value);
      row.normalized_loss.push_back(normalized);
      // mu and sigma are detached constants; only f_k carries gradient
      Var term = cfg.weighting == WeightingMode::kDynamic
                     ? tape.mul_scalar(tape.add_scalar(f_k, -stats.mu(k)),
                                       stats.weight(k))
                     : tape.mul_scalar(f_k, 1.0 / k_count);
      f_ens = k == 0 ? term : tape.add(f_ens, term);
    }
    row.f_ens = tape.scalar_value(f_ens);
    if (cfg.record_trace) result.trace.push_back(std::move(row));

    if (stop_early) break;  // CW reached its confidence target at x_{n-1}

    tape.backward(f_ens);
    const Tensor g = tape.grad_of(xvar);
    for (size_t i = 0; i < x.size(); ++i) {
      const double gi = g.data[i];
      const double sign = gi > 0.0 ? 1.0 : (gi < 0.0 ? -1.0 : 0.0);
      x[i] -= cfg.alpha * sign;
    }
    clip_iterate(x, x0.samples, cfg.epsilon);
    iterations = n;
    if (cfg.on_iterate) {
      Waveform snapshot;
      snapshot.samples = x;
      cfg.on_iterate(n, snapshot);
    }
  }

  result.adversarial.samples = std::move(x);
  result.iterations_run = iterations;
  result.snr_db = result.adversarial.samples == x0.samples
                      ? std::numeric_limits<double>::infinity()
                      : snr_db(x0, result.adversarial);

  // Final raw loss and per-base score vectors at x_N (base models, no
  // corrosion randomness, so the value is deterministic).
  double final_loss = 0.0;
  const std::vector<const SRSModel*> bases = distinct_bases(zoo);
  std::vector<std::vector<double>> base_scores;
  for (const SRSModel* base : bases)
    base_scores.push_back(score(*base, result.adversarial));
  int final_anchor = cfg.target_speaker;
  if (needs_anchor(cfg.scenario)) {
    std::vector<std::vector<double>> seed_basis;
    for (const SRSModel* base : bases) seed_basis.push_back(score(*base, x0));
    final_anchor =
        select_anchor(cfg.rank_strategy, cfg.loss, seed_basis, base_scores);
  }
  for (size_t b = 0; b < bases.size(); ++b) {
    Tape tape;
    Var s = tape.constant(Tensor::vec(base_scores[b]));
    Var loss_var =
        cfg.cw_kappa
            ? tape.maximum(cw_margin_loss(tape, cfg.scenario, s,
                                          cfg.target_speaker,
                                          bases[b]->threshold),
                           -*cfg.cw_kappa)
            : attack_loss(tape, cfg.scenario, cfg.loss, s, final_anchor,
                          bases[b]->threshold);
    final_loss += tape.scalar_value(loss_var);
  }
  result.final_loss = final_loss;
  result.final_scores = std::move(base_scores);
  return result;
}

AttackResult ensemble_attack(const Waveform& x0,
                             const std::vector<SimulatedSRS>& zoo,
                             const AttackConfig& cfg) {
  return ensemble_attack_from(x0, x0, zoo, cfg);
}

AttackResult qfa2sr(const Waveform& x0,
                    const std::vector<const SRSModel*>& srs_zoo,
                    const std::vector<SerialMod>& mods,
                    const AttackConfig& cfg) {
  const std::vector<SimulatedSRS> zoo = build_simulated_zoo(srs_zoo, mods);
  return ensemble_attack(x0, zoo, cfg);
}

AttackResult bim(const Waveform& x0, const SRSModel& srs, AttackConfig cfg) {
  cfg.sampling_size = 1;
  return qfa2sr(x0, {&srs}, {}, cfg);
}

AttackResult pgd(const Waveform& x0, const SRSModel& srs, AttackConfig cfg,
                 int restarts, bool random_start) {
  if (restarts < 1) throw ContractError("pgd: restarts >= 1");
  cfg.sampling_size = 1;
  const std::vector<SimulatedSRS> zoo = build_simulated_zoo({&srs}, {});
  AttackResult best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    Waveform start = x0;
    if (random_start) {
      Rng rng(Rng::derive(cfg.seed, 0x70676400ULL + static_cast<uint64_t>(r)));
      for (double& v : start.samples) {
        v += rng.uniform(-cfg.epsilon, cfg.epsilon);
        v = std::min(1.0, std::max(-1.0, v));
      }
    }
    AttackResult res = ensemble_attack_from(x0, start, zoo, cfg);
    if (!have || res.final_loss < best.final_loss) {
      best = std::move(res);
      have = true;
    }
  }
  return best;
}

AttackResult cw_margin(const Waveform& x0, const SRSModel& srs,
                       AttackConfig cfg) {
  cfg.sampling_size = 1;
  cfg.cw_kappa = 5.0 * srs.threshold;
  const std::vector<SimulatedSRS> zoo = build_simulated_zoo({&srs}, {});
  return ensemble_attack(x0, zoo, cfg);
}

Waveform reverse_in_windows(const Waveform& x, int64_t window_samples) {
  if (window_samples < 1)
    throw ContractError("reverse_in_windows: window >= 1 sample");
  Waveform out = x;
  for (int64_t begin = 0; begin < x.size(); begin += window_samples) {
    const int64_t end = std::min(begin + window_samples, x.size());
    std::reverse(out.samples.begin() + begin, out.samples.begin() + end);
  }
  return out;
}

std::optional<Waveform> tdi_hidden_voice(const Waveform& x,
                                         const SRSModel& srs, Task task,
                                         int original_speaker) {
  for (double w_ms = 1.0; w_ms <= 10.0 + 1e-9; w_ms += 0.5) {
    const int64_t w = static_cast<int64_t>(
        std::llround(w_ms * kSampleRateHz / 1000.0));
    Waveform variant = reverse_in_windows(x, w);
    const Decision d = decide(srs, score(srs, variant), task);
    if (d.speaker_index == original_speaker) return variant;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Few-query candidate selection

SelectionRanking rank_candidates_from_scores(
    const std::vector<std::vector<double>>& target_scores) {
  if (target_scores.empty())
    throw ContractError("rank_candidates: no surrogate scores");
  const int m = static_cast<int>(target_scores.front().size());
  SelectionRanking ranking;
  ranking.aggregate.assign(static_cast<size_t>(m), 0);
  for (const std::vector<double>& scores : target_scores) {
    // rank 1 = highest target score; ties -> lower candidate index
    const std::vector<int> ranks = local_rank(scores);
    for (int i = 0; i < m; ++i)
      ranking.aggregate[static_cast<size_t>(i)] +=
          ranks[static_cast<size_t>(i)];
    ranking.per_surrogate.push_back(ranks);
  }
  ranking.order.resize(static_cast<size_t>(m));
  std::iota(ranking.order.begin(), ranking.order.end(), 0);
  std::sort(ranking.order.begin(), ranking.order.end(), [&](int a, int b) {
    const int la = ranking.aggregate[static_cast<size_t>(a)];
    const int lb = ranking.aggregate[static_cast<size_t>(b)];
    if (la != lb) return la < lb;
    return a < b;
  });
  return ranking;
}

SelectionRanking rank_candidates(
    const std::vector<const Waveform*>& candidates, int target_speaker,
    const std::vector<const SRSModel*>& srs_zoo) {
  const int m = static_cast<int>(candidates.size());
  std::vector<std::vector<double>> target_scores;
  for (const SRSModel* srs : srs_zoo) {
    std::vector<double> row(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i)
      row[static_cast<size_t>(i)] =
          score(*srs, *candidates[static_cast<size_t>(i)])
              [static_cast<size_t>(target_speaker)];
    target_scores.push_back(std::move(row));
  }
  return rank_candidates_from_scores(target_scores);
}

GeneralizedResult generalized_qfa2sr(
    int target_speaker, const std::vector<const Waveform*>& seeds,
    const std::vector<const SRSModel*>& srs_zoo,
    const std::vector<SerialMod>& mods, const AttackConfig& cfg) {
  if (cfg.scenario == Scenario::kUntargetedOSI)
    throw ContractError("generalized_qfa2sr: targeted scenarios only");
  GeneralizedResult out;
  for (size_t i = 0; i < seeds.size(); ++i) {
    AttackConfig per_seed = cfg;
    per_seed.target_speaker = target_speaker;
    per_seed.seed = Rng::derive(cfg.seed, 0xCA4D0ULL + i);
    out.candidates.push_back(qfa2sr(*seeds[i], srs_zoo, mods, per_seed));
  }
  std::vector<const Waveform*> waves;
  for (const AttackResult& r : out.candidates)
    waves.push_back(&r.adversarial);
  out.ranking = rank_candidates(waves, target_speaker, srs_zoo);
  return out;
}

void write_trace_csv(const std::string& path,
                     const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw FormatError("write_trace_csv: cannot open " + path);
  const size_t k = trace.empty() ? 0 : trace.front().raw_loss.size();
  out << "iteration";
  for (size_t i = 0; i < k; ++i) out << ",raw_loss_" << i;
  for (size_t i = 0; i < k; ++i) out << ",normalized_loss_" << i;
  out << ",f_ens\n";
  char buf[64];
  for (const TraceRow& row : trace) {
    out << row.iteration;
    for (double v : row.raw_loss) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    for (double v : row.normalized_loss) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g\n", row.f_ens);
    out << buf;
  }
}

}  // namespace qfta
