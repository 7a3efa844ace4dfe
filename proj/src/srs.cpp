#include "qfta/srs.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "qfta/errors.hpp"
#include "qfta/rng.hpp"

namespace qfta {

const char* scoring_kind_name(ScoringKind k) {
  return k == ScoringKind::kCosine ? "cosine" : "affine_inner";
}

ScoringKind scoring_kind_from_name(const std::string& name) {
  if (name == "cosine") return ScoringKind::kCosine;
  if (name == "affine_inner" || name == "affine")
    return ScoringKind::kAffineInner;
  throw ConfigError("unknown scoring kind \"" + name + "\"");
}

const char* pooling_kind_name(PoolingKind k) {
  return k == PoolingKind::kMean ? "mean" : "mean+std";
}

PoolingKind pooling_kind_from_name(const std::string& name) {
  if (name == "mean") return PoolingKind::kMean;
  if (name == "mean+std" || name == "meanstd") return PoolingKind::kMeanStd;
  throw ConfigError("unknown pooling kind \"" + name + "\"");
}

namespace {

Tensor random_matrix(Rng& rng, int64_t r, int64_t c, double scale) {
  Tensor t = Tensor::zeros({r, c});
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

// Pooled embedding from a feature matrix Var; shared by training and scoring.
Var embed_from_features(Tape& tape, const SRSModel& model, Var feats,
                        Var w1, Var b1, Var w2, Var b2) {
  Var z = tape.mul_rows(tape.sub_rows(feats, tape.constant(model.input_shift)),
                        tape.constant(model.input_scale));
  Var hidden = tape.relu(tape.add_rows(tape.matmul_nt(z, w1), b1));
  Var frame_emb = tape.add_rows(tape.matmul_nt(hidden, w2), b2);
  Var mean = tape.mean_axis0(frame_emb);
  Var pooled;
  if (model.spec.pooling == PoolingKind::kMean) {
    pooled = mean;
  } else {
    Var centered = tape.sub_rows(frame_emb, mean);
    Var variance = tape.mean_axis0(tape.mul(centered, centered));
    Var stddev = tape.sqrt(tape.add_scalar(variance, 1e-12));
    pooled = tape.concat(mean, stddev);
  }
  // final embedder stage: project onto the unit sphere (the affine backend
  // keeps its unconstrained score scale through A)
  Var inv_norm = tape.pow(
      tape.sqrt(tape.add_scalar(tape.dot(pooled, pooled), 1e-8)), -1.0);
  return tape.mul_scalar_var(pooled, inv_norm);
}

Var embed_from_features_const(Tape& tape, const SRSModel& model, Var feats) {
  return embed_from_features(tape, model, feats, tape.constant(model.w1),
                             tape.constant(model.b1), tape.constant(model.w2),
                             tape.constant(model.b2));
}

}  // namespace

// ---------------------------------------------------------------------------
// Training

SRSModel train_background(const SpeakerCorpus& corpus, const ModelSpec& spec,
                          const FeatureConfig& cfg, const TrainOptions& opts) {
  std::vector<std::pair<int, Tensor>> examples;  // (label, features)
  std::vector<std::string> train_ids;
  for (const Speaker& spk : corpus.speakers) {
    bool any = false;
    for (const Utterance& u : spk.utterances) {
      if (u.split != Split::kTrain) continue;
      any = true;
    }
    if (any) train_ids.push_back(spk.speaker_id);
  }
  if (train_ids.size() < 2)
    throw TrainingError("train_background: need >= 2 train speakers, got " +
                        std::to_string(train_ids.size()));

  SRSModel model;
  model.spec = spec;
  model.feature_cfg = cfg;
  model.train_meta.seed = spec.seed;
  model.train_meta.n_train_speakers = static_cast<int>(train_ids.size());

  for (size_t label = 0; label < train_ids.size(); ++label) {
    for (const Utterance& u :
         corpus.speaker(train_ids[label]).utterances) {
      if (u.split != Split::kTrain) continue;
      examples.emplace_back(
          static_cast<int>(label),
          extract_features(u.wave, spec.feature_kind, cfg));
    }
  }

  // Per-dimension feature standardization over the train set, stored with
  // the model.
  const int f_dim = feature_dim(spec.feature_kind, cfg);
  model.input_shift = Tensor::zeros({f_dim});
  model.input_scale = Tensor::zeros({f_dim});
  {
    std::vector<double> mean(static_cast<size_t>(f_dim), 0.0);
    std::vector<double> sq(static_cast<size_t>(f_dim), 0.0);
    int64_t rows = 0;
    for (const auto& [label, feats] : examples) {
      for (int64_t t = 0; t < feats.rows(); ++t)
        for (int j = 0; j < f_dim; ++j) {
          const double v = feats.at(t, j);
          mean[static_cast<size_t>(j)] += v;
          sq[static_cast<size_t>(j)] += v * v;
        }
      rows += feats.rows();
    }
    for (int j = 0; j < f_dim; ++j) {
      const double m = mean[static_cast<size_t>(j)] / static_cast<double>(rows);
      const double var =
          std::max(sq[static_cast<size_t>(j)] / static_cast<double>(rows) -
                       m * m,
                   1e-12);
      model.input_shift.data[static_cast<size_t>(j)] = m;
      model.input_scale.data[static_cast<size_t>(j)] = 1.0 / std::sqrt(var);
    }
  }
  const int h = spec.hidden_dim, e = spec.embed_dim;
  const int d = model.pooled_dim();
  const int n_classes = static_cast<int>(train_ids.size());

  Rng rng(Rng::derive(spec.seed, 0x7261696eULL));
  model.w1 = random_matrix(rng, h, f_dim, 1.0 / std::sqrt(f_dim));
  model.b1 = Tensor::zeros({h});
  model.w2 = random_matrix(rng, e, h, 1.0 / std::sqrt(h));
  model.b2 = Tensor::zeros({e});
  const bool affine = spec.scoring == ScoringKind::kAffineInner;
  if (affine) {
    model.score_a = Tensor::zeros({d, d});
    for (int i = 0; i < d; ++i)
      model.score_a.at(i, i) = 5.0 * (1.0 + 0.01 * rng.normal());
    model.score_b = 0.0;
  }
  Tensor w3 = random_matrix(rng, n_classes, d, 1.0 / std::sqrt(d));
  Tensor b3 = Tensor::zeros({n_classes});

  struct Slot {
    Tensor* param;
    Tensor velocity;
  };
  std::vector<Slot> slots;
  for (Tensor* p : {&model.w1, &model.b1, &model.w2, &model.b2, &w3, &b3})
    slots.push_back({p, Tensor::zeros(p->shape)});

  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  // Normalized (cosine) softmax head: logits = kappa * cos(w3_i, emb) + b3.
  // Bounded logits keep the pinned momentum-SGD recipe stable at every
  // feature kind and corpus size; the head is discarded after training.
  constexpr double kHeadKappa = 8.0;
  auto head_logits = [&](Tape& tape, Var emb, Var vw3, Var vb3) {
    Var unit = tape.mul_scalar_var(
        emb, tape.pow(tape.sqrt(tape.add_scalar(tape.dot(emb, emb), 1e-8)),
                      -1.0));
    Var raw = tape.matmul(vw3, unit);
    Var row_norm = tape.pow(
        tape.add_scalar(tape.sum_axis0(tape.transpose(tape.mul(vw3, vw3))),
                        1e-8),
        -0.5);
    return tape.add(tape.mul_scalar(tape.mul(raw, row_norm), kHeadKappa),
                    vb3);
  };

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    // Fisher-Yates with the model's own stream keeps runs reproducible.
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<size_t>(rng.uniform_int(0,
                     static_cast<int64_t>(i) - 1))]);
    for (size_t idx : order) {
      const auto& [label, feats] = examples[idx];
      Tape tape;
      Var vw1 = tape.input(model.w1), vb1 = tape.input(model.b1);
      Var vw2 = tape.input(model.w2), vb2 = tape.input(model.b2);
      Var vw3 = tape.input(w3), vb3 = tape.input(b3);
      Var emb = embed_from_features(tape, model, tape.constant(feats), vw1,
                                    vb1, vw2, vb2);
      Var logits = head_logits(tape, emb, vw3, vb3);
      Var loss = tape.sub(tape.logsumexp(logits), tape.index(logits, label));
      if (!std::isfinite(tape.scalar_value(loss)))
        throw TrainingError("train_background: loss diverged (NaN/Inf)");
      tape.backward(loss);

      const std::vector<Var> vars = {vw1, vb1, vw2, vb2, vw3, vb3};
      for (size_t s = 0; s < slots.size(); ++s) {
        const Tensor g = tape.grad_of(vars[s]);
        Tensor& vel = slots[s].velocity;
        Tensor& par = *slots[s].param;
        for (size_t i = 0; i < par.data.size(); ++i) {
          vel.data[i] = opts.momentum * vel.data[i] + g.data[i];
          par.data[i] -= opts.learning_rate * vel.data[i];
        }
      }
    }
  }

  // Final train-set accuracy with the (discarded) head, measured before the
  // scoring backend is fit.
  int correct = 0;
  for (const auto& [label, feats] : examples) {
    Tape tape;
    Var emb = embed_from_features_const(tape, model, tape.constant(feats));
    Var logits =
        head_logits(tape, emb, tape.constant(w3), tape.constant(b3));
    const Tensor& lv = tape.value(logits);
    int arg = 0;
    for (int i = 1; i < n_classes; ++i)
      if (lv.data[static_cast<size_t>(i)] > lv.data[static_cast<size_t>(arg)])
        arg = i;
    if (arg == label) ++correct;
  }
  model.train_meta.train_accuracy =
      static_cast<double>(correct) / static_cast<double>(examples.size());

  // Affine backend: with the embedder frozen, fit the diagonal of A and the
  // offset b on train-speaker verification pairs (logistic loss on
  // e_a^T A e_b + b), mirroring the two-stage embedding -> backend pipeline
  // of full-size systems. The diagonal keeps the pair-level fit from
  // overfitting at desk scale.
  if (affine) {
    std::vector<std::vector<Tensor>> by_speaker(train_ids.size());
    {
      size_t idx = 0;
      for (size_t label = 0; label < train_ids.size(); ++label)
        for (const Utterance& u : corpus.speaker(train_ids[label]).utterances)
          if (u.split == Split::kTrain) {
            Tape tape;
            by_speaker[label].push_back(tape.value(embed_from_features_const(
                tape, model, tape.constant(examples[idx].second))));
            ++idx;
          }
    }
    struct Pair {
      const Tensor* a;
      const Tensor* b;
      double label;
    };
    std::vector<Pair> pairs;
    for (size_t s = 0; s < by_speaker.size(); ++s)
      for (size_t i = 0; i < by_speaker[s].size(); ++i)
        for (size_t j = i + 1; j < by_speaker[s].size(); ++j)
          pairs.push_back({&by_speaker[s][i], &by_speaker[s][j], 1.0});
    const size_t n_positive = pairs.size();
    for (size_t k = 0; k < n_positive; ++k) {
      const size_t s1 = static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(by_speaker.size()) - 1));
      size_t s2 = static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(by_speaker.size()) - 2));
      if (s2 >= s1) ++s2;
      const auto& va = by_speaker[s1];
      const auto& vb = by_speaker[s2];
      pairs.push_back(
          {&va[static_cast<size_t>(rng.uniform_int(
               0, static_cast<int64_t>(va.size()) - 1))],
           &vb[static_cast<size_t>(rng.uniform_int(
               0, static_cast<int64_t>(vb.size()) - 1))],
           0.0});
    }
    std::vector<double> vel_diag(static_cast<size_t>(d), 0.0);
    double vel_b = 0.0;
    const double backend_lr = 0.1;
    for (int epoch = 0; epoch < 100; ++epoch) {
      for (const Pair& p : pairs) {
        double s = model.score_b;
        for (int i = 0; i < d; ++i)
          s += model.score_a.at(i, i) * p.a->data[static_cast<size_t>(i)] *
               p.b->data[static_cast<size_t>(i)];
        const double sig =
            s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) /
                                                      (1.0 + std::exp(s));
        const double err = sig - p.label;
        for (int i = 0; i < d; ++i) {
          const double g = err * p.a->data[static_cast<size_t>(i)] *
                           p.b->data[static_cast<size_t>(i)];
          double& v = vel_diag[static_cast<size_t>(i)];
          v = opts.momentum * v + g;
          model.score_a.at(i, i) -= backend_lr * v;
        }
        vel_b = opts.momentum * vel_b + err;
        model.score_b -= backend_lr * vel_b;
      }
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Embedding / enrollment / scoring

Tensor embed(const SRSModel& model, const Waveform& w) {
  Tape tape;
  Var feats = tape.constant(
      extract_features(w, model.spec.feature_kind, model.feature_cfg));
  Var emb = embed_from_features_const(tape, model, feats);
  return tape.value(emb);
}

void enroll(SRSModel& model, const std::string& speaker_id,
            const std::vector<const Waveform*>& voices) {
  if (voices.empty()) throw Error("enroll: no voices for " + speaker_id);
  for (const std::string& id : model.enrolled_ids)
    if (id == speaker_id)
      throw Error("enroll: duplicate speaker_id " + speaker_id);

  const int d = model.pooled_dim();
  Tensor acc = Tensor::zeros({d});
  for (const Waveform* v : voices) {
    Tensor e = embed(model, *v);
    if (model.spec.scoring == ScoringKind::kCosine) {
      double nrm = 0.0;
      for (double x : e.data) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (nrm > 0.0)
        for (double& x : e.data) x /= nrm;
    }
    for (int i = 0; i < d; ++i) acc.data[i] += e.data[i];
  }
  for (double& x : acc.data) x /= static_cast<double>(voices.size());

  Tensor table = Tensor::zeros({model.n_enrolled() + 1, d});
  if (model.n_enrolled() > 0)
    std::copy(model.enrolled.data.begin(), model.enrolled.data.end(),
              table.data.begin());
  std::copy(acc.data.begin(), acc.data.end(),
            table.data.begin() + model.n_enrolled() * d);
  model.enrolled = std::move(table);
  model.enrolled_ids.push_back(speaker_id);
}

Var score_from_features(Tape& tape, const SRSModel& model, Var feats) {
  if (model.n_enrolled() == 0)
    throw ContractError("score: model has no enrolled speakers");
  Var emb = embed_from_features_const(tape, model, feats);
  const int n = model.n_enrolled();
  const int d = model.pooled_dim();
  if (model.spec.scoring == ScoringKind::kCosine) {
    Tensor rows = model.enrolled;
    for (int i = 0; i < n; ++i) {
      double nrm = 0.0;
      for (int j = 0; j < d; ++j) nrm += rows.at(i, j) * rows.at(i, j);
      nrm = std::sqrt(nrm);
      if (nrm > 0.0)
        for (int j = 0; j < d; ++j) rows.at(i, j) /= nrm;
    }
    Var unit = tape.mul_scalar_var(emb, tape.pow(tape.l2_norm(emb), -1.0));
    return tape.matmul(tape.constant(std::move(rows)), unit);
  }
  Var projected = tape.matmul(tape.constant(model.score_a), emb);
  Var raw = tape.matmul(tape.constant(model.enrolled), projected);
  return tape.add_scalar(raw, model.score_b);
}

Var score_on_tape(Tape& tape, const SRSModel& model, Var wave,
                  FeatureCache* cache) {
  Var power = cache ? cache->power(tape, wave, model.feature_cfg)
                    : spectrogram_on_tape(tape, wave, model.feature_cfg);
  Var feats = features_from_power(tape, power, model.spec.feature_kind,
                                  model.feature_cfg);
  return score_from_features(tape, model, feats);
}

std::vector<double> score(const SRSModel& model, const Waveform& w) {
  Tape tape;
  Var x = tape.constant(Tensor::vec(w.samples));
  Var s = score_on_tape(tape, model, x);
  return tape.value(s).data;
}

Decision decide_with_threshold(const std::vector<double>& scores, Task task,
                               double threshold) {
  if (scores.empty()) throw ContractError("decide: empty score vector");
  int arg = 0;
  for (size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[arg]) arg = static_cast<int>(i);
  switch (task) {
    case Task::kCSI:
      return Decision{arg};
    case Task::kSV:
      if (scores.size() != 1)
        throw ContractError("decide: SV requires exactly one enrolled speaker");
      return scores[0] >= threshold ? Decision{0} : Decision{-1};
    case Task::kOSI:
      return scores[arg] >= threshold ? Decision{arg} : Decision{-1};
  }
  throw Error("decide: bad task");
}

Decision decide(const SRSModel& model, const std::vector<double>& scores,
                Task task) {
  if (static_cast<int>(scores.size()) != model.n_enrolled())
    throw ContractError("decide: score vector length " +
                        std::to_string(scores.size()) +
                        " != enrolled count " +
                        std::to_string(model.n_enrolled()));
  return decide_with_threshold(scores, task, model.threshold);
}

// ---------------------------------------------------------------------------
// EER threshold tuning

EerResult tune_threshold_eer(const TrialSet& trials) {
  if (trials.genuine_scores.empty() || trials.imposter_scores.empty())
    throw ContractError("tune_threshold_eer: empty trial set");

  std::vector<double> all = trials.genuine_scores;
  all.insert(all.end(), trials.imposter_scores.begin(),
             trials.imposter_scores.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> candidates;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (size_t i = 0; i + 1 < all.size(); ++i)
    candidates.push_back(0.5 * (all[i] + all[i + 1]));
  candidates.push_back(std::numeric_limits<double>::infinity());

  auto rates = [&](double theta) {
    int fa = 0, fr = 0;
    for (double s : trials.imposter_scores)
      if (s >= theta) ++fa;
    for (double s : trials.genuine_scores)
      if (s < theta) ++fr;
    const double far =
        static_cast<double>(fa) / trials.imposter_scores.size();
    const double frr = static_cast<double>(fr) / trials.genuine_scores.size();
    return std::make_pair(far, frr);
  };

  EerResult best;
  bool have = false;
  for (double theta : candidates) {
    const auto [far, frr] = rates(theta);
    const double gap = std::abs(far - frr);
    const double total = far + frr;
    const double best_gap = std::abs(best.far - best.frr);
    const double best_total = best.far + best.frr;
    if (!have || gap < best_gap ||
        (gap == best_gap && (total < best_total ||
                             (total == best_total && theta < best.threshold)))) {
      best = {theta, 0.5 * (far + frr), far, frr};
      have = true;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[5] = {'Q', 'S', 'R', 'S', '1'};

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void put_u64(std::ostream& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v & 0xffffffffULL));
  put_u32(out, static_cast<uint32_t>(v >> 32));
}

uint64_t get_u64(std::istream& in) {
  const uint64_t lo = get_u32(in);
  const uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

void put_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

double get_f64(std::istream& in) {
  const uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_tensor(std::ostream& out, const Tensor& t) {
  put_u32(out, static_cast<uint32_t>(t.rank()));
  for (int64_t d : t.shape) put_u32(out, static_cast<uint32_t>(d));
  for (double v : t.data) put_f64(out, v);
}

Tensor get_tensor(std::istream& in) {
  const uint32_t rank = get_u32(in);
  std::vector<int64_t> shape(rank);
  for (uint32_t i = 0; i < rank; ++i) shape[i] = get_u32(in);
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.data) v = get_f64(in);
  return t;
}

}  // namespace

void save_model(const SRSModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("save_model: cannot open " + path);
  out.write(kMagic, 5);
  put_u32(out, 1);  // version
  put_u32(out, static_cast<uint32_t>(model.spec.feature_kind));
  put_u32(out, static_cast<uint32_t>(model.spec.scoring));
  put_u32(out, static_cast<uint32_t>(model.spec.pooling));
  put_u32(out, static_cast<uint32_t>(model.spec.hidden_dim));
  put_u32(out, static_cast<uint32_t>(model.spec.embed_dim));
  put_u64(out, model.spec.seed);
  put_f64(out, model.feature_cfg.frame_len_ms);
  put_f64(out, model.feature_cfg.hop_ms);
  put_u32(out, static_cast<uint32_t>(model.feature_cfg.dft_size));
  put_u32(out, static_cast<uint32_t>(model.feature_cfg.n_mels));
  put_u32(out, static_cast<uint32_t>(model.feature_cfg.n_mfcc));
  put_f64(out, model.feature_cfg.log_floor);
  put_tensor(out, model.input_shift);
  put_tensor(out, model.input_scale);
  put_f64(out, model.threshold);
  put_u64(out, model.train_meta.seed);
  put_u32(out, static_cast<uint32_t>(model.train_meta.n_train_speakers));
  put_f64(out, model.train_meta.train_accuracy);
  put_u32(out, static_cast<uint32_t>(model.enrolled_ids.size()));
  for (const std::string& id : model.enrolled_ids) {
    put_u32(out, static_cast<uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  put_tensor(out, model.w1);
  put_tensor(out, model.b1);
  put_tensor(out, model.w2);
  put_tensor(out, model.b2);
  if (model.spec.scoring == ScoringKind::kAffineInner) {
    put_tensor(out, model.score_a);
    put_f64(out, model.score_b);
  }
  if (!model.enrolled_ids.empty()) put_tensor(out, model.enrolled);
  if (!out) throw FormatError("save_model: write failed for " + path);
}

SRSModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_model: cannot open " + path);
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kMagic, 5) != 0)
    throw FormatError("load_model: bad magic in " + path +
                      ", expected QSRS1");
  const uint32_t version = get_u32(in);
  if (version != 1)
    throw FormatError("load_model: unsupported version " +
                      std::to_string(version));
  SRSModel model;
  model.spec.feature_kind = static_cast<FeatureKind>(get_u32(in));
  model.spec.scoring = static_cast<ScoringKind>(get_u32(in));
  model.spec.pooling = static_cast<PoolingKind>(get_u32(in));
  model.spec.hidden_dim = static_cast<int>(get_u32(in));
  model.spec.embed_dim = static_cast<int>(get_u32(in));
  model.spec.seed = get_u64(in);
  model.feature_cfg.frame_len_ms = get_f64(in);
  model.feature_cfg.hop_ms = get_f64(in);
  model.feature_cfg.dft_size = static_cast<int>(get_u32(in));
  model.feature_cfg.n_mels = static_cast<int>(get_u32(in));
  model.feature_cfg.n_mfcc = static_cast<int>(get_u32(in));
  model.feature_cfg.log_floor = get_f64(in);
  model.input_shift = get_tensor(in);
  model.input_scale = get_tensor(in);
  model.threshold = get_f64(in);
  model.train_meta.seed = get_u64(in);
  model.train_meta.n_train_speakers = static_cast<int>(get_u32(in));
  model.train_meta.train_accuracy = get_f64(in);
  const uint32_t n_enrolled = get_u32(in);
  for (uint32_t i = 0; i < n_enrolled; ++i) {
    const uint32_t len = get_u32(in);
    std::string id(len, '\0');
    in.read(id.data(), len);
    model.enrolled_ids.push_back(std::move(id));
  }
  model.w1 = get_tensor(in);
  model.b1 = get_tensor(in);
  model.w2 = get_tensor(in);
  model.b2 = get_tensor(in);
  if (model.spec.scoring == ScoringKind::kAffineInner) {
    model.score_a = get_tensor(in);
    model.score_b = get_f64(in);
  }
  if (n_enrolled > 0) model.enrolled = get_tensor(in);
  if (!in) throw FormatError("load_model: truncated file " + path);
  return model;
}

}  // namespace qfta
