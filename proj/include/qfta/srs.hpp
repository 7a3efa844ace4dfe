#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qfta/audio.hpp"
#include "qfta/features.hpp"
#include "qfta/tensor.hpp"

namespace qfta {

enum class ScoringKind { kCosine, kAffineInner };
enum class PoolingKind { kMean, kMeanStd };
enum class Task { kOSI, kCSI, kSV };

const char* scoring_kind_name(ScoringKind k);
ScoringKind scoring_kind_from_name(const std::string& name);
const char* pooling_kind_name(PoolingKind k);
PoolingKind pooling_kind_from_name(const std::string& name);

struct ModelSpec {
  FeatureKind feature_kind = FeatureKind::kFbank;
  int hidden_dim = 32;
  int embed_dim = 16;
  PoolingKind pooling = PoolingKind::kMean;
  ScoringKind scoring = ScoringKind::kCosine;
  uint64_t seed = 1;
};

struct TrainMeta {
  uint64_t seed = 0;
  int n_train_speakers = 0;
  double train_accuracy = 0.0;
};

// A mini speaker-recognition system: per-frame 2-layer MLP embedder with
// temporal pooling, cosine or affine-inner scoring, an enrolled-speaker
// table, and a decision threshold. Immutable after enroll + tune; safe to
// share read-only across parallel attack workers.
//
// The embedder standardizes each feature dimension with statistics of the
// training set (stored in the model; not per-utterance) and L2-normalizes
// its pooled output.
struct SRSModel {
  ModelSpec spec;
  FeatureConfig feature_cfg;
  Tensor input_shift;  // (F) per-dimension standardization, set at train
  Tensor input_scale;  // (F)
  Tensor w1, b1, w2, b2;     // embedder
  Tensor score_a;            // affine backend matrix A (pooled x pooled)
  double score_b = 0.0;      // affine backend offset
  std::vector<std::string> enrolled_ids;  // order defines speaker indices
  Tensor enrolled;           // (n x pooled_dim) enrollment embeddings
  double threshold = 0.0;
  TrainMeta train_meta;

  int pooled_dim() const {
    return spec.pooling == PoolingKind::kMeanStd ? 2 * spec.embed_dim
                                                 : spec.embed_dim;
  }
  int n_enrolled() const { return static_cast<int>(enrolled_ids.size()); }
  bool is_sv() const { return n_enrolled() == 1; }
};

struct Decision {
  int speaker_index = -1;  // -1 means imposter / reject
  bool accepted() const { return speaker_index >= 0; }
};

struct TrialSet {
  std::vector<double> genuine_scores;
  std::vector<double> imposter_scores;
};

struct EerResult {
  double threshold = 0.0;
  double eer = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

struct TrainOptions {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 30;
};

// Trains the embedder with a softmax classification head over the train
// speakers (cross-entropy, plain SGD, batch = one utterance); the head is
// discarded. Deterministic given spec.seed. Throws TrainingError on NaN loss.
SRSModel train_background(const SpeakerCorpus& corpus, const ModelSpec& spec,
                          const FeatureConfig& cfg = {},
                          const TrainOptions& opts = {});

// Embedding of one waveform (plain, off-tape).
Tensor embed(const SRSModel& model, const Waveform& w);

// Adds a speaker; the enrollment embedding is the mean of per-voice
// embeddings (per-voice L2-normalized first when scoring is cosine).
// Insertion order defines the speaker index. Throws on duplicate id.
void enroll(SRSModel& model, const std::string& speaker_id,
            const std::vector<const Waveform*>& voices);

// Score vector on-tape, differentiable w.r.t. the waveform Var. When `cache`
// is given, the power spectrogram of each distinct waveform Var is shared.
Var score_on_tape(Tape& tape, const SRSModel& model, Var wave,
                  FeatureCache* cache = nullptr);
// Score vector of the pooled embedding (used by simulated SRSs after
// feature-domain corrosion).
Var score_from_features(Tape& tape, const SRSModel& model, Var feats);

// Plain scoring.
std::vector<double> score(const SRSModel& model, const Waveform& w);

Decision decide(const SRSModel& model, const std::vector<double>& scores,
                Task task);
Decision decide_with_threshold(const std::vector<double>& scores, Task task,
                               double threshold);

// Threshold at the equal error rate: accept iff score >= theta; candidate
// thresholds are midpoints between adjacent sorted distinct scores plus
// +/-infinity; minimizes |FAR - FRR|, breaking ties by smaller FAR + FRR,
// then smaller theta.
EerResult tune_threshold_eer(const TrialSet& trials);

// Model file: magic "QSRS1", self-describing header, little-endian float64
// weight arrays in declared order.
void save_model(const SRSModel& model, const std::string& path);
SRSModel load_model(const std::string& path);

}  // namespace qfta
