#pragma once

#include <string>
#include <vector>

#include "qfta/tensor.hpp"

namespace qfta {

// Attack scenarios: targeted open-set identification, untargeted open-set
// identification, targeted speaker verification.
enum class Scenario { kTargetedOSI, kUntargetedOSI, kTargetedSV };

const char* scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

enum class LossKind {
  // targeted OSI
  kCE,
  kMargin,
  kF1,
  kF2,
  // untargeted OSI (anchored forms plus the dynamic F3)
  kCEs,
  kF1s,
  kMs,
  kF2s,
  kF3,
  // SV
  kBCE,
  kF3B,
};

const char* loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);
bool loss_legal_for(LossKind k, Scenario s);
LossKind default_loss(Scenario s);  // F1 / F3 / F3B

enum class RankStrategy { kLocal, kSumGlobal, kVoteGlobal };

const char* rank_strategy_name(RankStrategy s);
RankStrategy rank_strategy_from_name(const std::string& name);

// --- losses on-tape -------------------------------------------------------

// CE = -log softmax(s)_t; Margin = max_{i != t} s_i - s_t; F1 = -s_t;
// F2 = max{theta, max_{i != t} s_i} - s_t.
Var loss_targeted_osi(Tape& tape, LossKind kind, Var scores, int target,
                      double theta);

// Anchored untargeted forms mirror the targeted ones with t := anchor.
// F3 = theta - s_anchor with the anchor recomputed every iteration by the
// caller (see select_anchor).
Var loss_untargeted_osi(Tape& tape, LossKind kind, Var scores, int anchor,
                        double theta);

// BCE = -log(sigmoid(s)); F3B = theta - s. `score` is the scalar SV score.
Var loss_sv(Tape& tape, LossKind kind, Var score, double theta);

// Dispatch on scenario; `anchor_or_target` is t for targeted OSI, the anchor
// speaker for untargeted OSI, and ignored for SV.
Var attack_loss(Tape& tape, Scenario scenario, LossKind kind, Var scores,
                int anchor_or_target, double theta);

// --- speaker rankings (plain values) ---------------------------------------

// rank 1 = highest score; ties give the better rank to the lower index.
// Result[i] is the rank of speaker i, a permutation of 1..n.
std::vector<int> local_rank(const std::vector<double>& scores);

// Sum-Global: aggregate[i] = sum_k local_ranks[k][i]; top() = argmin with
// ties broken toward the lower speaker index.
std::vector<int> sum_global_rank(const std::vector<std::vector<int>>& locals);
int sum_global_top(const std::vector<std::vector<int>>& locals);

// Vote-Global: fill positions greedily; at position i pick the unassigned
// speaker with the most votes sum_k 1(rank_k(j) <= i), ties broken by
// smaller summed local rank, then lower index. Returns speakers in position
// order (position 1 first).
std::vector<int> vote_global_order(const std::vector<std::vector<int>>& locals);

// Anchor selection for the untargeted losses. Static kinds (CEs/F1s/Ms/F2s)
// use the seed scores; F3 uses the current scores. Local requires K == 1.
int select_anchor(RankStrategy strategy, LossKind kind,
                  const std::vector<std::vector<double>>& seed_scores,
                  const std::vector<std::vector<double>>& current_scores);

}  // namespace qfta
