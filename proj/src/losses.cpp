#include "qfta/losses.hpp"

#include <algorithm>
#include <numeric>

#include "qfta/errors.hpp"

namespace qfta {

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kTargetedOSI: return "targeted-osi";
    case Scenario::kUntargetedOSI: return "untargeted-osi";
    case Scenario::kTargetedSV: return "targeted-sv";
  }
  return "?";
}

Scenario scenario_from_name(const std::string& name) {
  if (name == "targeted-osi") return Scenario::kTargetedOSI;
  if (name == "untargeted-osi") return Scenario::kUntargetedOSI;
  if (name == "targeted-sv") return Scenario::kTargetedSV;
  throw ConfigError("unknown scenario \"" + name + "\"");
}

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::kCE: return "ce";
    case LossKind::kMargin: return "margin";
    case LossKind::kF1: return "f1";
    case LossKind::kF2: return "f2";
    case LossKind::kCEs: return "ce-s";
    case LossKind::kF1s: return "f1-s";
    case LossKind::kMs: return "margin-s";
    case LossKind::kF2s: return "f2-s";
    case LossKind::kF3: return "f3";
    case LossKind::kBCE: return "bce";
    case LossKind::kF3B: return "f3b";
  }
  return "?";
}

LossKind loss_kind_from_name(const std::string& name) {
  for (LossKind k :
       {LossKind::kCE, LossKind::kMargin, LossKind::kF1, LossKind::kF2,
        LossKind::kCEs, LossKind::kF1s, LossKind::kMs, LossKind::kF2s,
        LossKind::kF3, LossKind::kBCE, LossKind::kF3B})
    if (name == loss_kind_name(k)) return k;
  throw ConfigError("unknown loss \"" + name + "\"");
}

bool loss_legal_for(LossKind k, Scenario s) {
  switch (s) {
    case Scenario::kTargetedOSI:
      return k == LossKind::kCE || k == LossKind::kMargin ||
             k == LossKind::kF1 || k == LossKind::kF2;
    case Scenario::kUntargetedOSI:
      return k == LossKind::kCEs || k == LossKind::kF1s ||
             k == LossKind::kMs || k == LossKind::kF2s || k == LossKind::kF3;
    case Scenario::kTargetedSV:
      return k == LossKind::kBCE || k == LossKind::kF3B;
  }
  return false;
}

LossKind default_loss(Scenario s) {
  switch (s) {
    case Scenario::kTargetedOSI: return LossKind::kF1;
    case Scenario::kUntargetedOSI: return LossKind::kF3;
    case Scenario::kTargetedSV: return LossKind::kF3B;
  }
  throw Error("default_loss: bad scenario");
}

const char* rank_strategy_name(RankStrategy s) {
  switch (s) {
    case RankStrategy::kLocal: return "local";
    case RankStrategy::kSumGlobal: return "sum-global";
    case RankStrategy::kVoteGlobal: return "vote-global";
  }
  return "?";
}

RankStrategy rank_strategy_from_name(const std::string& name) {
  if (name == "local") return RankStrategy::kLocal;
  if (name == "sum-global") return RankStrategy::kSumGlobal;
  if (name == "vote-global") return RankStrategy::kVoteGlobal;
  throw ConfigError("unknown rank strategy \"" + name + "\"");
}

// ---------------------------------------------------------------------------
// Losses

namespace {

// max over enrolled speakers excluding `skip` (requires n >= 2).
Var max_excluding(Tape& tape, Var scores, int skip) {
  const int64_t n = tape.value(scores).numel();
  std::vector<int64_t> idx;
  idx.reserve(static_cast<size_t>(n) - 1);
  for (int64_t i = 0; i < n; ++i)
    if (i != skip) idx.push_back(i);
  return tape.max_all(tape.gather(scores, std::move(idx)));
}

void check_target(Tape& tape, Var scores, int target, int64_t min_size) {
  const int64_t n = tape.value(scores).numel();
  if (target < 0 || target >= n)
    throw ContractError("loss: target speaker " + std::to_string(target) +
                        " out of range for " + std::to_string(n) +
                        " enrolled");
  if (n < min_size)
    throw ContractError("loss: needs at least " + std::to_string(min_size) +
                        " enrolled speakers, got " + std::to_string(n));
}

}  // namespace

Var loss_targeted_osi(Tape& tape, LossKind kind, Var scores, int target,
                      double theta) {
  switch (kind) {
    case LossKind::kCE:
      check_target(tape, scores, target, 2);
      return tape.sub(tape.logsumexp(scores), tape.index(scores, target));
    case LossKind::kMargin:
      check_target(tape, scores, target, 2);
      return tape.sub(max_excluding(tape, scores, target),
                      tape.index(scores, target));
    case LossKind::kF1:
      check_target(tape, scores, target, 1);
      return tape.neg(tape.index(scores, target));
    case LossKind::kF2:
      check_target(tape, scores, target, 2);
      return tape.sub(tape.maximum(max_excluding(tape, scores, target), theta),
                      tape.index(scores, target));
    default:
      throw ContractError(std::string("loss ") + loss_kind_name(kind) +
                          " is not a targeted-OSI loss");
  }
}

Var loss_untargeted_osi(Tape& tape, LossKind kind, Var scores, int anchor,
                        double theta) {
  switch (kind) {
    case LossKind::kCEs:
      return loss_targeted_osi(tape, LossKind::kCE, scores, anchor, theta);
    case LossKind::kF1s:
      return loss_targeted_osi(tape, LossKind::kF1, scores, anchor, theta);
    case LossKind::kMs:
      return loss_targeted_osi(tape, LossKind::kMargin, scores, anchor, theta);
    case LossKind::kF2s:
      return loss_targeted_osi(tape, LossKind::kF2, scores, anchor, theta);
    case LossKind::kF3:
      check_target(tape, scores, anchor, 1);
      return tape.add_scalar(tape.neg(tape.index(scores, anchor)), theta);
    default:
      throw ContractError(std::string("loss ") + loss_kind_name(kind) +
                          " is not an untargeted-OSI loss");
  }
}

Var loss_sv(Tape& tape, LossKind kind, Var score, double theta) {
  if (tape.value(score).numel() != 1)
    throw ContractError("loss_sv: expected a scalar SV score");
  switch (kind) {
    case LossKind::kBCE:
      return tape.neg(tape.log(tape.sigmoid(score)));
    case LossKind::kF3B:
      return tape.add_scalar(tape.neg(score), theta);
    default:
      throw ContractError(std::string("loss ") + loss_kind_name(kind) +
                          " is not an SV loss");
  }
}

Var attack_loss(Tape& tape, Scenario scenario, LossKind kind, Var scores,
                int anchor_or_target, double theta) {
  switch (scenario) {
    case Scenario::kTargetedOSI:
      return loss_targeted_osi(tape, kind, scores, anchor_or_target, theta);
    case Scenario::kUntargetedOSI:
      return loss_untargeted_osi(tape, kind, scores, anchor_or_target, theta);
    case Scenario::kTargetedSV: {
      Var s = tape.value(scores).numel() == 1 ? scores
                                              : tape.index(scores, 0);
      return loss_sv(tape, kind, s, theta);
    }
  }
  throw Error("attack_loss: bad scenario");
}

// ---------------------------------------------------------------------------
// Rankings

std::vector<int> local_rank(const std::vector<double>& scores) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
      return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
    return a < b;  // ties: lower index gets the better rank
  });
  std::vector<int> rank(static_cast<size_t>(n));
  for (int pos = 0; pos < n; ++pos)
    rank[static_cast<size_t>(order[static_cast<size_t>(pos)])] = pos + 1;
  return rank;
}

namespace {

void check_rank_profiles(const std::vector<std::vector<int>>& locals) {
  if (locals.empty())
    throw ContractError("global ranking: no local ranks given");
  for (const auto& r : locals)
    if (r.size() != locals.front().size())
      throw ContractError("global ranking: speaker sets differ in size");
}

}  // namespace

std::vector<int> sum_global_rank(const std::vector<std::vector<int>>& locals) {
  check_rank_profiles(locals);
  std::vector<int> sums(locals.front().size(), 0);
  for (const auto& r : locals)
    for (size_t i = 0; i < r.size(); ++i) sums[i] += r[i];
  return sums;
}

int sum_global_top(const std::vector<std::vector<int>>& locals) {
  const std::vector<int> sums = sum_global_rank(locals);
  int best = 0;
  for (size_t i = 1; i < sums.size(); ++i)
    if (sums[i] < sums[static_cast<size_t>(best)])
      best = static_cast<int>(i);
  return best;
}

std::vector<int> vote_global_order(
    const std::vector<std::vector<int>>& locals) {
  check_rank_profiles(locals);
  const int n = static_cast<int>(locals.front().size());
  const std::vector<int> sums = sum_global_rank(locals);
  std::vector<bool> assigned(static_cast<size_t>(n), false);
  std::vector<int> order;
  order.reserve(static_cast<size_t>(n));
  for (int pos = 1; pos <= n; ++pos) {
    int best = -1, best_votes = -1;
    for (int j = 0; j < n; ++j) {
      if (assigned[static_cast<size_t>(j)]) continue;
      int votes = 0;
      for (const auto& r : locals)
        if (r[static_cast<size_t>(j)] <= pos) ++votes;
      const bool better =
          votes > best_votes ||
          (votes == best_votes &&
           (sums[static_cast<size_t>(j)] < sums[static_cast<size_t>(best)] ||
            (sums[static_cast<size_t>(j)] == sums[static_cast<size_t>(best)] &&
             j < best)));
      if (better) {
        best = j;
        best_votes = votes;
      }
    }
    assigned[static_cast<size_t>(best)] = true;
    order.push_back(best);
  }
  return order;
}

int select_anchor(RankStrategy strategy, LossKind kind,
                  const std::vector<std::vector<double>>& seed_scores,
                  const std::vector<std::vector<double>>& current_scores) {
  const auto& basis = kind == LossKind::kF3 ? current_scores : seed_scores;
  if (basis.empty()) throw ContractError("select_anchor: no score vectors");
  if (strategy == RankStrategy::kLocal) {
    if (basis.size() != 1)
      throw ContractError("select_anchor: Local ranking requires a single "
                          "surrogate, got " +
                          std::to_string(basis.size()));
    const std::vector<double>& s = basis.front();
    int arg = 0;
    for (size_t i = 1; i < s.size(); ++i)
      if (s[i] > s[static_cast<size_t>(arg)]) arg = static_cast<int>(i);
    return arg;
  }
  std::vector<std::vector<int>> locals;
  locals.reserve(basis.size());
  for (const auto& s : basis) locals.push_back(local_rank(s));
  if (strategy == RankStrategy::kSumGlobal) return sum_global_top(locals);
  return vote_global_order(locals).front();
}

}  // namespace qfta
