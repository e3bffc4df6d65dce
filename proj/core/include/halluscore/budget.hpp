#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "halluscore/aggregation.hpp"
#include "halluscore/evaluation.hpp"
#include "halluscore/types.hpp"

namespace halluscore {

struct ScorerCost {
  int llm_calls = 0;
  int nli_calls = 0;
};

// Per-method default cost: logit/verbalized/likelihood judges are one LLM
// call, the plain NLI check is zero, K-sample consistency methods cost their
// K generations, and the rail method adds one judge call on top of its K.
ScorerCost standard_cost(const ScorerKind& kind);

struct CostModel {
  enum class Sharing { Additive, SharedGenerations };

  Sharing sharing = Sharing::Additive;
  std::map<ScorerKind, ScorerCost> entries;

  static CostModel standard(const std::vector<ScorerKind>& kinds,
                            Sharing sharing);
  int llm_cost(const ScorerKind& kind) const;
};

// Additive: sum of member LLM costs. SharedGenerations: the sample pool is
// generated once at the largest K among multi-generation members; judge and
// single-generation costs still add up.
int subset_cost(const std::vector<ScorerKind>& subset, const CostModel& cm);

struct SubsetSelection {
  int budget = 0;
  std::vector<ScorerKind> selected;  // in feature-column order
  int cost = 0;
  double validation_loss = 0.0;
  LogisticModel model;
  std::size_t candidates_evaluated = 0;
};

// Deterministic 80/20 split of row indices used to evaluate candidate
// subsets; exposed so external checks can reproduce the exact partition.
void inner_split(std::size_t n_rows, std::uint64_t seed,
                 std::vector<std::size_t>& fit_idx,
                 std::vector<std::size_t>& val_idx);

// Exhaustively enumerates non-empty affordable subsets (N <= 20), refits a
// logistic model per subset on the inner fit part, and picks the subset with
// the lowest validation loss; ties break to lower cost, then lexicographic
// column order.
SubsetSelection select_cost_effective(const FeatureMatrix& X,
                                      const std::vector<int>& y,
                                      const CostModel& cm, int budget,
                                      LossKind loss,
                                      std::uint64_t inner_split_seed);

std::vector<SubsetSelection> budget_curve(const FeatureMatrix& X,
                                          const std::vector<int>& y,
                                          const CostModel& cm,
                                          const std::vector<int>& budgets,
                                          LossKind loss,
                                          std::uint64_t inner_split_seed);

}  // namespace halluscore
