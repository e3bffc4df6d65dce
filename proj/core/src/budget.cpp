#include "halluscore/budget.hpp"

#include <algorithm>
#include <numeric>

#include "halluscore/error.hpp"
#include "halluscore/rng.hpp"

namespace halluscore {

ScorerCost standard_cost(const ScorerKind& kind) {
  switch (kind.base) {
    case ScorerBase::PTrue:
    case ScorerBase::PTrueVerbalized:
    case ScorerBase::PInputContradict:
    case ScorerBase::PSelfContradict:
    case ScorerBase::PFactContradict:
    case ScorerBase::InversePerplexity:
      return {1, 0};
    case ScorerBase::NliDirect:
      return {0, 1};
    case ScorerBase::SelfCheckNli:
      return {kind.k, kind.k};
    case ScorerBase::SimilarityDegree:
      return {kind.k, kind.k};
    case ScorerBase::HallucinationRail:
      return {kind.k + 1, 0};
  }
  raise(ErrorCode::Internal, "unhandled scorer kind in cost table");
}

CostModel CostModel::standard(const std::vector<ScorerKind>& kinds,
                              Sharing sharing) {
  CostModel cm;
  cm.sharing = sharing;
  for (const auto& kind : kinds) cm.entries[kind] = standard_cost(kind);
  return cm;
}

int CostModel::llm_cost(const ScorerKind& kind) const {
  const auto it = entries.find(kind);
  if (it == entries.end()) {
    raise(ErrorCode::UnknownScorer,
          "scorer \"" + to_string(kind) + "\" missing from the cost model");
  }
  return it->second.llm_calls;
}

int subset_cost(const std::vector<ScorerKind>& subset, const CostModel& cm) {
  if (cm.sharing == CostModel::Sharing::Additive) {
    int total = 0;
    for (const auto& kind : subset) total += cm.llm_cost(kind);
    return total;
  }
  // SharedGenerations: one sample pool at the largest K; judges and
  // single-generation scorers keep their own calls.
  int max_k = 0;
  int extras = 0;
  for (const auto& kind : subset) {
    cm.llm_cost(kind);  // membership check
    if (kind.is_multi_generation()) {
      max_k = std::max(max_k, kind.k);
      if (kind.base == ScorerBase::HallucinationRail) extras += 1;
    } else {
      extras += cm.llm_cost(kind);
    }
  }
  return max_k + extras;
}

void inner_split(std::size_t n_rows, std::uint64_t seed,
                 std::vector<std::size_t>& fit_idx,
                 std::vector<std::size_t>& val_idx) {
  if (n_rows < 2) {
    raise(ErrorCode::TooSmall, "need at least 2 rows for an inner split");
  }
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  auto n_fit = static_cast<std::size_t>(std::llround(0.8 * double(n_rows)));
  n_fit = std::clamp<std::size_t>(n_fit, 1, n_rows - 1);
  fit_idx.assign(order.begin(), order.begin() + n_fit);
  val_idx.assign(order.begin() + n_fit, order.end());
  std::sort(fit_idx.begin(), fit_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
}

namespace {

struct InnerFolds {
  FeatureMatrix fit_X;
  FeatureMatrix val_X;
  std::vector<int> fit_y;
  std::vector<int> val_y;
};

InnerFolds make_inner_folds(const FeatureMatrix& X, const std::vector<int>& y,
                            std::uint64_t seed) {
  std::vector<std::size_t> fit_idx, val_idx;
  inner_split(X.rows(), seed, fit_idx, val_idx);
  auto take = [&](const std::vector<std::size_t>& idx, FeatureMatrix& out_X,
                  std::vector<int>& out_y) {
    out_X.columns = X.columns;
    for (const auto i : idx) {
      out_X.row_ids.push_back(X.row_ids[i]);
      out_y.push_back(y[i]);
      for (std::size_t c = 0; c < X.cols(); ++c) {
        out_X.values.push_back(X.at(i, c));
        out_X.imputed.push_back(X.imputed[i * X.cols() + c]);
      }
    }
  };
  InnerFolds folds;
  take(fit_idx, folds.fit_X, folds.fit_y);
  take(val_idx, folds.val_X, folds.val_y);
  return folds;
}

double selection_loss(const LogisticModel& model, const InnerFolds& folds,
                      const FeatureMatrix& fit_X, const FeatureMatrix& val_X,
                      LossKind loss) {
  const std::vector<double> val_preds = predict_multiscore(model, val_X);
  switch (loss) {
    case LossKind::Brier:
      return brier(val_preds, folds.val_y);
    case LossKind::NegF1AtMedian:
    case LossKind::NegAccuracy: {
      const std::vector<double> fit_preds = predict_multiscore(model, fit_X);
      const double threshold = threshold_at_percentile(fit_preds, 50.0);
      std::vector<int> decisions;
      decisions.reserve(val_preds.size());
      for (double p : val_preds) decisions.push_back(p >= threshold ? 1 : 0);
      const F1Accuracy fa = f1_accuracy(decisions, folds.val_y);
      return loss == LossKind::NegF1AtMedian ? -fa.f1 : -fa.accuracy;
    }
  }
  raise(ErrorCode::Internal, "unhandled loss kind");
}

}  // namespace

SubsetSelection select_cost_effective(const FeatureMatrix& X,
                                      const std::vector<int>& y,
                                      const CostModel& cm, int budget,
                                      LossKind loss,
                                      std::uint64_t inner_split_seed) {
  const std::size_t n_cols = X.cols();
  if (n_cols == 0) raise(ErrorCode::NoScorers, "no feature columns");
  if (n_cols > 20) {
    raise(ErrorCode::TooManyScorers,
          "exhaustive selection supports at most 20 scorers, got " +
              std::to_string(n_cols));
  }
  if (y.size() != X.rows()) {
    raise(ErrorCode::LengthMismatch, "labels do not match feature rows");
  }

  const InnerFolds folds = make_inner_folds(X, y, inner_split_seed);

  SubsetSelection best;
  best.budget = budget;
  bool have_best = false;
  std::vector<std::size_t> best_cols;

  const std::uint32_t limit = 1u << n_cols;
  for (std::uint32_t mask = 1; mask < limit; ++mask) {
    std::vector<ScorerKind> subset;
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (mask & (1u << j)) {
        subset.push_back(X.columns[j]);
        cols.push_back(j);
      }
    }
    const int cost = subset_cost(subset, cm);
    if (cost > budget) continue;

    const FeatureMatrix fit_X = folds.fit_X.select_columns(subset);
    const FeatureMatrix val_X = folds.val_X.select_columns(subset);
    const LogisticModel model =
        fit_logistic_regression(fit_X, folds.fit_y, 1e-3, inner_split_seed);
    const double value = selection_loss(model, folds, fit_X, val_X, loss);

    ++best.candidates_evaluated;
    const bool better =
        !have_best || value < best.validation_loss ||
        (value == best.validation_loss &&
         (cost < best.cost || (cost == best.cost && cols < best_cols)));
    if (better) {
      have_best = true;
      best.selected = subset;
      best.cost = cost;
      best.validation_loss = value;
      best.model = model;
      best_cols = cols;
    }
  }

  if (!have_best) {
    raise(ErrorCode::NoAffordableSubset,
          "no scorer subset fits budget " + std::to_string(budget));
  }
  return best;
}

std::vector<SubsetSelection> budget_curve(const FeatureMatrix& X,
                                          const std::vector<int>& y,
                                          const CostModel& cm,
                                          const std::vector<int>& budgets,
                                          LossKind loss,
                                          std::uint64_t inner_split_seed) {
  std::vector<SubsetSelection> curve;
  curve.reserve(budgets.size());
  for (const int budget : budgets) {
    try {
      curve.push_back(
          select_cost_effective(X, y, cm, budget, loss, inner_split_seed));
    } catch (const Error& e) {
      throw Error(e.code(),
                  "budget " + std::to_string(budget) + ": " + e.what());
    }
  }
  return curve;
}

}  // namespace halluscore
