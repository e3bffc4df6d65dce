#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "halluscore/types.hpp"

namespace halluscore {

// ln(s/(1-s)) after clamping s into [epsilon, 1-epsilon].
double logit_transform(double s, double epsilon = 1e-6);

double sigmoid(double t);

// Logit-transformed score features, row per example. Missing scores are
// imputed at logit 0 (probability one half) and flagged in the mask.
struct FeatureMatrix {
  std::vector<std::string> row_ids;
  std::vector<ScorerKind> columns;
  std::vector<double> values;           // row-major
  std::vector<std::uint8_t> imputed;

  std::size_t rows() const { return row_ids.size(); }
  std::size_t cols() const { return columns.size(); }
  double at(std::size_t row, std::size_t col) const {
    return values[row * cols() + col];
  }

  // Rows restricted to the given ids (order preserved from `ids`).
  FeatureMatrix select_rows(const std::vector<std::string>& ids) const;
  // Columns restricted to the given kinds (order preserved from `kinds`).
  FeatureMatrix select_columns(const std::vector<ScorerKind>& kinds) const;
};

// Builds features from calibrated scores for the requested ids.
FeatureMatrix build_features(const ScoreMatrix& calibrated,
                             const std::vector<std::string>& ids,
                             double epsilon = 1e-6);

struct LogisticModel {
  std::vector<ScorerKind> columns;
  std::vector<double> weights;
  double bias = 0.0;
  double l2_lambda = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> fit_ids;  // rows used in fitting, for leakage checks
};

// Mean negative log-likelihood plus (lambda/2)*||w||^2, bias unpenalized.
// When grad is non-null it receives d/d[bias, w_0..w_{p-1}].
double logistic_loss_gradient(const FeatureMatrix& X,
                              const std::vector<int>& y,
                              const std::vector<double>& weights, double bias,
                              double l2_lambda,
                              std::vector<double>* grad = nullptr);

// IRLS with step halving and a gradient-descent fallback; converged when the
// gradient max-norm drops to 1e-8, capped at 10000 iterations. Deterministic.
LogisticModel fit_logistic_regression(const FeatureMatrix& X,
                                      const std::vector<int>& y,
                                      double l2_lambda, std::uint64_t seed);

std::vector<double> predict_multiscore(const LogisticModel& m,
                                       const FeatureMatrix& X);

std::string logistic_model_to_json(const LogisticModel& m);
LogisticModel logistic_model_from_json(const std::string& text);

}  // namespace halluscore
