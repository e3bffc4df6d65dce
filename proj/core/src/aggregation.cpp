#include "halluscore/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <Eigen/Dense>

#include "json.hpp"

#include "halluscore/error.hpp"

namespace halluscore {

using nlohmann::json;

double logit_transform(double s, double epsilon) {
  if (!(s >= 0.0 && s <= 1.0)) {
    raise(ErrorCode::InvalidArgument,
          "score outside [0,1]: " + std::to_string(s));
  }
  if (!(epsilon > 0.0 && epsilon < 0.1)) {
    raise(ErrorCode::InvalidArgument, "epsilon outside (0, 0.1)");
  }
  const double clamped = std::clamp(s, epsilon, 1.0 - epsilon);
  return std::log(clamped / (1.0 - clamped));
}

double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(t)) without overflow
double log1pexp(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

std::unordered_map<std::string, std::size_t> index_rows(
    const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
  return index;
}

}  // namespace

FeatureMatrix FeatureMatrix::select_rows(
    const std::vector<std::string>& ids) const {
  const auto index = index_rows(row_ids);
  FeatureMatrix out;
  out.columns = columns;
  out.row_ids = ids;
  out.values.reserve(ids.size() * cols());
  out.imputed.reserve(ids.size() * cols());
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) {
      raise(ErrorCode::InvalidArgument, "unknown feature row id \"" + id + "\"");
    }
    const std::size_t r = it->second;
    for (std::size_t c = 0; c < cols(); ++c) {
      out.values.push_back(values[r * cols() + c]);
      out.imputed.push_back(imputed[r * cols() + c]);
    }
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(
    const std::vector<ScorerKind>& kinds) const {
  std::vector<std::size_t> picks;
  picks.reserve(kinds.size());
  for (const auto& kind : kinds) {
    const auto it = std::find(columns.begin(), columns.end(), kind);
    if (it == columns.end()) {
      raise(ErrorCode::InvalidArgument,
            "unknown feature column \"" + to_string(kind) + "\"");
    }
    picks.push_back(static_cast<std::size_t>(it - columns.begin()));
  }
  FeatureMatrix out;
  out.row_ids = row_ids;
  out.columns = kinds;
  out.values.reserve(rows() * picks.size());
  out.imputed.reserve(rows() * picks.size());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (const auto c : picks) {
      out.values.push_back(values[r * cols() + c]);
      out.imputed.push_back(imputed[r * cols() + c]);
    }
  }
  return out;
}

FeatureMatrix build_features(const ScoreMatrix& calibrated,
                             const std::vector<std::string>& ids,
                             double epsilon) {
  FeatureMatrix out;
  out.columns = calibrated.scorers;
  out.row_ids = ids;
  out.values.reserve(ids.size() * calibrated.cols());
  out.imputed.reserve(ids.size() * calibrated.cols());
  for (const auto& id : ids) {
    const std::size_t r = calibrated.row_of(id);
    for (std::size_t c = 0; c < calibrated.cols(); ++c) {
      if (calibrated.has(r, c)) {
        out.values.push_back(logit_transform(calibrated.at(r, c), epsilon));
        out.imputed.push_back(0);
      } else {
        out.values.push_back(0.0);
        out.imputed.push_back(1);
      }
    }
  }
  return out;
}

double logistic_loss_gradient(const FeatureMatrix& X, const std::vector<int>& y,
                              const std::vector<double>& weights, double bias,
                              double l2_lambda, std::vector<double>* grad) {
  const std::size_t n = X.rows();
  const std::size_t p = X.cols();
  if (y.size() != n) {
    raise(ErrorCode::LengthMismatch, "labels do not match feature rows");
  }
  if (weights.size() != p) {
    raise(ErrorCode::LengthMismatch, "weights do not match feature columns");
  }
  if (n == 0) raise(ErrorCode::TooSmall, "no rows");

  if (grad) grad->assign(p + 1, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double t = bias;
    for (std::size_t j = 0; j < p; ++j) t += weights[j] * X.at(i, j);
    loss += log1pexp(t) - double(y[i]) * t;
    if (grad) {
      const double residual = sigmoid(t) - double(y[i]);
      (*grad)[0] += residual;
      for (std::size_t j = 0; j < p; ++j) (*grad)[j + 1] += residual * X.at(i, j);
    }
  }
  loss /= double(n);
  for (std::size_t j = 0; j < p; ++j) {
    loss += 0.5 * l2_lambda * weights[j] * weights[j];
  }
  if (grad) {
    for (auto& g : *grad) g /= double(n);
    for (std::size_t j = 0; j < p; ++j) (*grad)[j + 1] += l2_lambda * weights[j];
  }
  return loss;
}

LogisticModel fit_logistic_regression(const FeatureMatrix& X,
                                      const std::vector<int>& y,
                                      double l2_lambda, std::uint64_t seed) {
  (void)seed;  // the optimizer is deterministic from a zero start
  const std::size_t n = X.rows();
  const std::size_t p = X.cols();
  if (n == 0 || p == 0) raise(ErrorCode::TooSmall, "empty feature matrix");
  if (y.size() != n) {
    raise(ErrorCode::LengthMismatch, "labels do not match feature rows");
  }
  bool has_pos = false, has_neg = false;
  for (int label : y) {
    if (label == 1) has_pos = true;
    if (label == 0) has_neg = true;
  }
  if (!has_pos || !has_neg) {
    raise(ErrorCode::SingleClass, "labels contain a single class");
  }
  for (double v : X.values) {
    if (!std::isfinite(v)) {
      raise(ErrorCode::NonFiniteValue, "non-finite feature value");
    }
  }

  constexpr double kGradTol = 1e-8;
  constexpr int kMaxIters = 10000;

  LogisticModel model;
  model.columns = X.columns;
  model.weights.assign(p, 0.0);
  model.bias = 0.0;
  model.l2_lambda = l2_lambda;
  model.fit_ids = X.row_ids;

  Eigen::MatrixXd design(n, p + 1);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j) design(i, j + 1) = X.at(i, j);
  }

  std::vector<double> grad;
  double loss =
      logistic_loss_gradient(X, y, model.weights, model.bias, l2_lambda, &grad);

  for (int iter = 0; iter < kMaxIters; ++iter) {
    model.iterations = iter;
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    if (gmax <= kGradTol) {
      model.converged = true;
      return model;
    }

    // Newton direction from the weighted normal equations
    Eigen::VectorXd theta(p + 1);
    theta(0) = model.bias;
    for (std::size_t j = 0; j < p; ++j) theta(j + 1) = model.weights[j];

    const Eigen::VectorXd t = design * theta;
    Eigen::VectorXd w(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = sigmoid(t(i));
      w(i) = std::max(s * (1.0 - s), 1e-10);
    }
    Eigen::MatrixXd hessian =
        design.transpose() * w.asDiagonal() * design / double(n);
    for (std::size_t j = 1; j <= p; ++j) hessian(j, j) += l2_lambda;

    Eigen::VectorXd g(p + 1);
    for (std::size_t j = 0; j < p + 1; ++j) g(j) = grad[j];
    Eigen::VectorXd direction = hessian.ldlt().solve(-g);
    if (!direction.allFinite()) direction = -g;  // gradient-descent fallback

    // step halving until the loss stops increasing
    double step = 1.0;
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      LogisticModel trial = model;
      trial.bias = model.bias + step * direction(0);
      for (std::size_t j = 0; j < p; ++j) {
        trial.weights[j] = model.weights[j] + step * direction(j + 1);
      }
      std::vector<double> trial_grad;
      const double trial_loss = logistic_loss_gradient(
          X, y, trial.weights, trial.bias, l2_lambda, &trial_grad);
      if (std::isfinite(trial_loss) && trial_loss <= loss) {
        model.bias = trial.bias;
        model.weights = trial.weights;
        loss = trial_loss;
        grad = std::move(trial_grad);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // a stalled line search means we are at numerical precision
      model.converged = true;
      return model;
    }
  }
  model.iterations = kMaxIters;
  model.converged = false;
  return model;
}

std::vector<double> predict_multiscore(const LogisticModel& m,
                                       const FeatureMatrix& X) {
  if (m.columns != X.columns) {
    raise(ErrorCode::InvalidArgument,
          "feature columns do not match the fitted model");
  }
  std::vector<double> preds;
  preds.reserve(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double t = m.bias;
    for (std::size_t j = 0; j < X.cols(); ++j) t += m.weights[j] * X.at(i, j);
    preds.push_back(sigmoid(t));
  }
  return preds;
}

std::string logistic_model_to_json(const LogisticModel& m) {
  json doc;
  doc["version"] = 1;
  doc["columns"] = json::array();
  for (const auto& kind : m.columns) doc["columns"].push_back(to_string(kind));
  doc["weights"] = m.weights;
  doc["bias"] = m.bias;
  doc["l2_lambda"] = m.l2_lambda;
  doc["converged"] = m.converged;
  doc["iterations"] = m.iterations;
  doc["fit_ids"] = m.fit_ids;
  return doc.dump(2);
}

LogisticModel logistic_model_from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("weights")) {
    raise(ErrorCode::ParseError, "invalid logistic model document");
  }
  LogisticModel m;
  for (const auto& name : doc["columns"]) {
    m.columns.push_back(parse_scorer_kind(name.get<std::string>()));
  }
  m.weights = doc["weights"].get<std::vector<double>>();
  m.bias = doc["bias"].get<double>();
  m.l2_lambda = doc["l2_lambda"].get<double>();
  m.converged = doc["converged"].get<bool>();
  m.iterations = doc["iterations"].get<int>();
  if (doc.contains("fit_ids")) {
    m.fit_ids = doc["fit_ids"].get<std::vector<std::string>>();
  }
  if (m.weights.size() != m.columns.size()) {
    raise(ErrorCode::ParseError, "model weight count mismatch");
  }
  return m;
}

}  // namespace halluscore
