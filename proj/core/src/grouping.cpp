#include "halluscore/grouping.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <unordered_map>
#include <unordered_set>

#include "halluscore/error.hpp"
#include "halluscore/rng.hpp"

namespace halluscore {
namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Mixture {
  std::vector<double> weights;
  Matrix means;                 // k x d
  std::vector<Matrix> covs;     // k of d x d
  double log_likelihood = 0.0;
  bool converged = false;
};

// Log density of a multivariate normal via the Cholesky factor of its
// covariance. The covariance is kept positive definite by the EM regularizer.
double log_normal_pdf(const Vector& x, const Vector& mean,
                      const Eigen::LLT<Matrix>& llt, double log_det) {
  const Vector diff = x - mean;
  const Vector y = llt.matrixL().solve(diff);
  const double quad = y.squaredNorm();
  const double d = static_cast<double>(x.size());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det + quad);
}

double log_sum_exp_row(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp(v[i] - m);
  return m + std::log(acc);
}

// Deterministic farthest-point seeding: one random start, then greedily the
// point farthest from the chosen set, ties broken by the lower row index.
std::vector<Eigen::Index> initial_mean_rows(const Matrix& data, int k,
                                            std::uint64_t seed) {
  const Eigen::Index n = data.rows();
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
  std::vector<Eigen::Index> chosen;
  chosen.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  std::vector<double> best_dist(static_cast<std::size_t>(n),
                                std::numeric_limits<double>::infinity());
  while (static_cast<int>(chosen.size()) < k) {
    const Eigen::Index last = chosen.back();
    Eigen::Index next = -1;
    double next_dist = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = (data.row(i) - data.row(last)).squaredNorm();
      auto& best = best_dist[static_cast<std::size_t>(i)];
      best = std::min(best, d);
      if (best > next_dist) {
        next_dist = best;
        next = i;
      }
    }
    chosen.push_back(next);
  }
  return chosen;
}

Mixture fit_mixture(const Matrix& data, int k, const GroupingConfig& cfg) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();

  Mixture mix;
  mix.weights.assign(static_cast<std::size_t>(k), 1.0 / k);
  mix.means.resize(k, d);
  const auto rows = initial_mean_rows(data, k, cfg.seed);
  for (int j = 0; j < k; ++j) mix.means.row(j) = data.row(rows[static_cast<std::size_t>(j)]);

  const Vector grand_mean = data.colwise().mean();
  Matrix centered = data.rowwise() - grand_mean.transpose();
  Matrix shared_cov = centered.transpose() * centered / std::max<double>(1.0, n - 1.0);
  shared_cov += cfg.covariance_reg * Matrix::Identity(d, d);
  mix.covs.assign(static_cast<std::size_t>(k), shared_cov);

  Matrix log_resp(n, k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.em_max_iters; ++iter) {
    std::vector<Eigen::LLT<Matrix>> llts;
    std::vector<double> log_dets;
    llts.reserve(static_cast<std::size_t>(k));
    log_dets.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      llts.emplace_back(mix.covs[static_cast<std::size_t>(j)]);
      if (llts.back().info() != Eigen::Success) {
        raise(ErrorCode::EmNonConvergence, "covariance factorization failed");
      }
      double log_det = 0.0;
      const auto& L = llts.back().matrixL();
      for (Eigen::Index t = 0; t < d; ++t) log_det += 2.0 * std::log(L(t, t));
      log_dets.push_back(log_det);
    }

    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector row(k);
      const Vector x = data.row(i);
      for (int j = 0; j < k; ++j) {
        row[j] = std::log(mix.weights[static_cast<std::size_t>(j)]) +
                 log_normal_pdf(x, mix.means.row(j), llts[static_cast<std::size_t>(j)],
                                log_dets[static_cast<std::size_t>(j)]);
      }
      const double norm = log_sum_exp_row(row);
      ll += norm;
      for (int j = 0; j < k; ++j) log_resp(i, j) = row[j] - norm;
    }
    if (!std::isfinite(ll)) {
      raise(ErrorCode::EmNonConvergence, "non-finite mixture likelihood");
    }
    mix.log_likelihood = ll;
    if (std::abs(ll - prev_ll) <= cfg.em_tol * (1.0 + std::abs(ll))) {
      mix.converged = true;
      break;
    }
    prev_ll = ll;

    for (int j = 0; j < k; ++j) {
      Vector resp = log_resp.col(j).array().exp();
      const double nk = resp.sum();
      const double safe_nk = std::max(nk, 1e-12);
      mix.weights[static_cast<std::size_t>(j)] = safe_nk / static_cast<double>(n);
      Vector mean = (data.transpose() * resp) / safe_nk;
      mix.means.row(j) = mean;
      Matrix diff = data.rowwise() - mean.transpose();
      Matrix cov = diff.transpose() * (resp.asDiagonal() * diff) / safe_nk;
      cov += cfg.covariance_reg * Matrix::Identity(d, d);
      mix.covs[static_cast<std::size_t>(j)] = cov;
    }
    double wsum = 0.0;
    for (double w : mix.weights) wsum += w;
    for (double& w : mix.weights) w /= wsum;
  }
  return mix;
}

int parameter_count(int k, int d) {
  return (k - 1) + k * d + k * d * (d + 1) / 2;
}

}  // namespace

std::vector<double> GroupingModel::project(
    const std::vector<double>& raw_embedding) const {
  if (raw_embedding.size() != raw_dim) {
    raise(ErrorCode::DimensionMismatch,
          "embedding has dimension " + std::to_string(raw_embedding.size()) +
              ", model expects " + std::to_string(raw_dim));
  }
  std::vector<double> out(reduced_dim, 0.0);
  for (std::size_t r = 0; r < reduced_dim; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < raw_dim; ++c) {
      acc += projection[r * raw_dim + c] * (raw_embedding[c] - center[c]);
    }
    out[r] = acc;
  }
  return out;
}

std::vector<double> GroupingModel::responsibilities(
    const std::vector<double>& raw_embedding) const {
  const std::vector<double> z = project(raw_embedding);
  const std::size_t k = components();
  const std::size_t d = reduced_dim;
  Vector x = Eigen::Map<const Vector>(z.data(), static_cast<Eigen::Index>(d));
  Vector logp(static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    Matrix cov = Eigen::Map<const Matrix>(mixture_covs.data() + j * d * d,
                                          static_cast<Eigen::Index>(d),
                                          static_cast<Eigen::Index>(d));
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
      raise(ErrorCode::Internal, "stored covariance is not positive definite");
    }
    double log_det = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      log_det += 2.0 * std::log(llt.matrixL()(static_cast<Eigen::Index>(t),
                                              static_cast<Eigen::Index>(t)));
    }
    Vector mean = Eigen::Map<const Vector>(mixture_means.data() + j * d,
                                           static_cast<Eigen::Index>(d));
    logp[static_cast<Eigen::Index>(j)] =
        std::log(mixture_weights[j]) + log_normal_pdf(x, mean, llt, log_det);
  }
  const double norm = log_sum_exp_row(logp);
  std::vector<double> out(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    out[j] = std::exp(logp[static_cast<Eigen::Index>(j)] - norm);
  }
  return out;
}

std::vector<int> GroupingModel::assign(
    const std::vector<double>& raw_embedding) const {
  std::vector<int> ids{0};
  const std::vector<double> resp = responsibilities(raw_embedding);
  for (std::size_t j = 0; j < resp.size(); ++j) {
    if (resp[j] >= responsibility_threshold) ids.push_back(static_cast<int>(j) + 1);
  }
  return ids;
}

GroupingResult build_groups(const std::vector<std::string>& ids,
                            const std::vector<std::vector<double>>& embeddings,
                            const SplitAssignment& split,
                            const GroupingConfig& cfg) {
  if (ids.size() != embeddings.size()) {
    raise(ErrorCode::LengthMismatch, "ids and embeddings differ in length");
  }
  if (ids.empty()) raise(ErrorCode::EmptyDataset, "no embeddings to group");
  if (cfg.reducer_dim < 1) raise(ErrorCode::InvalidConfig, "reducer_dim must be >= 1");
  if (cfg.max_components < 1) {
    raise(ErrorCode::InvalidConfig, "max_components must be >= 1");
  }
  if (!(cfg.responsibility_threshold > 0.0 && cfg.responsibility_threshold <= 1.0)) {
    raise(ErrorCode::InvalidConfig, "responsibility_threshold must be in (0, 1]");
  }

  const std::size_t raw_dim = embeddings.front().size();
  if (raw_dim == 0) raise(ErrorCode::DimensionMismatch, "embedding dimension is 0");
  for (const auto& e : embeddings) {
    if (e.size() != raw_dim) {
      raise(ErrorCode::DimensionMismatch, "inconsistent embedding dimensions");
    }
    for (double v : e) {
      if (!std::isfinite(v)) raise(ErrorCode::NonFiniteValue, "non-finite embedding");
    }
  }

  std::unordered_set<std::string> cal_ids(split.calibration_ids.begin(),
                                          split.calibration_ids.end());
  std::vector<std::size_t> fit_rows;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (cal_ids.count(ids[i])) fit_rows.push_back(i);
  }
  if (fit_rows.empty()) {
    raise(ErrorCode::EmptyFold, "calibration fold has no embedded examples");
  }

  Matrix fit(static_cast<Eigen::Index>(fit_rows.size()),
             static_cast<Eigen::Index>(raw_dim));
  for (std::size_t r = 0; r < fit_rows.size(); ++r) {
    for (std::size_t c = 0; c < raw_dim; ++c) {
      fit(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          embeddings[fit_rows[r]][c];
    }
  }

  const Vector mean = fit.colwise().mean();
  Matrix centered = fit.rowwise() - mean.transpose();
  Matrix cov = centered.transpose() * centered /
               std::max<double>(1.0, static_cast<double>(fit.rows()) - 1.0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) {
    raise(ErrorCode::Internal, "eigendecomposition failed");
  }

  const std::size_t reduced =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.reducer_dim), raw_dim);
  GroupingModel model;
  model.raw_dim = raw_dim;
  model.reduced_dim = reduced;
  model.center.assign(mean.data(), mean.data() + mean.size());
  model.projection.assign(reduced * raw_dim, 0.0);
  // Eigenvalues come back ascending; take the top ones and fix each axis sign
  // so the entry with the largest magnitude is positive.
  for (std::size_t r = 0; r < reduced; ++r) {
    Vector axis = eig.eigenvectors().col(static_cast<Eigen::Index>(raw_dim - 1 - r));
    Eigen::Index pivot = 0;
    axis.cwiseAbs().maxCoeff(&pivot);
    if (axis[pivot] < 0.0) axis = -axis;
    for (std::size_t c = 0; c < raw_dim; ++c) {
      model.projection[r * raw_dim + c] = axis[static_cast<Eigen::Index>(c)];
    }
  }
  model.responsibility_threshold = cfg.responsibility_threshold;

  Matrix reduced_fit(fit.rows(), static_cast<Eigen::Index>(reduced));
  {
    // model.projection is stored row by row; map it as such so the mixture
    // is fitted in the exact basis project() reproduces later.
    using RowMajorMatrix =
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajorMatrix> proj(model.projection.data(),
                                          static_cast<Eigen::Index>(reduced),
                                          static_cast<Eigen::Index>(raw_dim));
    reduced_fit = centered * proj.transpose();
  }

  const int k_cap = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(cfg.max_components),
                            fit_rows.size()));
  double best_bic = std::numeric_limits<double>::infinity();
  Mixture best;
  int best_k = 0;
  for (int k = 1; k <= k_cap; ++k) {
    Mixture mix;
    try {
      mix = fit_mixture(reduced_fit, k, cfg);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EmNonConvergence) continue;
      throw;
    }
    if (!mix.converged) continue;
    const double bic =
        -2.0 * mix.log_likelihood +
        parameter_count(k, static_cast<int>(reduced)) *
            std::log(static_cast<double>(fit_rows.size()));
    if (bic < best_bic) {
      best_bic = bic;
      best = std::move(mix);
      best_k = k;
    }
  }
  if (best_k == 0) {
    raise(ErrorCode::EmNonConvergence,
          "no mixture size converged within the iteration limit");
  }

  model.mixture_weights = best.weights;
  model.mixture_means.assign(static_cast<std::size_t>(best_k) * reduced, 0.0);
  model.mixture_covs.assign(static_cast<std::size_t>(best_k) * reduced * reduced, 0.0);
  for (int j = 0; j < best_k; ++j) {
    for (std::size_t c = 0; c < reduced; ++c) {
      model.mixture_means[static_cast<std::size_t>(j) * reduced + c] =
          best.means(j, static_cast<Eigen::Index>(c));
    }
    const Matrix& cj = best.covs[static_cast<std::size_t>(j)];
    for (std::size_t r = 0; r < reduced; ++r) {
      for (std::size_t c = 0; c < reduced; ++c) {
        model.mixture_covs[(static_cast<std::size_t>(j) * reduced + r) * reduced + c] =
            cj(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      }
    }
  }

  GroupSet set;
  set.embedding_dim = raw_dim;
  set.reducer_dim = static_cast<int>(reduced);
  set.gmm_components = best_k;
  set.groups.resize(static_cast<std::size_t>(best_k) + 1);
  set.groups[0].group_id = 0;
  set.groups[0].component = -1;
  for (int j = 0; j < best_k; ++j) {
    set.groups[static_cast<std::size_t>(j) + 1].group_id = j + 1;
    set.groups[static_cast<std::size_t>(j) + 1].component = j;
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (int g : model.assign(embeddings[i])) {
      set.groups[static_cast<std::size_t>(g)].member_ids.push_back(ids[i]);
    }
  }
  return GroupingResult{std::move(set), std::move(model)};
}

std::vector<std::vector<int>> memberships_for(const GroupSet& groups,
                                              const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
  std::vector<std::vector<int>> out(ids.size());
  for (const Group& g : groups.groups) {
    for (const std::string& id : g.member_ids) {
      auto it = index.find(id);
      if (it != index.end()) out[it->second].push_back(g.group_id);
    }
  }
  for (auto& m : out) std::sort(m.begin(), m.end());
  return out;
}

std::string grouping_model_to_json(const GroupingModel& model) {
  nlohmann::json j;
  j["version"] = 1;
  j["raw_dim"] = model.raw_dim;
  j["reduced_dim"] = model.reduced_dim;
  j["center"] = model.center;
  j["projection"] = model.projection;
  j["mixture_weights"] = model.mixture_weights;
  j["mixture_means"] = model.mixture_means;
  j["mixture_covs"] = model.mixture_covs;
  j["responsibility_threshold"] = model.responsibility_threshold;
  return j.dump(2);
}

GroupingModel grouping_model_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) raise(ErrorCode::ParseError, "invalid grouping model JSON");
  GroupingModel model;
  try {
    model.raw_dim = j.at("raw_dim").get<std::size_t>();
    model.reduced_dim = j.at("reduced_dim").get<std::size_t>();
    model.center = j.at("center").get<std::vector<double>>();
    model.projection = j.at("projection").get<std::vector<double>>();
    model.mixture_weights = j.at("mixture_weights").get<std::vector<double>>();
    model.mixture_means = j.at("mixture_means").get<std::vector<double>>();
    model.mixture_covs = j.at("mixture_covs").get<std::vector<double>>();
    model.responsibility_threshold = j.at("responsibility_threshold").get<double>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, std::string("grouping model JSON: ") + e.what());
  }
  const std::size_t k = model.mixture_weights.size();
  if (model.center.size() != model.raw_dim ||
      model.projection.size() != model.reduced_dim * model.raw_dim ||
      model.mixture_means.size() != k * model.reduced_dim ||
      model.mixture_covs.size() != k * model.reduced_dim * model.reduced_dim) {
    raise(ErrorCode::ParseError, "grouping model JSON has inconsistent shapes");
  }
  return model;
}

}  // namespace halluscore
