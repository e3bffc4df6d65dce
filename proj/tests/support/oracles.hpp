#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

// Deliberately naive reference implementations, written independently of the
// library code paths they check.
namespace testsupport {

inline double oracle_brier(const std::vector<double>& preds,
                           const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    total += (preds[i] - labels[i]) * (preds[i] - labels[i]);
  }
  return total / double(preds.size());
}

inline double oracle_threshold(std::vector<double> scores, double percentile) {
  std::sort(scores.begin(), scores.end());
  long rank = static_cast<long>(
      std::ceil(percentile / 100.0 * double(scores.size())));
  rank = std::max(1l, std::min(rank, static_cast<long>(scores.size())));
  return scores[static_cast<std::size_t>(rank - 1)];
}

struct OracleConfusion {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline OracleConfusion oracle_confusion(const std::vector<int>& preds,
                                        const std::vector<int>& labels) {
  OracleConfusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == 1 && labels[i] == 1) ++c.tp;
    if (preds[i] == 1 && labels[i] == 0) ++c.fp;
    if (preds[i] == 0 && labels[i] == 1) ++c.fn;
    if (preds[i] == 0 && labels[i] == 0) ++c.tn;
  }
  return c;
}

inline double oracle_f1(const std::vector<int>& preds,
                        const std::vector<int>& labels) {
  const OracleConfusion c = oracle_confusion(preds, labels);
  if (c.tp == 0) return 0.0;
  const double precision = double(c.tp) / double(c.tp + c.fp);
  const double recall = double(c.tp) / double(c.tp + c.fn);
  return 2.0 * precision * recall / (precision + recall);
}

inline double oracle_accuracy(const std::vector<int>& preds,
                              const std::vector<int>& labels) {
  const OracleConfusion c = oracle_confusion(preds, labels);
  return double(c.tp + c.tn) / double(preds.size());
}

// Quadratic-time average ranks: rank = (count below) + (count equal + 1) / 2.
inline std::vector<double> oracle_ranks(const std::vector<double>& v) {
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    long below = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++below;
      if (v[j] == v[i]) ++equal;
    }
    ranks[i] = double(below) + (double(equal) + 1.0) / 2.0;
  }
  return ranks;
}

inline double oracle_pearson(const std::vector<double>& a,
                             const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= double(n);
  mb /= double(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

inline double oracle_spearman(const std::vector<double>& a,
                              const std::vector<double>& b) {
  return oracle_pearson(oracle_ranks(a), oracle_ranks(b));
}

// Worst |mean label - mean score| over equal-width bins holding at least
// min_cell points.
inline double oracle_max_cell_error(const std::vector<double>& scores,
                                    const std::vector<int>& labels, int bins,
                                    int min_cell) {
  double worst = 0.0;
  for (int b = 0; b < bins; ++b) {
    double score_sum = 0.0, label_sum = 0.0;
    long count = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      int bin = static_cast<int>(scores[i] * bins);
      bin = std::min(bin, bins - 1);
      if (bin != b) continue;
      score_sum += scores[i];
      label_sum += labels[i];
      ++count;
    }
    if (count < min_cell) continue;
    worst = std::max(worst,
                     std::abs(label_sum / double(count) - score_sum / double(count)));
  }
  return worst;
}

}  // namespace testsupport
