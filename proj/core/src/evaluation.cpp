#include "halluscore/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "halluscore/error.hpp"

namespace halluscore {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Brier: return "brier";
    case LossKind::NegF1AtMedian: return "f1";
    case LossKind::NegAccuracy: return "acc";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "brier") return LossKind::Brier;
  if (name == "f1") return LossKind::NegF1AtMedian;
  if (name == "acc") return LossKind::NegAccuracy;
  raise(ErrorCode::InvalidArgument, "unknown loss kind \"" + name + "\"");
}

double brier(const std::vector<double>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) {
    raise(ErrorCode::LengthMismatch,
          "predictions and labels differ in length");
  }
  if (preds.empty()) raise(ErrorCode::TooSmall, "no predictions");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - double(labels[i]);
    sum += d * d;
  }
  return sum / double(preds.size());
}

double threshold_at_percentile(const std::vector<double>& scores,
                               double percentile) {
  if (scores.empty()) raise(ErrorCode::TooSmall, "no scores for threshold");
  if (percentile < 0.0 || percentile > 100.0) {
    raise(ErrorCode::InvalidArgument, "percentile outside [0,100]");
  }
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const double n = double(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

F1Accuracy f1_accuracy(const std::vector<int>& preds,
                       const std::vector<int>& labels) {
  if (preds.size() != labels.size()) {
    raise(ErrorCode::LengthMismatch, "predictions and labels differ in length");
  }
  if (preds.empty()) raise(ErrorCode::TooSmall, "no predictions");
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) ++correct;
    if (preds[i] == 1 && labels[i] == 1) ++tp;
    if (preds[i] == 1 && labels[i] == 0) ++fp;
    if (preds[i] == 0 && labels[i] == 1) ++fn;
  }
  F1Accuracy out;
  out.accuracy = double(correct) / double(preds.size());
  if (tp == 0) {
    out.f1 = 0.0;  // covers no predicted positives and no true positives
  } else {
    const double precision = double(tp) / double(tp + fp);
    const double recall = double(tp) / double(tp + fn);
    out.f1 = 2.0 * precision * recall / (precision + recall);
  }
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    // positions i..j share the average of ranks i+1..j+1
    const double avg = (double(i + 1) + double(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    raise(ErrorCode::LengthMismatch, "rank inputs differ in length");
  }
  if (a.size() < 2) raise(ErrorCode::TooSmall, "need at least two points");
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [&](double x) { return x == v.front(); });
  };
  if (constant(a) || constant(b)) {
    raise(ErrorCode::ConstantInput, "rank correlation of a constant input");
  }
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const std::size_t n = ra.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= double(n);
  mb /= double(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ra[i] - ma;
    const double db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  return cov / std::sqrt(va * vb);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return nlohmann::json(v).dump();
}

void write_metrics_csv(const EvaluationReport& report,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out << "scorer,brier,f1,accuracy,cost\n";
  for (const auto& row : report.rows) {
    out << row.name << "," << format_double(row.brier) << ","
        << format_double(row.f1) << "," << format_double(row.accuracy) << ","
        << row.cost << "\n";
  }
}

void write_correlation_csv(const EvaluationReport& report,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  const std::size_t n = report.correlation_names.size();
  out << "scorer";
  for (const auto& name : report.correlation_names) out << "," << name;
  out << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << report.correlation_names[i];
    for (std::size_t j = 0; j < n; ++j) {
      out << "," << format_double(report.correlation[i * n + j]);
    }
    out << "\n";
  }
}

void write_budget_curve_csv(const EvaluationReport& report,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out << "budget,selected,cost,validation_loss,test_brier,test_f1,"
         "test_accuracy\n";
  for (const auto& row : report.budget_rows) {
    out << row.budget << "," << row.selected << "," << row.cost << ","
        << format_double(row.validation_loss) << ","
        << format_double(row.test_brier) << "," << format_double(row.test_f1)
        << "," << format_double(row.test_accuracy) << "\n";
  }
}

}  // namespace halluscore
