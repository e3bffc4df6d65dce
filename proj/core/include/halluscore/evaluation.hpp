#pragma once

#include <map>
#include <string>
#include <vector>

#include "halluscore/types.hpp"

namespace halluscore {

// Selection losses; lower is better for every kind.
enum class LossKind { Brier, NegF1AtMedian, NegAccuracy };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

// Mean squared difference between predictions and binary labels.
double brier(const std::vector<double>& preds, const std::vector<int>& labels);

// Nearest-rank percentile: the ceil(p/100 * n)-th order statistic, clamped to
// a valid rank. Classification rule downstream: permissible iff score >=
// threshold.
double threshold_at_percentile(const std::vector<double>& scores,
                               double percentile);

struct F1Accuracy {
  double f1 = 0.0;
  double accuracy = 0.0;
};

// Positive class is permissible (y=1); F1 is 0 when there are no predicted or
// no true positives.
F1Accuracy f1_accuracy(const std::vector<int>& preds,
                       const std::vector<int>& labels);

// Fractional (average) ranks, 1-based; ties share the average of their ranks.
std::vector<double> average_ranks(const std::vector<double>& v);

// Pearson correlation of average ranks. Constant input is an error.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct ReportRow {
  std::string name;     // scorer name, "multi_score", or "budget_<B>"
  double brier = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  int cost = 0;
};

struct BudgetRow {
  int budget = 0;
  std::string selected;  // scorer names joined by ';'
  int cost = 0;
  double validation_loss = 0.0;
  double test_brier = 0.0;
  double test_f1 = 0.0;
  double test_accuracy = 0.0;
};

struct EvaluationReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> correlation_names;
  std::vector<double> correlation;  // square, row-major; nan when undefined
  std::vector<BudgetRow> budget_rows;
  std::map<std::string, double> thresholds;  // per row name
  std::string split_id;
};

// Shortest round-trip decimal form; "nan"/"inf" spelled out. Used by every
// report writer so reruns are byte-identical.
std::string format_double(double v);

void write_metrics_csv(const EvaluationReport& report, const std::string& path);
void write_correlation_csv(const EvaluationReport& report,
                           const std::string& path);
void write_budget_curve_csv(const EvaluationReport& report,
                            const std::string& path);

}  // namespace halluscore
