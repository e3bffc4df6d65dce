#include "halluscore/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <utility>

#include "halluscore/aggregation.hpp"
#include "halluscore/error.hpp"

namespace halluscore {
namespace {

void check_scores(const std::vector<double>& scores) {
  for (double s : scores) {
    if (!std::isfinite(s)) raise(ErrorCode::NonFiniteValue, "non-finite score");
    if (s < 0.0 || s > 1.0) {
      raise(ErrorCode::InvalidArgument, "score outside [0, 1]");
    }
  }
}

void check_labels(const std::vector<int>& labels) {
  for (int y : labels) {
    if (y != 0 && y != 1) raise(ErrorCode::InvalidArgument, "label must be 0 or 1");
  }
}

void check_pair(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    raise(ErrorCode::LengthMismatch, "scores and labels differ in length");
  }
  if (scores.empty()) raise(ErrorCode::TooSmall, "no examples");
  check_scores(scores);
  check_labels(labels);
}

struct CellStats {
  std::size_t count = 0;
  double score_sum = 0.0;
  double label_sum = 0.0;
};

// Accumulates per (group, bin) statistics; the ordered map keeps cells in
// (group, bin) order, which is also the tie-break order.
std::map<std::pair<int, int>, CellStats> collect_cells(
    const std::vector<double>& scores, const std::vector<int>& labels,
    const std::vector<std::vector<int>>& memberships, int bins) {
  std::map<std::pair<int, int>, CellStats> cells;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int bin = bin_of(scores[i], bins);
    for (int g : memberships[i]) {
      CellStats& cell = cells[{g, bin}];
      cell.count += 1;
      cell.score_sum += scores[i];
      cell.label_sum += labels[i];
    }
  }
  return cells;
}

double brier_of(const std::vector<double>& scores, const std::vector<int>& labels) {
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double d = scores[i] - labels[i];
    acc += d * d;
  }
  return acc / static_cast<double>(scores.size());
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

void apply_patch(std::vector<double>& current,
                 const std::vector<std::vector<int>>& memberships,
                 const Patch& patch, int bins) {
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (bin_of(current[i], bins) != patch.bin) continue;
    const auto& m = memberships[i];
    if (std::find(m.begin(), m.end(), patch.group_id) == m.end()) continue;
    current[i] = clamp01(current[i] + patch.adjustment);
  }
}

}  // namespace

int bin_of(double value, int bins) {
  if (bins < 1) raise(ErrorCode::InvalidConfig, "bins must be >= 1");
  if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
    raise(ErrorCode::InvalidArgument, "binned value must be in [0, 1]");
  }
  const int bin = static_cast<int>(value * bins);
  return std::min(bin, bins - 1);
}

CalibrationErrorReport calibration_error(const std::vector<double>& scores,
                                         const std::vector<int>& labels,
                                         int bins, int min_cell) {
  std::vector<std::vector<int>> memberships(scores.size(), std::vector<int>{0});
  return grouped_calibration_error(scores, labels, memberships, bins, min_cell);
}

CalibrationErrorReport grouped_calibration_error(
    const std::vector<double>& scores, const std::vector<int>& labels,
    const std::vector<std::vector<int>>& memberships, int bins, int min_cell) {
  check_pair(scores, labels);
  if (memberships.size() != scores.size()) {
    raise(ErrorCode::LengthMismatch, "memberships and scores differ in length");
  }
  if (min_cell < 1) raise(ErrorCode::InvalidConfig, "min_cell must be >= 1");
  const auto cells = collect_cells(scores, labels, memberships, bins);
  CalibrationErrorReport report;
  for (const auto& [key, cell] : cells) {
    if (cell.count < static_cast<std::size_t>(min_cell)) continue;
    CellReport row;
    row.group_id = key.first;
    row.bin = key.second;
    row.count = cell.count;
    row.score_mean = cell.score_sum / static_cast<double>(cell.count);
    row.label_mean = cell.label_sum / static_cast<double>(cell.count);
    row.error = std::abs(row.label_mean - row.score_mean);
    report.max_cell_error = std::max(report.max_cell_error, row.error);
    report.cells.push_back(row);
  }
  return report;
}

Calibrator fit_histogram_binning(const std::vector<double>& scores,
                                 const std::vector<int>& labels, int bins) {
  check_pair(scores, labels);
  if (bins < 1) raise(ErrorCode::InvalidConfig, "bins must be >= 1");
  std::vector<double> sums(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto b = static_cast<std::size_t>(bin_of(scores[i], bins));
    sums[b] += labels[i];
    counts[b] += 1;
  }
  Calibrator c;
  c.kind = CalibratorKind::HistogramBinning;
  c.bins = bins;
  c.bin_values.resize(static_cast<std::size_t>(bins));
  for (std::size_t b = 0; b < c.bin_values.size(); ++b) {
    c.bin_values[b] = counts[b] > 0
                          ? sums[b] / static_cast<double>(counts[b])
                          : (static_cast<double>(b) + 0.5) / bins;
  }
  return c;
}

Calibrator fit_platt(const std::vector<double>& scores,
                     const std::vector<int>& labels, double l2_lambda,
                     double logit_epsilon) {
  check_pair(scores, labels);
  FeatureMatrix X;
  X.columns = {ScorerKind{ScorerBase::PTrue, 0}};
  X.row_ids.reserve(scores.size());
  X.values.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    X.row_ids.push_back(std::to_string(i));
    X.values.push_back(logit_transform(scores[i], logit_epsilon));
    X.imputed.push_back(0);
  }
  const LogisticModel m = fit_logistic_regression(X, labels, l2_lambda, 0);
  Calibrator c;
  c.kind = CalibratorKind::Platt;
  c.slope = m.weights.at(0);
  c.intercept = m.bias;
  c.logit_epsilon = logit_epsilon;
  return c;
}

Calibrator multicalibrate(const std::vector<double>& scores,
                          const std::vector<int>& labels,
                          const std::vector<std::vector<int>>& memberships,
                          const CalibrationConfig& cfg) {
  check_pair(scores, labels);
  if (memberships.size() != scores.size()) {
    raise(ErrorCode::LengthMismatch, "memberships and scores differ in length");
  }
  for (const auto& m : memberships) {
    if (m.empty()) raise(ErrorCode::InvalidArgument, "example belongs to no group");
  }
  if (cfg.bins < 1) raise(ErrorCode::InvalidConfig, "bins must be >= 1");
  if (cfg.min_cell < 1) raise(ErrorCode::InvalidConfig, "min_cell must be >= 1");
  if (!(cfg.alpha >= 0.0)) raise(ErrorCode::InvalidConfig, "alpha must be >= 0");
  if (cfg.max_iters < 0) raise(ErrorCode::InvalidConfig, "max_iters must be >= 0");

  Calibrator c;
  c.kind = CalibratorKind::Multicalibrated;
  c.bins = cfg.bins;

  std::vector<double> current = scores;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const auto cells = collect_cells(current, labels, memberships, cfg.bins);
    bool found = false;
    std::pair<int, int> worst_key{0, 0};
    CellStats worst{};
    double worst_error = 0.0;
    for (const auto& [key, cell] : cells) {
      if (cell.count < static_cast<std::size_t>(cfg.min_cell)) continue;
      const double err = std::abs((cell.label_sum - cell.score_sum) /
                                  static_cast<double>(cell.count));
      if (err > worst_error) {
        worst_error = err;
        worst_key = key;
        worst = cell;
        found = true;
      }
    }
    if (!found || worst_error <= cfg.alpha) return c;

    Patch patch;
    patch.group_id = worst_key.first;
    patch.bin = worst_key.second;
    patch.adjustment =
        (worst.label_sum - worst.score_sum) / static_cast<double>(worst.count);
    apply_patch(current, memberships, patch, cfg.bins);

    PatchTraceEntry entry;
    entry.patch = patch;
    entry.cell_count = worst.count;
    entry.cell_error_before = worst_error;
    entry.brier_after = brier_of(current, labels);
    c.patches.push_back(patch);
    c.trace.push_back(entry);
  }

  // Still above alpha after the last allowed patch.
  const auto report =
      grouped_calibration_error(current, labels, memberships, cfg.bins, cfg.min_cell);
  c.hit_iteration_limit = report.max_cell_error > cfg.alpha;
  return c;
}

Calibrator identity_calibrator(int bins) {
  Calibrator c;
  c.kind = CalibratorKind::Multicalibrated;
  c.bins = bins;
  return c;
}

double apply_calibrator(const Calibrator& calibrator, double score) {
  if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
    raise(ErrorCode::InvalidArgument, "score outside [0, 1]");
  }
  switch (calibrator.kind) {
    case CalibratorKind::HistogramBinning:
      return calibrator.bin_values.at(
          static_cast<std::size_t>(bin_of(score, calibrator.bins)));
    case CalibratorKind::Platt:
      return sigmoid(calibrator.slope *
                         logit_transform(score, calibrator.logit_epsilon) +
                     calibrator.intercept);
    case CalibratorKind::Multicalibrated:
      if (!calibrator.patches.empty()) {
        raise(ErrorCode::InvalidArgument,
              "patched calibrator needs group memberships");
      }
      return score;
  }
  raise(ErrorCode::Internal, "unknown calibrator kind");
}

std::vector<double> apply_calibrator(const Calibrator& calibrator,
                                     const std::vector<double>& scores) {
  std::vector<double> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(apply_calibrator(calibrator, s));
  return out;
}

std::vector<double> apply_calibrator(
    const Calibrator& calibrator, const std::vector<double>& scores,
    const std::vector<std::vector<int>>& memberships) {
  if (calibrator.kind != CalibratorKind::Multicalibrated) {
    return apply_calibrator(calibrator, scores);
  }
  if (memberships.size() != scores.size()) {
    raise(ErrorCode::LengthMismatch, "memberships and scores differ in length");
  }
  check_scores(scores);
  std::vector<double> current = scores;
  for (const Patch& patch : calibrator.patches) {
    apply_patch(current, memberships, patch, calibrator.bins);
  }
  return current;
}

std::string calibrator_to_json(const Calibrator& calibrator) {
  nlohmann::json j;
  j["version"] = 1;
  switch (calibrator.kind) {
    case CalibratorKind::HistogramBinning:
      j["kind"] = "histogram_binning";
      j["bins"] = calibrator.bins;
      j["bin_values"] = calibrator.bin_values;
      break;
    case CalibratorKind::Platt:
      j["kind"] = "platt";
      j["slope"] = calibrator.slope;
      j["intercept"] = calibrator.intercept;
      j["logit_epsilon"] = calibrator.logit_epsilon;
      break;
    case CalibratorKind::Multicalibrated: {
      j["kind"] = "multicalibrated";
      j["bins"] = calibrator.bins;
      j["hit_iteration_limit"] = calibrator.hit_iteration_limit;
      nlohmann::json patches = nlohmann::json::array();
      for (const Patch& p : calibrator.patches) {
        patches.push_back({{"group_id", p.group_id},
                           {"bin", p.bin},
                           {"adjustment", p.adjustment}});
      }
      j["patches"] = std::move(patches);
      nlohmann::json trace = nlohmann::json::array();
      for (const PatchTraceEntry& t : calibrator.trace) {
        trace.push_back({{"group_id", t.patch.group_id},
                         {"bin", t.patch.bin},
                         {"adjustment", t.patch.adjustment},
                         {"cell_count", t.cell_count},
                         {"cell_error_before", t.cell_error_before},
                         {"brier_after", t.brier_after}});
      }
      j["trace"] = std::move(trace);
      if (calibrator.grouping) {
        j["grouping"] = nlohmann::json::parse(
            grouping_model_to_json(*calibrator.grouping));
      }
      break;
    }
  }
  return j.dump(2);
}

Calibrator calibrator_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) raise(ErrorCode::ParseError, "invalid calibrator JSON");
  Calibrator c;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "histogram_binning") {
      c.kind = CalibratorKind::HistogramBinning;
      c.bins = j.at("bins").get<int>();
      c.bin_values = j.at("bin_values").get<std::vector<double>>();
      if (c.bin_values.size() != static_cast<std::size_t>(c.bins)) {
        raise(ErrorCode::ParseError, "bin_values length does not match bins");
      }
    } else if (kind == "platt") {
      c.kind = CalibratorKind::Platt;
      c.slope = j.at("slope").get<double>();
      c.intercept = j.at("intercept").get<double>();
      c.logit_epsilon = j.at("logit_epsilon").get<double>();
    } else if (kind == "multicalibrated") {
      c.kind = CalibratorKind::Multicalibrated;
      c.bins = j.at("bins").get<int>();
      c.hit_iteration_limit = j.value("hit_iteration_limit", false);
      for (const auto& p : j.at("patches")) {
        c.patches.push_back(Patch{p.at("group_id").get<int>(),
                                  p.at("bin").get<int>(),
                                  p.at("adjustment").get<double>()});
      }
      if (j.contains("trace")) {
        for (const auto& t : j.at("trace")) {
          PatchTraceEntry entry;
          entry.patch = Patch{t.at("group_id").get<int>(), t.at("bin").get<int>(),
                              t.at("adjustment").get<double>()};
          entry.cell_count = t.at("cell_count").get<std::size_t>();
          entry.cell_error_before = t.at("cell_error_before").get<double>();
          entry.brier_after = t.at("brier_after").get<double>();
          c.trace.push_back(entry);
        }
      }
      if (j.contains("grouping")) {
        c.grouping = grouping_model_from_json(j.at("grouping").dump());
      }
    } else {
      raise(ErrorCode::ParseError, "unknown calibrator kind: " + kind);
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, std::string("calibrator JSON: ") + e.what());
  }
  return c;
}

}  // namespace halluscore
