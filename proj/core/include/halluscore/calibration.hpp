#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "halluscore/grouping.hpp"

namespace halluscore {

struct CalibrationConfig {
  int bins = 10;
  double alpha = 0.02;
  int min_cell = 20;
  int max_iters = 1000;
};

// Maps a score in [0, 1] to its bin index under equal-width binning.
int bin_of(double value, int bins);

struct CellReport {
  int group_id = 0;
  int bin = 0;
  std::size_t count = 0;
  double score_mean = 0.0;
  double label_mean = 0.0;
  double error = 0.0;  // |label_mean - score_mean|
};

struct CalibrationErrorReport {
  double max_cell_error = 0.0;
  std::vector<CellReport> cells;  // qualifying cells only (count >= min_cell)
};

// Worst within-cell gap between mean label and mean score over the marginal
// bins (single global group).
CalibrationErrorReport calibration_error(const std::vector<double>& scores,
                                         const std::vector<int>& labels,
                                         int bins, int min_cell);

// Same report over overlapping groups; memberships[i] lists the group ids of
// example i.
CalibrationErrorReport grouped_calibration_error(
    const std::vector<double>& scores, const std::vector<int>& labels,
    const std::vector<std::vector<int>>& memberships, int bins, int min_cell);

struct Patch {
  int group_id = 0;
  int bin = 0;
  double adjustment = 0.0;
};

struct PatchTraceEntry {
  Patch patch;
  std::size_t cell_count = 0;
  double cell_error_before = 0.0;
  double brier_after = 0.0;
};

enum class CalibratorKind { HistogramBinning, Platt, Multicalibrated };

struct Calibrator {
  CalibratorKind kind = CalibratorKind::Multicalibrated;
  int bins = 10;
  // Histogram binning: one calibrated value per bin.
  std::vector<double> bin_values;
  // Platt scaling: sigmoid(slope * logit(s) + intercept).
  double slope = 1.0;
  double intercept = 0.0;
  double logit_epsilon = 1e-6;
  // Multicalibration: additive patches replayed in order.
  std::vector<Patch> patches;
  std::vector<PatchTraceEntry> trace;
  bool hit_iteration_limit = false;
  std::optional<GroupingModel> grouping;
};

Calibrator fit_histogram_binning(const std::vector<double>& scores,
                                 const std::vector<int>& labels, int bins);

Calibrator fit_platt(const std::vector<double>& scores,
                     const std::vector<int>& labels, double l2_lambda = 1e-3,
                     double logit_epsilon = 1e-6);

// Iteratively patches the worst qualifying (group, bin) cell until every such
// cell's gap is at most alpha or the iteration cap is reached. Ties pick the
// lower group id, then the lower bin. Values stay clipped to [0, 1].
Calibrator multicalibrate(const std::vector<double>& scores,
                          const std::vector<int>& labels,
                          const std::vector<std::vector<int>>& memberships,
                          const CalibrationConfig& cfg);

// Multicalibrated identity: no patches, applies as a pass-through.
Calibrator identity_calibrator(int bins = 10);

double apply_calibrator(const Calibrator& calibrator, double score);
std::vector<double> apply_calibrator(const Calibrator& calibrator,
                                     const std::vector<double>& scores);

// Multicalibrated apply with group memberships: replays each patch against
// the value the running score has at that step.
std::vector<double> apply_calibrator(
    const Calibrator& calibrator, const std::vector<double>& scores,
    const std::vector<std::vector<int>>& memberships);

std::string calibrator_to_json(const Calibrator& calibrator);
Calibrator calibrator_from_json(const std::string& text);

}  // namespace halluscore
