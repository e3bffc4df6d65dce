#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "halluscore/backend.hpp"
#include "halluscore/budget.hpp"
#include "halluscore/calibration.hpp"
#include "halluscore/evaluation.hpp"
#include "halluscore/grouping.hpp"
#include "halluscore/types.hpp"

namespace halluscore {

enum class RunMode { Live, Record, Replay };

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& name);

struct EndpointConfig {
  std::string chat_base_url;
  std::string nli_base_url;
  std::string embedding_base_url;
  std::string chat_model;
  std::string embedding_model;
  std::string bearer_token;  // taken from the environment, never from files
};

// A full run description. Loadable from JSON; the CLI overlays its flags on
// top before validation.
struct RunConfig {
  std::string dataset_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  RunMode mode = RunMode::Replay;
  std::string fixtures_path;
  std::vector<ScorerKind> scorers;
  EndpointConfig endpoints;
  double generation_temperature = 1.0;
  CalibrationConfig calibration;
  GroupingConfig grouping;  // its seed field is derived from the run seed
  double calib_fraction = 0.8;
  double l2_lambda = 1e-3;
  double logit_epsilon = 1e-6;
  std::vector<int> budgets;
  LossKind loss = LossKind::Brier;
  CostModel::Sharing cost_sharing = CostModel::Sharing::Additive;
  bool no_calibration = false;

  // Rejects unknown keys so misspelled settings cannot silently revert to
  // defaults.
  static RunConfig from_json_file(const std::string& path);
  void validate() const;
};

// Output file names inside RunConfig::out_dir.
constexpr const char* kScoresFile = "scores.jsonl";
constexpr const char* kMembershipsFile = "memberships.json";
constexpr const char* kMetricsFile = "metrics.csv";
constexpr const char* kCorrelationsFile = "correlations.csv";
constexpr const char* kBudgetCurveFile = "budget_curve.csv";
constexpr const char* kReportMetaFile = "report_meta.json";
constexpr const char* kMultiscoreModelFile = "multiscore_model.json";
std::string calibrator_file_name(const ScorerKind& kind);

void write_scores_jsonl(const std::string& path,
                        const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_scores_jsonl(const std::string& path);

// Arranges records into a dense matrix over the given scorers and ids.
// Records naming unknown ids or scorers are errors; absent cells stay
// missing.
ScoreMatrix matrix_from_records(const std::vector<ScorerKind>& scorers,
                                const std::vector<std::string>& ids,
                                const std::vector<ScoreRecord>& records);

// The wire stack for a config: replay serves fixtures, record wraps live
// transports and fills `record_store`, live retries transient failures.
std::shared_ptr<Transport> make_transport(
    const RunConfig& cfg, std::shared_ptr<FixtureStore>* record_store);

struct ScoreStageResult {
  std::size_t examples = 0;
  std::size_t cells = 0;
  std::vector<std::string> warnings;
};

// Stage 1: score every example with every configured scorer and write
// scores.jsonl. transport_override (used by tests) bypasses make_transport.
ScoreStageResult run_score(const RunConfig& cfg,
                           std::shared_ptr<Transport> transport_override = {});

// Stage 2: split, embed and group the examples, then fit one multicalibrated
// calibrator per scorer on the calibration fold. Writes memberships.json and
// calibrator_<scorer>.json. With no_calibration set, writes identity
// calibrators and global-only memberships without touching the backend.
void run_calibrate(const RunConfig& cfg,
                   std::shared_ptr<Transport> transport_override = {});

// Stage 3: apply the calibrators, fit the combined scorer, sweep the budget
// curve, and write metrics.csv, correlations.csv, budget_curve.csv,
// multiscore_model.json and report_meta.json. Pure file-to-file; never talks
// to a backend.
EvaluationReport run_evaluate(const RunConfig& cfg);

}  // namespace halluscore
