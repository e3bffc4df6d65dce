#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "halluscore/error.hpp"
#include "halluscore/evaluation.hpp"
#include "halluscore/pipeline.hpp"

namespace {

using halluscore::RunConfig;

// Flag values layered on top of the config file; empty/unset means the file
// (or default) wins.
struct Overrides {
  std::string config_path;
  std::string dataset;
  std::string out;
  std::string fixtures;
  std::string mode;
  std::string loss;
  std::vector<int> budgets;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool budgets_set = false;
  bool no_calibration = false;
};

void add_common_options(CLI::App* cmd, Overrides* o) {
  cmd->add_option("--config", o->config_path, "run configuration JSON file");
  cmd->add_option("--dataset", o->dataset, "dataset JSONL file");
  cmd->add_option("--out", o->out, "output directory");
  cmd->add_option("--seed", o->seed, "run seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--mode", o->mode, "backend mode")
      ->check(CLI::IsMember({"live", "record", "replay"}));
  cmd->add_option("--fixtures", o->fixtures, "fixtures JSONL file");
  cmd->add_option("--budgets", o->budgets, "budget sweep values")
      ->delimiter(',');
  cmd->add_option("--loss", o->loss, "subset selection loss")
      ->check(CLI::IsMember({"brier", "f1", "acc"}));
  cmd->add_flag("--no-calibration", o->no_calibration,
                "skip calibration, use raw scores");
}

RunConfig resolve_config(const Overrides& o, const CLI::App& cmd) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = RunConfig::from_json_file(o.config_path);
  if (!o.dataset.empty()) cfg.dataset_path = o.dataset;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.fixtures.empty()) cfg.fixtures_path = o.fixtures;
  if (!o.mode.empty()) cfg.mode = halluscore::parse_run_mode(o.mode);
  if (!o.loss.empty()) cfg.loss = halluscore::parse_loss_kind(o.loss);
  if (cmd.count("--seed") > 0) cfg.seed = o.seed;
  if (cmd.count("--budgets") > 0) cfg.budgets = o.budgets;
  if (cmd.count("--no-calibration") > 0) cfg.no_calibration = true;
  return cfg;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hallucination scoring, calibration and evaluation"};
  app.require_subcommand(1);

  Overrides score_opts;
  Overrides calibrate_opts;
  Overrides evaluate_opts;
  CLI::App* score_cmd =
      app.add_subcommand("score", "score every example with every scorer");
  CLI::App* calibrate_cmd = app.add_subcommand(
      "calibrate", "group examples and fit per-scorer calibrators");
  CLI::App* evaluate_cmd = app.add_subcommand(
      "evaluate", "apply calibrators, combine scorers, sweep budgets");
  add_common_options(score_cmd, &score_opts);
  add_common_options(calibrate_cmd, &calibrate_opts);
  add_common_options(evaluate_cmd, &evaluate_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (score_cmd->parsed()) {
      const RunConfig cfg = resolve_config(score_opts, *score_cmd);
      const auto result = halluscore::run_score(cfg);
      print_warnings(result.warnings);
      std::cout << "scored " << result.examples << " examples ("
                << result.cells << " cells) -> " << cfg.out_dir << "/"
                << halluscore::kScoresFile << "\n";
    } else if (calibrate_cmd->parsed()) {
      const RunConfig cfg = resolve_config(calibrate_opts, *calibrate_cmd);
      halluscore::run_calibrate(cfg);
      std::cout << "calibrated " << cfg.scorers.size() << " scorers -> "
                << cfg.out_dir << "\n";
    } else {
      const RunConfig cfg = resolve_config(evaluate_opts, *evaluate_cmd);
      const auto report = halluscore::run_evaluate(cfg);
      std::cout << "evaluated " << report.rows.size() << " scorers ("
                << report.budget_rows.size() << " budget points) -> "
                << cfg.out_dir << "\n";
    }
  } catch (const halluscore::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(halluscore::error_class(e.code()));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(halluscore::ErrorClass::Internal);
  }
  return 0;
}
