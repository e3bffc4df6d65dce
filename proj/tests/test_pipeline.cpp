#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "halluscore/backend.hpp"
#include "halluscore/dataset.hpp"
#include "halluscore/error.hpp"
#include "halluscore/pipeline.hpp"
#include "halluscore/rng.hpp"

#include "support/sim_backend.hpp"

using namespace halluscore;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "halluscore_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Mini population in the simulated backend's text encoding: latent
// correctness u, cluster c, label drawn from u.
Dataset sim_dataset(int n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.name = "mini";
  for (int i = 0; i < n; ++i) {
    char latents[48];
    std::snprintf(latents, sizeof latents, "%d u=%.6f c=%d", i,
                  rng.uniform(0.05, 0.95), i % 3);
    Example ex;
    ex.id = "ex" + std::to_string(i);
    ex.input = std::string("q=") + latents;
    ex.response = std::string("a=") + latents;
    ex.label = rng.bernoulli(0.5);
    d.examples.push_back(std::move(ex));
  }
  return d;
}

RunConfig mini_config(const fs::path& dir) {
  RunConfig cfg;
  cfg.dataset_path = (dir / "dataset.jsonl").string();
  cfg.out_dir = (dir / "out").string();
  cfg.fixtures_path = (dir / "fixtures.jsonl").string();
  cfg.seed = 5;
  cfg.scorers = {parse_scorer_kind("p_true"), parse_scorer_kind("nli_direct")};
  cfg.endpoints.chat_base_url = "http://sim";
  cfg.endpoints.nli_base_url = "http://sim";
  cfg.endpoints.embedding_base_url = "http://sim";
  cfg.endpoints.chat_model = "sim-chat";
  cfg.endpoints.embedding_model = "sim-embed";
  cfg.grouping.reducer_dim = 2;
  cfg.grouping.max_components = 4;
  cfg.budgets = {1, 2};
  return cfg;
}

ScoreRecord record_of(const std::string& id, const std::string& scorer,
                      double value) {
  ScoreRecord r;
  r.example_id = id;
  r.scorer = parse_scorer_kind(scorer);
  r.value = value;
  r.llm_calls = 1;
  return r;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("run mode names round-trip") {
  for (const RunMode mode : {RunMode::Live, RunMode::Record, RunMode::Replay}) {
    CHECK(parse_run_mode(to_string(mode)) == mode);
  }
  CHECK_THROWS_AS(parse_run_mode("offline"), Error);
}

TEST_CASE("config files parse every supported key") {
  const fs::path dir = fresh_dir("config_full");
  write_file(dir / "config.json", R"({
    "dataset": "data.jsonl",
    "out": "results",
    "seed": 99,
    "mode": "record",
    "fixtures": "fx.jsonl",
    "scorers": ["p_true", "selfcheck_nli_k4"],
    "backends": {
      "chat_base_url": "http://chat:8000",
      "nli_base_url": "http://nli:8001",
      "embedding_base_url": "http://embed:8002",
      "chat_model": "m-chat",
      "embedding_model": "m-embed"
    },
    "generation_temperature": 0.7,
    "calibration": {"bins": 7, "alpha": 0.05, "min_cell": 9, "max_iters": 50},
    "grouping": {"reducer_dim": 3, "responsibility_threshold": 0.4,
                 "max_components": 5, "em_max_iters": 80, "em_tol": 1e-5,
                 "covariance_reg": 1e-4},
    "calib_fraction": 0.75,
    "l2_lambda": 0.01,
    "logit_epsilon": 1e-5,
    "budgets": [2, 4],
    "loss": "f1",
    "cost_sharing": "shared_generations",
    "no_calibration": true
  })");
  const RunConfig cfg = RunConfig::from_json_file((dir / "config.json").string());
  CHECK(cfg.dataset_path == "data.jsonl");
  CHECK(cfg.out_dir == "results");
  CHECK(cfg.seed == 99);
  CHECK(cfg.mode == RunMode::Record);
  CHECK(cfg.fixtures_path == "fx.jsonl");
  REQUIRE(cfg.scorers.size() == 2);
  CHECK(cfg.scorers[1].k == 4);
  CHECK(cfg.endpoints.chat_base_url == "http://chat:8000");
  CHECK(cfg.endpoints.embedding_model == "m-embed");
  CHECK(cfg.generation_temperature == doctest::Approx(0.7));
  CHECK(cfg.calibration.bins == 7);
  CHECK(cfg.calibration.alpha == doctest::Approx(0.05));
  CHECK(cfg.calibration.min_cell == 9);
  CHECK(cfg.calibration.max_iters == 50);
  CHECK(cfg.grouping.reducer_dim == 3);
  CHECK(cfg.grouping.responsibility_threshold == doctest::Approx(0.4));
  CHECK(cfg.grouping.max_components == 5);
  CHECK(cfg.calib_fraction == doctest::Approx(0.75));
  CHECK(cfg.l2_lambda == doctest::Approx(0.01));
  CHECK(cfg.logit_epsilon == doctest::Approx(1e-5));
  CHECK(cfg.budgets == std::vector<int>{2, 4});
  CHECK(cfg.loss == LossKind::NegF1AtMedian);
  CHECK(cfg.cost_sharing == CostModel::Sharing::SharedGenerations);
  CHECK(cfg.no_calibration);
}

TEST_CASE("config parsing rejects unknown and malformed keys") {
  const fs::path dir = fresh_dir("config_bad");

  write_file(dir / "misspelled.json", R"({"datasett": "x"})");
  CHECK_THROWS_WITH_AS(
      RunConfig::from_json_file((dir / "misspelled.json").string()),
      doctest::Contains("datasett"), Error);

  write_file(dir / "nested.json", R"({"calibration": {"binz": 3}})");
  CHECK_THROWS_WITH_AS(RunConfig::from_json_file((dir / "nested.json").string()),
                       doctest::Contains("calibration.binz"), Error);

  write_file(dir / "mode.json", R"({"mode": "cached"})");
  CHECK_THROWS_AS(RunConfig::from_json_file((dir / "mode.json").string()), Error);

  write_file(dir / "sharing.json", R"({"cost_sharing": "pooled"})");
  CHECK_THROWS_AS(RunConfig::from_json_file((dir / "sharing.json").string()),
                  Error);

  write_file(dir / "array.json", R"([1, 2])");
  CHECK_THROWS_AS(RunConfig::from_json_file((dir / "array.json").string()),
                  Error);

  write_file(dir / "types.json", R"({"seed": "seven"})");
  CHECK_THROWS_AS(RunConfig::from_json_file((dir / "types.json").string()),
                  Error);
}

TEST_CASE("config validation rejects inconsistent run descriptions") {
  const fs::path dir = fresh_dir("config_validate");
  const RunConfig good = mini_config(dir);
  CHECK_NOTHROW(good.validate());

  RunConfig cfg = good;
  cfg.dataset_path.clear();
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = good;
  cfg.out_dir.clear();
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = good;
  cfg.scorers.clear();
  try {
    cfg.validate();
    FAIL("expected NoScorers");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoScorers);
  }

  cfg = good;
  cfg.scorers.push_back(cfg.scorers.front());
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("duplicate"), Error);

  cfg = good;
  cfg.scorers.push_back(ScorerKind{ScorerBase::SelfCheckNli, 1});
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = good;
  cfg.calib_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = good;
  cfg.logit_epsilon = 0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = good;
  cfg.l2_lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = good;
  cfg.generation_temperature = -0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = good;
  cfg.budgets = {1, 0};
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = good;
  cfg.fixtures_path.clear();
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = good;
  cfg.mode = RunMode::Record;
  cfg.endpoints.nli_base_url.clear();
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("scores jsonl round-trips records") {
  const fs::path dir = fresh_dir("scores_io");
  std::vector<ScoreRecord> records;
  records.push_back(record_of("a", "p_true", 0.25));
  records.push_back(record_of("b", "selfcheck_nli_k3", 1.0));
  records.back().nli_calls = 3;
  records.back().llm_calls = 3;
  records.back().raw = R"({"contradictions":[0.1,0.2,0.3]})";

  const std::string path = (dir / "scores.jsonl").string();
  write_scores_jsonl(path, records);
  const auto loaded = read_scores_jsonl(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].example_id == "a");
  CHECK(loaded[0].scorer == parse_scorer_kind("p_true"));
  CHECK(loaded[0].value == 0.25);
  CHECK(loaded[0].llm_calls == 1);
  CHECK(loaded[1].scorer.k == 3);
  CHECK(loaded[1].nli_calls == 3);
  CHECK(loaded[1].raw == R"({"contradictions":[0.1,0.2,0.3]})");

  write_file(dir / "bad.jsonl", "{\"example_id\":\"a\"}\nnot json\n");
  try {
    read_scores_jsonl((dir / "bad.jsonl").string());
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
  }

  CHECK_THROWS_AS(read_scores_jsonl((dir / "absent.jsonl").string()), Error);
}

TEST_CASE("matrix assembly places records and flags bad ones") {
  const std::vector<ScorerKind> scorers = {parse_scorer_kind("p_true"),
                                           parse_scorer_kind("nli_direct")};
  const std::vector<std::string> ids = {"a", "b"};

  std::vector<ScoreRecord> records;
  records.push_back(record_of("a", "p_true", 0.1));
  records.push_back(record_of("b", "nli_direct", 0.9));
  const ScoreMatrix m = matrix_from_records(scorers, ids, records);
  CHECK(m.at(0, 0) == 0.1);
  CHECK(m.at(1, 1) == 0.9);
  CHECK(m.has(0, 0));
  CHECK_FALSE(m.has(0, 1));
  CHECK_FALSE(m.has(1, 0));

  auto with = [&](const ScoreRecord& extra) {
    auto copy = records;
    copy.push_back(extra);
    return copy;
  };
  try {
    matrix_from_records(scorers, ids, with(record_of("a", "p_true", 0.2)));
    FAIL("expected DuplicateId");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateId);
  }
  CHECK_THROWS_AS(
      matrix_from_records(scorers, ids, with(record_of("c", "p_true", 0.2))),
      Error);
  CHECK_THROWS_AS(
      matrix_from_records(scorers, ids, with(record_of("a", "verbalized", 0.2))),
      Error);
  CHECK_THROWS_AS(
      matrix_from_records(scorers, ids, with(record_of("b", "p_true", 1.5))),
      Error);
}

TEST_CASE("calibrator file names follow the scorer name") {
  CHECK(calibrator_file_name(parse_scorer_kind("p_true")) ==
        "calibrator_p_true.json");
  CHECK(calibrator_file_name(parse_scorer_kind("selfcheck_nli_k3")) ==
        "calibrator_selfcheck_nli_k3.json");
}

TEST_CASE("record then replay runs the full pipeline deterministically") {
  const fs::path dir = fresh_dir("e2e");
  save_dataset(sim_dataset(40, 77), (dir / "dataset.jsonl").string());

  RunConfig record = mini_config(dir);
  record.mode = RunMode::Record;
  auto sim = std::make_shared<testsupport::SimTransport>();

  const ScoreStageResult stage = run_score(record, sim);
  CHECK(stage.examples == 40);
  CHECK(stage.cells == 80);
  CHECK(stage.warnings.empty());
  run_calibrate(record, sim);
  const EvaluationReport report = run_evaluate(record);

  // Per-scorer rows plus the combined scorer.
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].name == "p_true");
  CHECK(report.rows[1].name == "nli_direct");
  CHECK(report.rows[2].name == "multi_score");
  for (const auto& row : report.rows) {
    CHECK(row.brier >= 0.0);
    CHECK(row.brier <= 1.0);
  }
  CHECK(report.budget_rows.size() == 2);

  // Replay from fixtures alone, into a second directory, byte for byte.
  RunConfig replay = mini_config(dir);
  replay.out_dir = (dir / "out_replay").string();
  run_score(replay);
  run_calibrate(replay);
  run_evaluate(replay);
  for (const char* name :
       {kScoresFile, kMembershipsFile, kMetricsFile, kCorrelationsFile,
        kBudgetCurveFile, kMultiscoreModelFile, kReportMetaFile}) {
    CHECK(read_file(dir / "out" / name) == read_file(dir / "out_replay" / name));
  }
  for (const auto& kind : replay.scorers) {
    const std::string name = calibrator_file_name(kind);
    CHECK(read_file(dir / "out" / name) == read_file(dir / "out_replay" / name));
  }

  const nlohmann::json meta =
      nlohmann::json::parse(read_file(dir / "out" / kReportMetaFile));
  CHECK(meta.at("version") == 1);
  CHECK(meta.at("n") == 40);
  CHECK(meta.at("seed") == 5);
  CHECK(meta.at("scorers").size() == 2);
  CHECK_FALSE(meta.at("no_calibration").get<bool>());
}

TEST_CASE("a missing fixture skips the cell and surfaces a warning") {
  const fs::path dir = fresh_dir("fixture_miss");
  const Dataset data = sim_dataset(40, 78);
  save_dataset(data, (dir / "dataset.jsonl").string());

  RunConfig record = mini_config(dir);
  record.mode = RunMode::Record;
  auto sim = std::make_shared<testsupport::SimTransport>();
  run_score(record, sim);

  // Drop exactly the nli_direct fixture of ex0, found by its digest.
  nlohmann::json body;
  body["premise"] = data.examples[0].input;
  body["hypothesis"] = data.examples[0].response;
  const std::string digest =
      request_digest(BackendClient::kNliEndpoint, body.dump());
  std::istringstream all(read_file(dir / "fixtures.jsonl"));
  std::ostringstream kept;
  std::string line;
  std::size_t dropped = 0;
  while (std::getline(all, line)) {
    if (line.find(digest) != std::string::npos) {
      ++dropped;
      continue;
    }
    kept << line << "\n";
  }
  REQUIRE(dropped == 1);
  write_file(dir / "fixtures.jsonl", kept.str());

  RunConfig replay = mini_config(dir);
  replay.out_dir = (dir / "out_miss").string();
  const ScoreStageResult stage = run_score(replay);
  CHECK(stage.examples == 40);
  CHECK(stage.cells == 79);
  REQUIRE(stage.warnings.size() == 1);
  CHECK(stage.warnings[0].find("ex0") != std::string::npos);
  CHECK(stage.warnings[0].find("nli_direct") != std::string::npos);

  const auto records = read_scores_jsonl((dir / "out_miss" / kScoresFile).string());
  CHECK(records.size() == 79);
}

TEST_CASE("evaluation demands a membership for every scored example") {
  const fs::path dir = fresh_dir("membership_gap");
  save_dataset(sim_dataset(40, 79), (dir / "dataset.jsonl").string());

  RunConfig record = mini_config(dir);
  record.mode = RunMode::Record;
  auto sim = std::make_shared<testsupport::SimTransport>();
  run_score(record, sim);
  run_calibrate(record, sim);

  nlohmann::json m = nlohmann::json::parse(
      read_file(fs::path(record.out_dir) / kMembershipsFile));
  m.erase("ex7");
  write_file(fs::path(record.out_dir) / kMembershipsFile, m.dump(2) + "\n");

  try {
    run_evaluate(record);
    FAIL("expected a missing-membership error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
    CHECK(e.detail().find("ex7") != std::string::npos);
  }
}

TEST_CASE("no-calibration mode runs without a backend") {
  const fs::path dir = fresh_dir("no_calibration");
  save_dataset(sim_dataset(40, 80), (dir / "dataset.jsonl").string());

  RunConfig cfg = mini_config(dir);
  cfg.mode = RunMode::Record;
  cfg.budgets.clear();
  auto sim = std::make_shared<testsupport::SimTransport>();
  run_score(cfg, sim);

  cfg.no_calibration = true;
  run_calibrate(cfg);  // no transport: must not touch one

  const nlohmann::json m = nlohmann::json::parse(
      read_file(fs::path(cfg.out_dir) / kMembershipsFile));
  for (const auto& [id, groups] : m.items()) {
    CHECK(groups == nlohmann::json::array({0}));
  }

  const EvaluationReport report = run_evaluate(cfg);
  CHECK(report.rows.size() == 3);
  CHECK(report.budget_rows.empty());
  const std::string curve = read_file(fs::path(cfg.out_dir) / kBudgetCurveFile);
  CHECK(curve ==
        "budget,selected,cost,validation_loss,test_brier,test_f1,test_accuracy\n");

  const nlohmann::json meta = nlohmann::json::parse(
      read_file(fs::path(cfg.out_dir) / kReportMetaFile));
  CHECK(meta.at("no_calibration").get<bool>());
  CHECK(meta.at("calibration").at("p_true").at("patches") == 0);
}

}  // TEST_SUITE
