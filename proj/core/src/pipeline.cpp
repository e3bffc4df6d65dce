#include "halluscore/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "halluscore/dataset.hpp"
#include "halluscore/error.hpp"
#include "halluscore/rng.hpp"
#include "halluscore/scorers.hpp"

namespace halluscore {
namespace {

// Seed streams for the independent random decisions of a run.
constexpr std::uint64_t kGroupingStream = 1;
constexpr std::uint64_t kMultiscoreStream = 2;
constexpr std::uint64_t kInnerSplitStream = 3;

void check_keys(const nlohmann::json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      raise(ErrorCode::InvalidConfig, "unknown config key: " + path + key);
    }
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out << content;
  if (!out) raise(ErrorCode::IoError, "write failed for " + path);
}

int label_of(const Example& ex) {
  if (!ex.label.has_value()) {
    raise(ErrorCode::MissingLabels, "example " + ex.id + " has no label");
  }
  return *ex.label;
}

std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  return std::filesystem::path(cfg.out_dir) / name;
}

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) {
    raise(ErrorCode::IoError, "cannot create " + cfg.out_dir + ": " + ec.message());
  }
}

void check_no_leakage(const std::vector<std::string>& fit_ids,
                      const std::unordered_set<std::string>& test_ids,
                      const std::string& what) {
  for (const auto& id : fit_ids) {
    if (test_ids.count(id)) {
      raise(ErrorCode::FoldLeakage,
            what + " was fitted on test example " + id);
    }
  }
}

std::unordered_map<std::string, std::vector<int>> read_memberships(
    const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(slurp(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    raise(ErrorCode::ParseError, "invalid memberships JSON in " + path);
  }
  std::unordered_map<std::string, std::vector<int>> out;
  for (const auto& [id, groups] : j.items()) {
    if (!groups.is_array()) {
      raise(ErrorCode::ParseError, "memberships for " + id + " must be an array");
    }
    std::vector<int> g;
    for (const auto& v : groups) {
      if (!v.is_number_integer()) {
        raise(ErrorCode::ParseError, "memberships for " + id + " must be integers");
      }
      g.push_back(v.get<int>());
    }
    out.emplace(id, std::move(g));
  }
  return out;
}

void write_memberships(const std::string& path,
                       const std::vector<std::string>& ids,
                       const std::vector<std::vector<int>>& memberships) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < ids.size(); ++i) j[ids[i]] = memberships[i];
  spill(path, j.dump(2) + "\n");
}

struct ColumnView {
  std::vector<std::size_t> rows;
  std::vector<double> values;
};

ColumnView present_column(const ScoreMatrix& m, std::size_t col) {
  ColumnView v;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.has(r, col)) {
      v.rows.push_back(r);
      v.values.push_back(m.at(r, col));
    }
  }
  return v;
}

}  // namespace

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Live: return "live";
    case RunMode::Record: return "record";
    case RunMode::Replay: return "replay";
  }
  raise(ErrorCode::Internal, "unknown run mode");
}

RunMode parse_run_mode(const std::string& name) {
  if (name == "live") return RunMode::Live;
  if (name == "record") return RunMode::Record;
  if (name == "replay") return RunMode::Replay;
  raise(ErrorCode::InvalidConfig, "mode must be live, record or replay, got " + name);
}

std::string calibrator_file_name(const ScorerKind& kind) {
  return "calibrator_" + to_string(kind) + ".json";
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(slurp(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    raise(ErrorCode::InvalidConfig, "config is not a JSON object: " + path);
  }
  check_keys(j, "",
             {"dataset", "out", "seed", "mode", "fixtures", "scorers", "backends",
              "generation_temperature", "calibration", "grouping",
              "calib_fraction", "l2_lambda", "logit_epsilon", "budgets", "loss",
              "cost_sharing", "no_calibration"});
  RunConfig cfg;
  try {
    if (j.contains("dataset")) cfg.dataset_path = j["dataset"].get<std::string>();
    if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("mode")) cfg.mode = parse_run_mode(j["mode"].get<std::string>());
    if (j.contains("fixtures")) cfg.fixtures_path = j["fixtures"].get<std::string>();
    if (j.contains("scorers")) {
      for (const auto& s : j["scorers"]) {
        cfg.scorers.push_back(parse_scorer_kind(s.get<std::string>()));
      }
    }
    if (j.contains("backends")) {
      const auto& b = j["backends"];
      check_keys(b, "backends.",
                 {"chat_base_url", "nli_base_url", "embedding_base_url",
                  "chat_model", "embedding_model"});
      if (b.contains("chat_base_url")) {
        cfg.endpoints.chat_base_url = b["chat_base_url"].get<std::string>();
      }
      if (b.contains("nli_base_url")) {
        cfg.endpoints.nli_base_url = b["nli_base_url"].get<std::string>();
      }
      if (b.contains("embedding_base_url")) {
        cfg.endpoints.embedding_base_url = b["embedding_base_url"].get<std::string>();
      }
      if (b.contains("chat_model")) {
        cfg.endpoints.chat_model = b["chat_model"].get<std::string>();
      }
      if (b.contains("embedding_model")) {
        cfg.endpoints.embedding_model = b["embedding_model"].get<std::string>();
      }
    }
    if (j.contains("generation_temperature")) {
      cfg.generation_temperature = j["generation_temperature"].get<double>();
    }
    if (j.contains("calibration")) {
      const auto& c = j["calibration"];
      check_keys(c, "calibration.", {"bins", "alpha", "min_cell", "max_iters"});
      if (c.contains("bins")) cfg.calibration.bins = c["bins"].get<int>();
      if (c.contains("alpha")) cfg.calibration.alpha = c["alpha"].get<double>();
      if (c.contains("min_cell")) cfg.calibration.min_cell = c["min_cell"].get<int>();
      if (c.contains("max_iters")) {
        cfg.calibration.max_iters = c["max_iters"].get<int>();
      }
    }
    if (j.contains("grouping")) {
      const auto& g = j["grouping"];
      check_keys(g, "grouping.",
                 {"reducer_dim", "responsibility_threshold", "max_components",
                  "em_max_iters", "em_tol", "covariance_reg"});
      if (g.contains("reducer_dim")) {
        cfg.grouping.reducer_dim = g["reducer_dim"].get<int>();
      }
      if (g.contains("responsibility_threshold")) {
        cfg.grouping.responsibility_threshold =
            g["responsibility_threshold"].get<double>();
      }
      if (g.contains("max_components")) {
        cfg.grouping.max_components = g["max_components"].get<int>();
      }
      if (g.contains("em_max_iters")) {
        cfg.grouping.em_max_iters = g["em_max_iters"].get<int>();
      }
      if (g.contains("em_tol")) cfg.grouping.em_tol = g["em_tol"].get<double>();
      if (g.contains("covariance_reg")) {
        cfg.grouping.covariance_reg = g["covariance_reg"].get<double>();
      }
    }
    if (j.contains("calib_fraction")) {
      cfg.calib_fraction = j["calib_fraction"].get<double>();
    }
    if (j.contains("l2_lambda")) cfg.l2_lambda = j["l2_lambda"].get<double>();
    if (j.contains("logit_epsilon")) {
      cfg.logit_epsilon = j["logit_epsilon"].get<double>();
    }
    if (j.contains("budgets")) {
      for (const auto& b : j["budgets"]) cfg.budgets.push_back(b.get<int>());
    }
    if (j.contains("loss")) cfg.loss = parse_loss_kind(j["loss"].get<std::string>());
    if (j.contains("cost_sharing")) {
      const std::string s = j["cost_sharing"].get<std::string>();
      if (s == "additive") {
        cfg.cost_sharing = CostModel::Sharing::Additive;
      } else if (s == "shared_generations") {
        cfg.cost_sharing = CostModel::Sharing::SharedGenerations;
      } else {
        raise(ErrorCode::InvalidConfig,
              "cost_sharing must be additive or shared_generations, got " + s);
      }
    }
    if (j.contains("no_calibration")) {
      cfg.no_calibration = j["no_calibration"].get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::InvalidConfig, std::string("config ") + path + ": " + e.what());
  }
  return cfg;
}

void RunConfig::validate() const {
  if (dataset_path.empty()) raise(ErrorCode::InvalidConfig, "dataset path is required");
  if (out_dir.empty()) raise(ErrorCode::InvalidConfig, "out directory is required");
  if (scorers.empty()) raise(ErrorCode::NoScorers, "at least one scorer is required");
  std::set<ScorerKind> seen;
  for (const auto& kind : scorers) {
    if (!seen.insert(kind).second) {
      raise(ErrorCode::InvalidConfig, "duplicate scorer: " + to_string(kind));
    }
    if (kind.is_multi_generation() && kind.k < 2) {
      raise(ErrorCode::InvalidConfig,
            to_string(kind) + ": sample count must be at least 2");
    }
  }
  if (!(calib_fraction > 0.0 && calib_fraction < 1.0)) {
    raise(ErrorCode::InvalidConfig, "calib_fraction must be in (0, 1)");
  }
  if (!(logit_epsilon > 0.0 && logit_epsilon < 0.1)) {
    raise(ErrorCode::InvalidConfig, "logit_epsilon must be in (0, 0.1)");
  }
  if (!(l2_lambda >= 0.0)) raise(ErrorCode::InvalidConfig, "l2_lambda must be >= 0");
  if (!(generation_temperature >= 0.0)) {
    raise(ErrorCode::InvalidConfig, "generation_temperature must be >= 0");
  }
  for (int b : budgets) {
    if (b < 1) raise(ErrorCode::InvalidConfig, "budgets must be >= 1");
  }
  if (mode != RunMode::Live && fixtures_path.empty()) {
    raise(ErrorCode::InvalidConfig,
          "fixtures path is required in record and replay modes");
  }
  if (mode != RunMode::Replay) {
    if (endpoints.chat_base_url.empty() || endpoints.nli_base_url.empty() ||
        endpoints.embedding_base_url.empty()) {
      raise(ErrorCode::InvalidConfig,
            "live and record modes need chat, NLI and embedding base URLs");
    }
  }
  if (calibration.bins < 1) raise(ErrorCode::InvalidConfig, "bins must be >= 1");
  if (!(calibration.alpha >= 0.0)) {
    raise(ErrorCode::InvalidConfig, "alpha must be >= 0");
  }
  if (calibration.min_cell < 1) {
    raise(ErrorCode::InvalidConfig, "min_cell must be >= 1");
  }
  if (calibration.max_iters < 0) {
    raise(ErrorCode::InvalidConfig, "max_iters must be >= 0");
  }
  if (grouping.reducer_dim < 1) {
    raise(ErrorCode::InvalidConfig, "reducer_dim must be >= 1");
  }
  if (!(grouping.responsibility_threshold > 0.0 &&
        grouping.responsibility_threshold <= 1.0)) {
    raise(ErrorCode::InvalidConfig, "responsibility_threshold must be in (0, 1]");
  }
  if (grouping.max_components < 1) {
    raise(ErrorCode::InvalidConfig, "max_components must be >= 1");
  }
  if (grouping.em_max_iters < 1) {
    raise(ErrorCode::InvalidConfig, "em_max_iters must be >= 1");
  }
  if (!(grouping.em_tol > 0.0)) raise(ErrorCode::InvalidConfig, "em_tol must be > 0");
  if (!(grouping.covariance_reg >= 0.0)) {
    raise(ErrorCode::InvalidConfig, "covariance_reg must be >= 0");
  }
}

void write_scores_jsonl(const std::string& path,
                        const std::vector<ScoreRecord>& records) {
  std::ostringstream out;
  for (const ScoreRecord& r : records) {
    nlohmann::json j;
    j["example_id"] = r.example_id;
    j["scorer"] = to_string(r.scorer);
    j["value"] = r.value;
    j["llm_calls"] = r.llm_calls;
    j["nli_calls"] = r.nli_calls;
    j["raw"] = r.raw;
    out << j.dump() << "\n";
  }
  spill(path, out.str());
}

std::vector<ScoreRecord> read_scores_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  std::vector<ScoreRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      raise(ErrorCode::ParseError,
            path + " line " + std::to_string(line_no) + ": invalid JSON");
    }
    try {
      ScoreRecord r;
      r.example_id = j.at("example_id").get<std::string>();
      r.scorer = parse_scorer_kind(j.at("scorer").get<std::string>());
      r.value = j.at("value").get<double>();
      r.llm_calls = j.at("llm_calls").get<int>();
      r.nli_calls = j.at("nli_calls").get<int>();
      r.raw = j.value("raw", std::string());
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::ParseError,
            path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

ScoreMatrix matrix_from_records(const std::vector<ScorerKind>& scorers,
                                const std::vector<std::string>& ids,
                                const std::vector<ScoreRecord>& records) {
  ScoreMatrix m = ScoreMatrix::create(ids, scorers);
  for (const ScoreRecord& r : records) {
    const std::size_t row = m.row_of(r.example_id);
    const std::size_t col = m.col_of(r.scorer);
    if (!std::isfinite(r.value) || r.value < 0.0 || r.value > 1.0) {
      raise(ErrorCode::InvalidArgument,
            "score for " + r.example_id + "/" + to_string(r.scorer) +
                " outside [0, 1]");
    }
    if (m.has(row, col)) {
      raise(ErrorCode::DuplicateId,
            "duplicate score for " + r.example_id + "/" + to_string(r.scorer));
    }
    m.set(row, col, r.value);
  }
  return m;
}

std::shared_ptr<Transport> make_transport(
    const RunConfig& cfg, std::shared_ptr<FixtureStore>* record_store) {
  if (cfg.mode == RunMode::Replay) {
    auto store = std::make_shared<FixtureStore>(FixtureStore::load(cfg.fixtures_path));
    return std::make_shared<ReplayTransport>(store);
  }
  const char* token_env = std::getenv("HALLUSCORE_API_TOKEN");
  const std::string token =
      !cfg.endpoints.bearer_token.empty()
          ? cfg.endpoints.bearer_token
          : (token_env != nullptr ? std::string(token_env) : std::string());
  auto chat = std::make_shared<HttpTransport>(cfg.endpoints.chat_base_url, token);
  auto nli = std::make_shared<HttpTransport>(cfg.endpoints.nli_base_url, token);
  auto emb = std::make_shared<HttpTransport>(cfg.endpoints.embedding_base_url, token);
  auto router = std::make_shared<EndpointRouter>(chat, nli, emb);
  auto retrying = std::make_shared<RetryingTransport>(router, RetryPolicy{});
  if (cfg.mode == RunMode::Live) return retrying;
  auto store = std::make_shared<FixtureStore>();
  if (std::filesystem::exists(cfg.fixtures_path)) {
    *store = FixtureStore::load(cfg.fixtures_path);
  }
  if (record_store != nullptr) *record_store = store;
  return std::make_shared<RecordingTransport>(retrying, store);
}

namespace {

// Shared transport setup for the stages that talk to a backend. In record
// mode an override is still wrapped so the store gets filled.
std::shared_ptr<Transport> stage_transport(
    const RunConfig& cfg, std::shared_ptr<Transport> override_transport,
    std::shared_ptr<FixtureStore>* record_store) {
  if (override_transport) {
    if (cfg.mode == RunMode::Record) {
      auto store = std::make_shared<FixtureStore>();
      if (std::filesystem::exists(cfg.fixtures_path)) {
        *store = FixtureStore::load(cfg.fixtures_path);
      }
      *record_store = store;
      return std::make_shared<RecordingTransport>(override_transport, store);
    }
    return override_transport;
  }
  return make_transport(cfg, record_store);
}

BackendConfig backend_config(const RunConfig& cfg) {
  return BackendConfig{cfg.endpoints.chat_model, cfg.endpoints.embedding_model};
}

}  // namespace

ScoreStageResult run_score(const RunConfig& cfg,
                           std::shared_ptr<Transport> transport_override) {
  cfg.validate();
  const Dataset dataset = load_dataset(cfg.dataset_path);

  std::shared_ptr<FixtureStore> record_store;
  auto transport = stage_transport(cfg, std::move(transport_override), &record_store);
  BackendClient client(transport, backend_config(cfg));

  std::vector<ScorerParams> specs;
  specs.reserve(cfg.scorers.size());
  for (const ScorerKind& kind : cfg.scorers) {
    ScorerParams p;
    p.kind = kind;
    p.generation_temperature = cfg.generation_temperature;
    specs.push_back(p);
  }

  ScoreOutcome outcome = score_all(client, dataset, specs);

  ensure_out_dir(cfg);
  write_scores_jsonl(out_path(cfg, kScoresFile).string(), outcome.records);
  if (record_store) record_store->save(cfg.fixtures_path);

  ScoreStageResult result;
  result.examples = dataset.size();
  result.cells = outcome.records.size();
  result.warnings = std::move(outcome.warnings);
  return result;
}

void run_calibrate(const RunConfig& cfg,
                   std::shared_ptr<Transport> transport_override) {
  cfg.validate();
  const Dataset dataset = load_dataset(cfg.dataset_path);
  const SplitAssignment split = split_dataset(dataset, cfg.calib_fraction, cfg.seed);

  std::vector<std::string> all_ids;
  all_ids.reserve(dataset.size());
  for (const Example& ex : dataset.examples) all_ids.push_back(ex.id);

  const auto records = read_scores_jsonl(out_path(cfg, kScoresFile).string());
  const ScoreMatrix matrix = matrix_from_records(cfg.scorers, all_ids, records);

  ensure_out_dir(cfg);

  std::vector<std::vector<int>> memberships;
  std::optional<GroupingModel> grouping_model;
  std::shared_ptr<FixtureStore> record_store;
  if (cfg.no_calibration) {
    memberships.assign(all_ids.size(), std::vector<int>{0});
  } else {
    auto transport =
        stage_transport(cfg, std::move(transport_override), &record_store);
    BackendClient client(transport, backend_config(cfg));
    std::vector<std::vector<double>> embeddings;
    embeddings.reserve(dataset.size());
    for (const Example& ex : dataset.examples) {
      EmbeddingVector input_e = client.embed(ex.input);
      EmbeddingVector response_e = client.embed(ex.response);
      std::vector<double> joint = std::move(input_e.values);
      joint.insert(joint.end(), response_e.values.begin(), response_e.values.end());
      embeddings.push_back(std::move(joint));
    }
    GroupingConfig gcfg = cfg.grouping;
    gcfg.seed = mix_seed(cfg.seed, kGroupingStream);
    GroupingResult grouped = build_groups(all_ids, embeddings, split, gcfg);
    memberships = memberships_for(grouped.groups, all_ids);
    grouping_model = std::move(grouped.model);
  }
  write_memberships(out_path(cfg, kMembershipsFile).string(), all_ids, memberships);

  std::unordered_map<std::string, std::size_t> row_index;
  for (std::size_t i = 0; i < all_ids.size(); ++i) row_index[all_ids[i]] = i;

  for (std::size_t c = 0; c < cfg.scorers.size(); ++c) {
    Calibrator calibrator;
    if (cfg.no_calibration) {
      calibrator = identity_calibrator(cfg.calibration.bins);
    } else {
      std::vector<double> values;
      std::vector<int> labels;
      std::vector<std::vector<int>> cell_memberships;
      for (const std::string& id : split.calibration_ids) {
        const std::size_t row = row_index.at(id);
        if (!matrix.has(row, c)) continue;
        values.push_back(matrix.at(row, c));
        labels.push_back(label_of(*dataset.find(id)));
        cell_memberships.push_back(memberships[row]);
      }
      try {
        calibrator =
            multicalibrate(values, labels, cell_memberships, cfg.calibration);
      } catch (const Error& e) {
        raise(e.code(), to_string(cfg.scorers[c]) + ": " + e.detail());
      }
      calibrator.grouping = grouping_model;
    }
    spill(out_path(cfg, calibrator_file_name(cfg.scorers[c])).string(),
          calibrator_to_json(calibrator) + "\n");
  }

  if (record_store) record_store->save(cfg.fixtures_path);
}

EvaluationReport run_evaluate(const RunConfig& cfg) {
  cfg.validate();
  const Dataset dataset = load_dataset(cfg.dataset_path);
  const SplitAssignment split = split_dataset(dataset, cfg.calib_fraction, cfg.seed);

  std::vector<std::string> all_ids;
  all_ids.reserve(dataset.size());
  for (const Example& ex : dataset.examples) all_ids.push_back(ex.id);

  const auto records = read_scores_jsonl(out_path(cfg, kScoresFile).string());
  const ScoreMatrix matrix = matrix_from_records(cfg.scorers, all_ids, records);

  const auto membership_map =
      read_memberships(out_path(cfg, kMembershipsFile).string());
  std::vector<std::vector<int>> memberships(all_ids.size());
  for (std::size_t i = 0; i < all_ids.size(); ++i) {
    auto it = membership_map.find(all_ids[i]);
    if (it == membership_map.end()) {
      raise(ErrorCode::InvalidArgument,
            "no recorded group membership for " + all_ids[i]);
    }
    memberships[i] = it->second;
  }

  std::unordered_map<std::string, std::size_t> row_index;
  for (std::size_t i = 0; i < all_ids.size(); ++i) row_index[all_ids[i]] = i;
  const std::unordered_set<std::string> test_ids(split.test_ids.begin(),
                                                 split.test_ids.end());

  // Apply each scorer's calibrator to its present cells.
  ScoreMatrix calibrated = ScoreMatrix::create(all_ids, cfg.scorers);
  std::vector<std::size_t> patch_counts(cfg.scorers.size(), 0);
  std::vector<bool> iteration_limit_flags(cfg.scorers.size(), false);
  for (std::size_t c = 0; c < cfg.scorers.size(); ++c) {
    const Calibrator calibrator = calibrator_from_json(
        slurp(out_path(cfg, calibrator_file_name(cfg.scorers[c])).string()));
    patch_counts[c] = calibrator.patches.size();
    iteration_limit_flags[c] = calibrator.hit_iteration_limit;
    const ColumnView view = present_column(matrix, c);
    std::vector<std::vector<int>> view_memberships;
    view_memberships.reserve(view.rows.size());
    for (std::size_t r : view.rows) view_memberships.push_back(memberships[r]);
    const std::vector<double> out =
        apply_calibrator(calibrator, view.values, view_memberships);
    for (std::size_t k = 0; k < view.rows.size(); ++k) {
      calibrated.set(view.rows[k], c, out[k]);
    }
  }

  EvaluationReport report;
  report.split_id = split_id(dataset, split, cfg.calib_fraction);

  const auto labels_for = [&](const std::vector<std::string>& ids) {
    std::vector<int> y;
    y.reserve(ids.size());
    for (const auto& id : ids) y.push_back(label_of(*dataset.find(id)));
    return y;
  };

  // Per-scorer rows: threshold from the calibration fold, metrics on the test
  // fold, each over that scorer's present cells.
  const CostModel cost_model = CostModel::standard(cfg.scorers, cfg.cost_sharing);
  for (std::size_t c = 0; c < cfg.scorers.size(); ++c) {
    const std::string name = to_string(cfg.scorers[c]);
    std::vector<double> cal_values;
    std::vector<double> test_values;
    std::vector<int> test_labels;
    for (std::size_t r = 0; r < calibrated.rows(); ++r) {
      if (!calibrated.has(r, c)) continue;
      const std::string& id = all_ids[r];
      if (test_ids.count(id)) {
        test_values.push_back(calibrated.at(r, c));
        test_labels.push_back(label_of(*dataset.find(id)));
      } else if (split.in_calibration(id)) {
        cal_values.push_back(calibrated.at(r, c));
      }
    }
    double threshold = 0.0;
    try {
      threshold = threshold_at_percentile(cal_values, 50.0);
    } catch (const Error& e) {
      raise(e.code(), name + ": " + e.detail());
    }
    std::vector<int> preds;
    preds.reserve(test_values.size());
    for (double v : test_values) preds.push_back(v >= threshold ? 1 : 0);
    ReportRow row;
    row.name = name;
    try {
      row.brier = brier(test_values, test_labels);
    } catch (const Error& e) {
      raise(e.code(), name + ": " + e.detail());
    }
    const F1Accuracy fa = f1_accuracy(preds, test_labels);
    row.f1 = fa.f1;
    row.accuracy = fa.accuracy;
    const ScorerCost sc = standard_cost(cfg.scorers[c]);
    row.cost = sc.llm_calls + sc.nli_calls;
    report.rows.push_back(row);
    report.thresholds[name] = threshold;
  }

  // Combined scorer over all columns.
  const FeatureMatrix X_cal =
      build_features(calibrated, split.calibration_ids, cfg.logit_epsilon);
  const FeatureMatrix X_test =
      build_features(calibrated, split.test_ids, cfg.logit_epsilon);
  const std::vector<int> y_cal = labels_for(split.calibration_ids);
  const std::vector<int> y_test = labels_for(split.test_ids);

  const LogisticModel multiscore = fit_logistic_regression(
      X_cal, y_cal, cfg.l2_lambda, mix_seed(cfg.seed, kMultiscoreStream));
  check_no_leakage(multiscore.fit_ids, test_ids, "combined scorer");
  const std::vector<double> cal_preds = predict_multiscore(multiscore, X_cal);
  const std::vector<double> test_preds = predict_multiscore(multiscore, X_test);
  const double ms_threshold = threshold_at_percentile(cal_preds, 50.0);
  std::vector<int> ms_cls;
  ms_cls.reserve(test_preds.size());
  for (double v : test_preds) ms_cls.push_back(v >= ms_threshold ? 1 : 0);
  ReportRow ms_row;
  ms_row.name = "multi_score";
  ms_row.brier = brier(test_preds, y_test);
  const F1Accuracy ms_fa = f1_accuracy(ms_cls, y_test);
  ms_row.f1 = ms_fa.f1;
  ms_row.accuracy = ms_fa.accuracy;
  ms_row.cost = subset_cost(cfg.scorers, cost_model);
  report.rows.push_back(ms_row);
  report.thresholds["multi_score"] = ms_threshold;

  // Rank correlations between calibrated scorers on the test fold, over rows
  // where both cells are present.
  const std::size_t n_sc = cfg.scorers.size();
  report.correlation_names.reserve(n_sc);
  for (const auto& kind : cfg.scorers) {
    report.correlation_names.push_back(to_string(kind));
  }
  report.correlation.assign(n_sc * n_sc, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t a = 0; a < n_sc; ++a) {
    for (std::size_t b = 0; b < n_sc; ++b) {
      std::vector<double> va;
      std::vector<double> vb;
      for (const std::string& id : split.test_ids) {
        const std::size_t r = row_index.at(id);
        if (!calibrated.has(r, a) || !calibrated.has(r, b)) continue;
        va.push_back(calibrated.at(r, a));
        vb.push_back(calibrated.at(r, b));
      }
      if (va.size() < 2) continue;
      try {
        report.correlation[a * n_sc + b] = spearman(va, vb);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ConstantInput) throw;
      }
    }
  }

  // Budget sweep on the calibration fold; selected models are judged on the
  // test fold.
  if (!cfg.budgets.empty()) {
    const auto selections =
        budget_curve(X_cal, y_cal, cost_model, cfg.budgets, cfg.loss,
                     mix_seed(cfg.seed, kInnerSplitStream));
    for (const SubsetSelection& sel : selections) {
      check_no_leakage(sel.model.fit_ids, test_ids,
                       "budget " + std::to_string(sel.budget) + " model");
      const FeatureMatrix Xc = X_cal.select_columns(sel.selected);
      const FeatureMatrix Xt = X_test.select_columns(sel.selected);
      const std::vector<double> pc = predict_multiscore(sel.model, Xc);
      const std::vector<double> pt = predict_multiscore(sel.model, Xt);
      const double thr = threshold_at_percentile(pc, 50.0);
      std::vector<int> cls;
      cls.reserve(pt.size());
      for (double v : pt) cls.push_back(v >= thr ? 1 : 0);
      BudgetRow row;
      row.budget = sel.budget;
      std::string joined;
      for (std::size_t i = 0; i < sel.selected.size(); ++i) {
        if (i > 0) joined += ";";
        joined += to_string(sel.selected[i]);
      }
      row.selected = joined;
      row.cost = sel.cost;
      row.validation_loss = sel.validation_loss;
      row.test_brier = brier(pt, y_test);
      const F1Accuracy bfa = f1_accuracy(cls, y_test);
      row.test_f1 = bfa.f1;
      row.test_accuracy = bfa.accuracy;
      report.budget_rows.push_back(row);
    }
  }

  ensure_out_dir(cfg);
  write_metrics_csv(report, out_path(cfg, kMetricsFile).string());
  write_correlation_csv(report, out_path(cfg, kCorrelationsFile).string());
  write_budget_curve_csv(report, out_path(cfg, kBudgetCurveFile).string());
  spill(out_path(cfg, kMultiscoreModelFile).string(),
        logistic_model_to_json(multiscore) + "\n");

  nlohmann::json meta;
  meta["version"] = 1;
  meta["dataset"] = dataset.name;
  meta["split_id"] = report.split_id;
  meta["seed"] = cfg.seed;
  meta["n"] = dataset.size();
  meta["n_calibration"] = split.calibration_ids.size();
  meta["n_test"] = split.test_ids.size();
  nlohmann::json scorer_names = nlohmann::json::array();
  for (const auto& kind : cfg.scorers) scorer_names.push_back(to_string(kind));
  meta["scorers"] = std::move(scorer_names);
  meta["loss"] = to_string(cfg.loss);
  meta["cost_sharing"] = cfg.cost_sharing == CostModel::Sharing::Additive
                             ? "additive"
                             : "shared_generations";
  meta["no_calibration"] = cfg.no_calibration;
  meta["budgets"] = cfg.budgets;
  nlohmann::json calibration_meta = nlohmann::json::object();
  for (std::size_t c = 0; c < cfg.scorers.size(); ++c) {
    nlohmann::json entry;
    entry["patches"] = patch_counts[c];
    entry["hit_iteration_limit"] = static_cast<bool>(iteration_limit_flags[c]);
    calibration_meta[to_string(cfg.scorers[c])] = std::move(entry);
  }
  meta["calibration"] = std::move(calibration_meta);
  nlohmann::json ms_meta;
  ms_meta["converged"] = multiscore.converged;
  ms_meta["iterations"] = multiscore.iterations;
  meta["multiscore"] = std::move(ms_meta);
  spill(out_path(cfg, kReportMetaFile).string(), meta.dump(2) + "\n");

  return report;
}

}  // namespace halluscore
