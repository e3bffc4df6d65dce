#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace halluscore {

// One scoring task: an input x, the candidate response z, an optional binary
// label y (1 = permissible, 0 = hallucination), and optional extra material.
struct Example {
  std::string id;
  std::string input;
  std::string response;
  std::optional<int> label;
  std::optional<std::string> reference_answer;
  std::vector<std::string> samples;
  // Unknown keys from the source record, value kept as raw JSON text.
  std::map<std::string, std::string> extras;
};

struct Dataset {
  std::string name;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  const Example* find(const std::string& id) const;
};

// Deterministic calibration/test split. Both id lists keep dataset order.
struct SplitAssignment {
  std::vector<std::string> calibration_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;

  bool in_calibration(const std::string& id) const;
  bool in_test(const std::string& id) const;
};

enum class ScorerBase {
  PTrue,
  PTrueVerbalized,
  PInputContradict,
  PSelfContradict,
  PFactContradict,
  InversePerplexity,
  NliDirect,
  SelfCheckNli,
  SimilarityDegree,
  HallucinationRail,
};

// A scorer identity. Multi-generation kinds carry the sample count K.
struct ScorerKind {
  ScorerBase base = ScorerBase::PTrue;
  int k = 0;

  bool is_multi_generation() const {
    return base == ScorerBase::SelfCheckNli ||
           base == ScorerBase::SimilarityDegree ||
           base == ScorerBase::HallucinationRail;
  }
  auto operator<=>(const ScorerKind&) const = default;
};

std::string to_string(const ScorerKind& kind);
ScorerKind parse_scorer_kind(const std::string& name);

// A single scorer output. value is the probability that the response is
// permissible; the hallucination probability is 1 - value. llm_calls and
// nli_calls mirror the cost model entry for the scorer, independent of
// whether sample generations were cache hits.
struct ScoreRecord {
  std::string example_id;
  ScorerKind scorer;
  double value = 0.0;
  int llm_calls = 0;
  int nli_calls = 0;
  std::string raw;  // diagnostic payload, JSON text
};

// Dense example x scorer grid with a missing mask.
struct ScoreMatrix {
  std::vector<ScorerKind> scorers;
  std::vector<std::string> example_ids;
  std::vector<double> values;          // row-major, |example_ids| x |scorers|
  std::vector<std::uint8_t> present;

  static ScoreMatrix create(std::vector<std::string> ids,
                            std::vector<ScorerKind> kinds);

  std::size_t rows() const { return example_ids.size(); }
  std::size_t cols() const { return scorers.size(); }
  std::size_t row_of(const std::string& id) const;
  std::size_t col_of(const ScorerKind& kind) const;
  bool has(std::size_t row, std::size_t col) const;
  double at(std::size_t row, std::size_t col) const;
  void set(std::size_t row, std::size_t col, double value);
  void clear(std::size_t row, std::size_t col);
};

}  // namespace halluscore
