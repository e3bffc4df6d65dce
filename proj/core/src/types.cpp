#include "halluscore/types.hpp"

#include <algorithm>
#include <charconv>

#include "halluscore/error.hpp"

namespace halluscore {

const Example* Dataset::find(const std::string& id) const {
  for (const auto& ex : examples) {
    if (ex.id == id) return &ex;
  }
  return nullptr;
}

bool SplitAssignment::in_calibration(const std::string& id) const {
  return std::find(calibration_ids.begin(), calibration_ids.end(), id) !=
         calibration_ids.end();
}

bool SplitAssignment::in_test(const std::string& id) const {
  return std::find(test_ids.begin(), test_ids.end(), id) != test_ids.end();
}

namespace {

const char* base_name(ScorerBase base) {
  switch (base) {
    case ScorerBase::PTrue: return "p_true";
    case ScorerBase::PTrueVerbalized: return "p_true_verbalized";
    case ScorerBase::PInputContradict: return "p_input_contradict";
    case ScorerBase::PSelfContradict: return "p_self_contradict";
    case ScorerBase::PFactContradict: return "p_fact_contradict";
    case ScorerBase::InversePerplexity: return "inverse_perplexity";
    case ScorerBase::NliDirect: return "nli_direct";
    case ScorerBase::SelfCheckNli: return "selfcheck_nli";
    case ScorerBase::SimilarityDegree: return "similarity_degree";
    case ScorerBase::HallucinationRail: return "hallucination_rail";
  }
  return "unknown";
}

}  // namespace

std::string to_string(const ScorerKind& kind) {
  std::string name = base_name(kind.base);
  if (kind.is_multi_generation()) {
    name += "_k" + std::to_string(kind.k);
  }
  return name;
}

ScorerKind parse_scorer_kind(const std::string& name) {
  static const std::pair<const char*, ScorerBase> kSingle[] = {
      {"p_true", ScorerBase::PTrue},
      {"p_true_verbalized", ScorerBase::PTrueVerbalized},
      {"p_input_contradict", ScorerBase::PInputContradict},
      {"p_self_contradict", ScorerBase::PSelfContradict},
      {"p_fact_contradict", ScorerBase::PFactContradict},
      {"inverse_perplexity", ScorerBase::InversePerplexity},
      {"nli_direct", ScorerBase::NliDirect},
  };
  for (const auto& [text, base] : kSingle) {
    if (name == text) return ScorerKind{base, 0};
  }
  static const std::pair<const char*, ScorerBase> kMulti[] = {
      {"selfcheck_nli", ScorerBase::SelfCheckNli},
      {"similarity_degree", ScorerBase::SimilarityDegree},
      {"hallucination_rail", ScorerBase::HallucinationRail},
  };
  for (const auto& [prefix, base] : kMulti) {
    const std::string want = std::string(prefix) + "_k";
    if (name.size() > want.size() && name.compare(0, want.size(), want) == 0) {
      int k = 0;
      const char* first = name.data() + want.size();
      const char* last = name.data() + name.size();
      auto [ptr, ec] = std::from_chars(first, last, k);
      if (ec == std::errc() && ptr == last && k >= 1) {
        return ScorerKind{base, k};
      }
    }
  }
  raise(ErrorCode::UnknownScorer, "unrecognized scorer name \"" + name + "\"");
}

ScoreMatrix ScoreMatrix::create(std::vector<std::string> ids,
                                std::vector<ScorerKind> kinds) {
  ScoreMatrix m;
  m.example_ids = std::move(ids);
  m.scorers = std::move(kinds);
  m.values.assign(m.rows() * m.cols(), 0.0);
  m.present.assign(m.rows() * m.cols(), 0);
  return m;
}

std::size_t ScoreMatrix::row_of(const std::string& id) const {
  for (std::size_t i = 0; i < example_ids.size(); ++i) {
    if (example_ids[i] == id) return i;
  }
  raise(ErrorCode::InvalidArgument, "unknown example id \"" + id + "\"");
}

std::size_t ScoreMatrix::col_of(const ScorerKind& kind) const {
  for (std::size_t j = 0; j < scorers.size(); ++j) {
    if (scorers[j] == kind) return j;
  }
  raise(ErrorCode::InvalidArgument,
        "unknown scorer column \"" + to_string(kind) + "\"");
}

bool ScoreMatrix::has(std::size_t row, std::size_t col) const {
  return present[row * cols() + col] != 0;
}

double ScoreMatrix::at(std::size_t row, std::size_t col) const {
  return values[row * cols() + col];
}

void ScoreMatrix::set(std::size_t row, std::size_t col, double value) {
  values[row * cols() + col] = value;
  present[row * cols() + col] = 1;
}

void ScoreMatrix::clear(std::size_t row, std::size_t col) {
  values[row * cols() + col] = 0.0;
  present[row * cols() + col] = 0;
}

}  // namespace halluscore
