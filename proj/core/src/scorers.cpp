#include "halluscore/scorers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "json.hpp"

#include "halluscore/budget.hpp"
#include "halluscore/error.hpp"
#include "halluscore/prompts.hpp"

namespace halluscore {

using nlohmann::json;

double softmax_binary_normalize(double lp_pos, double lp_neg) {
  if (!std::isfinite(lp_pos) || !std::isfinite(lp_neg)) {
    raise(ErrorCode::NonFiniteValue, "non-finite log-probability");
  }
  const double m = std::max(lp_pos, lp_neg);
  const double ep = std::exp(lp_pos - m);
  const double en = std::exp(lp_neg - m);
  return ep / (ep + en);
}

double score_inverse_perplexity(const TokenLogprobs& tl) {
  if (tl.tokens.empty()) {
    raise(ErrorCode::InvalidArgument, "empty token logprob list");
  }
  double sum = 0.0;
  for (const auto& t : tl.tokens) {
    if (!std::isfinite(t.logprob)) {
      raise(ErrorCode::NonFiniteValue, "non-finite token logprob");
    }
    sum += t.logprob;
  }
  return std::exp(sum / double(tl.tokens.size()));
}

namespace {

std::string trim_lower(std::string_view s) {
  std::size_t b = 0, e = s.size();
  auto is_ws = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  };
  while (b < e && is_ws(s[b])) ++b;
  while (e > b && is_ws(s[e - 1])) --e;
  std::string out(s.substr(b, e - b));
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = char(c + 32);
  }
  return out;
}

// log(sum(exp(lps))) without overflow
double log_sum_exp(const std::vector<double>& lps) {
  double m = lps[0];
  for (double lp : lps) m = std::max(m, lp);
  double acc = 0.0;
  for (double lp : lps) acc += std::exp(lp - m);
  return m + std::log(acc);
}

}  // namespace

double verdict_probability(const FirstTokenLogits& logits,
                           std::string_view positive,
                           std::string_view negative) {
  const std::string pos = trim_lower(positive);
  const std::string neg = trim_lower(negative);
  std::vector<double> pos_lps, neg_lps;
  for (const auto& entry : logits.entries) {
    const std::string tok = trim_lower(entry.token);
    if (tok == pos) pos_lps.push_back(entry.logprob);
    if (tok == neg) neg_lps.push_back(entry.logprob);
  }
  if (pos_lps.empty() || neg_lps.empty()) {
    const std::string_view missing = pos_lps.empty() ? positive : negative;
    raise(ErrorCode::MissingVerdictToken,
          "verdict token \"" + std::string(missing) +
              "\" absent from top logprobs");
  }
  return softmax_binary_normalize(log_sum_exp(pos_lps), log_sum_exp(neg_lps));
}

std::optional<double> parse_verbalized_probability(std::string_view completion) {
  const char* data = completion.data();
  std::size_t i = 0;
  while (i < completion.size()) {
    const char c = completion[i];
    const bool digit = c >= '0' && c <= '9';
    const bool dot_start = c == '.' && i + 1 < completion.size() &&
                           completion[i + 1] >= '0' && completion[i + 1] <= '9';
    if (!digit && !dot_start) {
      ++i;
      continue;
    }
    const bool negated = i > 0 && completion[i - 1] == '-';
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(data + i, data + completion.size(), value);
    if (ec == std::errc() && ptr != data + i) {
      if (!negated && value >= 0.0 && value <= 1.0) return value;
      i = static_cast<std::size_t>(ptr - data);
    } else {
      ++i;
    }
  }
  return std::nullopt;
}

namespace {

ScoreRecord make_record(const Example& ex, const ScorerKind& kind, double value,
                        json diagnostics) {
  const ScorerCost cost = standard_cost(kind);
  ScoreRecord rec;
  rec.example_id = ex.id;
  rec.scorer = kind;
  rec.value = value;
  rec.llm_calls = cost.llm_calls;
  rec.nli_calls = cost.nli_calls;
  rec.raw = diagnostics.dump();
  return rec;
}

void require_nonempty(std::string_view what, std::string_view text) {
  if (text.empty()) {
    raise(ErrorCode::EmptyText, std::string(what) + " is empty");
  }
}

FirstTokenLogits request_verdict_logits(BackendClient& client,
                                        const ScorerParams& params,
                                        const std::string& prompt) {
  ChatRequest req;
  req.model = params.detector_model;
  req.messages = {{"user", prompt}};
  req.temperature = 0.0;
  req.max_tokens = params.verdict_max_tokens;
  req.want_logprobs = true;
  req.top_logprobs = params.verdict_top_logprobs;
  ChatResult result = client.complete(req);
  if (!result.first_token_logits) {
    raise(ErrorCode::MalformedResponse, "no first-token logprobs returned");
  }
  return *result.first_token_logits;
}

}  // namespace

ScoreRecord score_prompted_binary(BackendClient& client,
                                  const ScorerParams& params,
                                  const Example& ex) {
  const ScorerBase base = params.kind.base;
  const bool needs_input =
      base == ScorerBase::PTrue || base == ScorerBase::PInputContradict;
  if (needs_input) require_nonempty("input", ex.input);
  require_nonempty("response", ex.response);

  const std::string prompt =
      prompts::render(prompts::template_for(base), ex.input, ex.response);
  const FirstTokenLogits logits =
      request_verdict_logits(client, params, prompt);
  const double value = verdict_probability(logits, "True", "False");
  return make_record(ex, params.kind, value,
                     json{{"verdict_tokens", {"True", "False"}},
                          {"candidates", logits.entries.size()}});
}

ScoreRecord score_verbalized(BackendClient& client, const ScorerParams& params,
                             const Example& ex) {
  require_nonempty("input", ex.input);
  require_nonempty("response", ex.response);

  ChatRequest req;
  req.model = params.detector_model;
  req.messages = {
      {"user", prompts::render(prompts::template_for(ScorerBase::PTrueVerbalized),
                               ex.input, ex.response)}};
  req.temperature = 0.0;
  req.max_tokens = params.verbalized_max_tokens;
  const ChatResult result = client.complete(req);

  const auto parsed = parse_verbalized_probability(result.text);
  if (!parsed) {
    raise(ErrorCode::Abstention,
          "no probability in completion \"" + result.text + "\"");
  }
  return make_record(ex, params.kind, *parsed,
                     json{{"completion", result.text}, {"abstained", false}});
}

ScoreRecord score_nli_direct(BackendClient& client, const Example& ex) {
  require_nonempty("input", ex.input);
  require_nonempty("response", ex.response);
  const NliVerdict verdict = client.classify_nli(ex.input, ex.response);
  return make_record(ex, ScorerKind{ScorerBase::NliDirect, 0},
                     1.0 - verdict.contradiction,
                     json{{"contradiction", verdict.contradiction}});
}

ScoreRecord score_generation_likelihood(BackendClient& client,
                                        const ScorerParams& params,
                                        const Example& ex) {
  require_nonempty("input", ex.input);
  ChatRequest req;
  req.model = params.detector_model;
  req.messages = {{"user", ex.input}};
  req.temperature = 0.0;
  req.max_tokens = params.sample_max_tokens;
  req.want_logprobs = true;
  const ChatResult result = client.complete(req);
  if (!result.token_logprobs) {
    raise(ErrorCode::MalformedResponse, "no token logprobs returned");
  }
  const double value = score_inverse_perplexity(*result.token_logprobs);
  double mean_lp = 0.0;
  for (const auto& t : result.token_logprobs->tokens) mean_lp += t.logprob;
  mean_lp /= double(result.token_logprobs->tokens.size());
  return make_record(ex, params.kind, value,
                     json{{"mean_logprob", mean_lp},
                          {"tokens", result.token_logprobs->tokens.size()},
                          {"generated_text", result.text}});
}

Example ensure_samples(BackendClient& client, const ScorerParams& params,
                       const Example& ex, int K) {
  if (K < 1) raise(ErrorCode::InvalidArgument, "sample count must be >= 1");
  if (static_cast<int>(ex.samples.size()) >= K) return ex;
  if (params.generation_temperature == 0.0 && K >= 2) {
    raise(ErrorCode::DegenerateSampling,
          "temperature 0 collapses all sampled generations to one response");
  }
  require_nonempty("input", ex.input);

  Example out = ex;
  for (int i = static_cast<int>(ex.samples.size()); i < K; ++i) {
    ChatRequest req;
    req.model = params.detector_model;
    req.messages = {{"user", ex.input}};
    req.temperature = params.generation_temperature;
    req.max_tokens = params.sample_max_tokens;
    req.seed = i;  // distinct digest per sample slot
    out.samples.push_back(client.complete(req).text);
  }
  return out;
}

namespace {

void require_samples(const Example& ex, int K) {
  if (K < 1) raise(ErrorCode::InvalidArgument, "sample count must be >= 1");
  if (static_cast<int>(ex.samples.size()) < K) {
    raise(ErrorCode::TooSmall,
          "example " + ex.id + " has " + std::to_string(ex.samples.size()) +
              " samples, scorer needs " + std::to_string(K));
  }
}

}  // namespace

ScoreRecord score_selfcheck_nli(BackendClient& client, const Example& ex,
                                int K) {
  require_samples(ex, K);
  require_nonempty("response", ex.response);
  std::vector<double> contradictions;
  contradictions.reserve(K);
  double sum = 0.0;
  for (int k = 0; k < K; ++k) {
    const NliVerdict v = client.classify_nli(ex.samples[k], ex.response);
    contradictions.push_back(v.contradiction);
    sum += v.contradiction;
  }
  const double value = 1.0 - sum / double(K);
  return make_record(ex, ScorerKind{ScorerBase::SelfCheckNli, K}, value,
                     json{{"contradictions", contradictions}});
}

ScoreRecord score_similarity_degree(BackendClient& client, const Example& ex,
                                    int K) {
  require_samples(ex, K);
  require_nonempty("response", ex.response);
  std::vector<double> similarities;
  similarities.reserve(K);
  double degree = 0.0;
  for (int k = 0; k < K; ++k) {
    const double fwd = client.classify_nli(ex.response, ex.samples[k]).contradiction;
    const double rev = client.classify_nli(ex.samples[k], ex.response).contradiction;
    const double sim = 1.0 - 0.5 * (fwd + rev);
    similarities.push_back(sim);
    degree += sim;
  }
  return make_record(ex, ScorerKind{ScorerBase::SimilarityDegree, K},
                     degree / double(K),
                     json{{"similarities", similarities},
                          {"degree_raw", degree},
                          {"directional_queries", 2 * K}});
}

ScoreRecord score_hallucination_rail(BackendClient& client,
                                     const ScorerParams& params,
                                     const Example& ex, int K) {
  require_samples(ex, K);
  require_nonempty("response", ex.response);
  const std::vector<std::string> context(ex.samples.begin(),
                                         ex.samples.begin() + K);
  const std::string prompt = prompts::render_rail(context, ex.response);
  const FirstTokenLogits logits =
      request_verdict_logits(client, params, prompt);
  const double value = verdict_probability(logits, "yes", "no");
  return make_record(ex, ScorerKind{ScorerBase::HallucinationRail, K}, value,
                     json{{"verdict_tokens", {"yes", "no"}},
                          {"candidates", logits.entries.size()}});
}

ScoreRecord score_example(BackendClient& client, const ScorerParams& params,
                          const Example& ex) {
  switch (params.kind.base) {
    case ScorerBase::PTrue:
    case ScorerBase::PInputContradict:
    case ScorerBase::PSelfContradict:
    case ScorerBase::PFactContradict:
      return score_prompted_binary(client, params, ex);
    case ScorerBase::PTrueVerbalized:
      return score_verbalized(client, params, ex);
    case ScorerBase::NliDirect:
      return score_nli_direct(client, ex);
    case ScorerBase::InversePerplexity:
      return score_generation_likelihood(client, params, ex);
    case ScorerBase::SelfCheckNli:
      return score_selfcheck_nli(client, ex, params.kind.k);
    case ScorerBase::SimilarityDegree:
      return score_similarity_degree(client, ex, params.kind.k);
    case ScorerBase::HallucinationRail:
      return score_hallucination_rail(client, params, ex, params.kind.k);
  }
  raise(ErrorCode::Internal, "unhandled scorer kind");
}

ScoreOutcome score_all(BackendClient& client, const Dataset& d,
                       const std::vector<ScorerParams>& specs) {
  if (specs.empty()) raise(ErrorCode::NoScorers, "no scorers configured");

  std::vector<std::string> ids;
  ids.reserve(d.size());
  for (const auto& ex : d.examples) ids.push_back(ex.id);
  std::vector<ScorerKind> kinds;
  kinds.reserve(specs.size());
  for (const auto& spec : specs) kinds.push_back(spec.kind);

  ScoreOutcome out;
  out.matrix = ScoreMatrix::create(std::move(ids), std::move(kinds));

  int max_k = 0;
  const ScorerParams* sampling_spec = nullptr;
  for (const auto& spec : specs) {
    if (spec.kind.is_multi_generation() && spec.kind.k > max_k) {
      max_k = spec.kind.k;
      sampling_spec = &spec;
    }
  }

  std::vector<std::size_t> failures(specs.size(), 0);
  std::vector<std::string> first_failure(specs.size());
  std::vector<ErrorCode> first_code(specs.size(), ErrorCode::Internal);

  for (std::size_t row = 0; row < d.size(); ++row) {
    const Example& original = d.examples[row];
    Example shared = original;
    std::optional<std::string> sampling_error;
    if (max_k > 0) {
      try {
        shared = ensure_samples(client, *sampling_spec, original, max_k);
      } catch (const Error& e) {
        sampling_error = e.what();
      }
    }

    for (std::size_t col = 0; col < specs.size(); ++col) {
      const ScorerParams& spec = specs[col];
      const bool needs_samples = spec.kind.is_multi_generation();
      try {
        if (needs_samples && sampling_error) {
          raise(ErrorCode::DegenerateSampling,
                "sample generation failed: " + *sampling_error);
        }
        ScoreRecord rec = score_example(client, spec, shared);
        out.matrix.set(row, col, rec.value);
        out.records.push_back(std::move(rec));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Abstention) {
          ScoreRecord rec;
          rec.example_id = original.id;
          rec.scorer = spec.kind;
          rec.value = 0.5;
          const ScorerCost cost = standard_cost(spec.kind);
          rec.llm_calls = cost.llm_calls;
          rec.nli_calls = cost.nli_calls;
          rec.raw = json{{"abstained", true}, {"detail", e.what()}}.dump();
          out.matrix.set(row, col, rec.value);
          out.records.push_back(std::move(rec));
          out.warnings.push_back("example " + original.id + " scorer " +
                                 to_string(spec.kind) +
                                 ": abstention imputed at 0.5");
          continue;
        }
        if (failures[col] == 0) {
          first_failure[col] = e.what();
          first_code[col] = e.code();
        }
        ++failures[col];
        out.warnings.push_back("example " + original.id + " scorer " +
                               to_string(spec.kind) + ": " + e.what());
      }
    }
  }

  for (std::size_t col = 0; col < specs.size(); ++col) {
    if (failures[col] == d.size()) {
      throw Error(first_code[col],
                  "scorer " + to_string(specs[col].kind) +
                      " failed on every example; first error: " +
                      first_failure[col]);
    }
  }
  return out;
}

}  // namespace halluscore
