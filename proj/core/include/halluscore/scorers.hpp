#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "halluscore/backend.hpp"
#include "halluscore/types.hpp"

namespace halluscore {

struct ScorerParams {
  ScorerKind kind;
  std::string detector_model;  // empty means the backend default
  double generation_temperature = 1.0;
  int verdict_top_logprobs = 20;
  int verdict_max_tokens = 1;
  int verbalized_max_tokens = 16;
  int sample_max_tokens = 256;
};

// Stable two-way softmax: exp(lp_pos) / (exp(lp_pos) + exp(lp_neg)).
double softmax_binary_normalize(double lp_pos, double lp_neg);

// exp of the mean token log-probability; in (0, 1] for any completed
// generation.
double score_inverse_perplexity(const TokenLogprobs& tl);

// Normalized probability of the positive verdict token. Tokens match
// case-insensitively after whitespace trimming; multiple tokenizations of the
// same word are combined by log-sum-exp before normalizing. A missing side is
// a MissingVerdictToken error.
double verdict_probability(const FirstTokenLogits& logits,
                           std::string_view positive, std::string_view negative);

// First decimal number in [0,1] found in the completion, if any.
std::optional<double> parse_verbalized_probability(std::string_view completion);

// Single-generation scorers.
ScoreRecord score_prompted_binary(BackendClient& client,
                                  const ScorerParams& params,
                                  const Example& ex);
ScoreRecord score_verbalized(BackendClient& client, const ScorerParams& params,
                             const Example& ex);
ScoreRecord score_nli_direct(BackendClient& client, const Example& ex);
ScoreRecord score_generation_likelihood(BackendClient& client,
                                        const ScorerParams& params,
                                        const Example& ex);

// Returns a copy of ex holding at least K samples, generating the shortfall
// at params.generation_temperature. Fresh sampling at temperature zero is a
// DegenerateSampling error since all generations would collapse to one.
Example ensure_samples(BackendClient& client, const ScorerParams& params,
                       const Example& ex, int K);

// Multi-generation scorers; ex must already hold at least K samples.
ScoreRecord score_selfcheck_nli(BackendClient& client, const Example& ex,
                                int K);
ScoreRecord score_similarity_degree(BackendClient& client, const Example& ex,
                                    int K);
ScoreRecord score_hallucination_rail(BackendClient& client,
                                     const ScorerParams& params,
                                     const Example& ex, int K);

// Dispatch on params.kind.
ScoreRecord score_example(BackendClient& client, const ScorerParams& params,
                          const Example& ex);

struct ScoreOutcome {
  ScoreMatrix matrix;
  std::vector<ScoreRecord> records;
  std::vector<std::string> warnings;
};

// Scores every example with every configured scorer. Sample generations are
// shared across multi-generation scorers (one pool at the largest K). A cell
// failure is recorded as a warning and the cell marked missing; a verbalized
// abstention is imputed at 0.5 with a diagnostic flag. Errors only when the
// scorer list is empty or some scorer fails on every example.
ScoreOutcome score_all(BackendClient& client, const Dataset& d,
                       const std::vector<ScorerParams>& specs);

}  // namespace halluscore
