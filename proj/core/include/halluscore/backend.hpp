#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "halluscore/fixtures.hpp"

namespace halluscore {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 16;
  bool want_logprobs = false;
  int top_logprobs = 0;  // 0..20
  // Distinguishes repeated sampling of the same prompt; forwarded on the wire
  // and part of the request digest.
  std::optional<int> seed;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

// Log-probabilities of each generated token (w_1..w_N).
struct TokenLogprobs {
  std::vector<TokenLogprob> tokens;
};

// Candidate entries for the first generated token. Kept as a list because a
// surface form may appear under several tokenizations.
struct FirstTokenLogits {
  std::vector<TokenLogprob> entries;
};

struct ChatResult {
  std::string text;
  std::optional<TokenLogprobs> token_logprobs;
  std::optional<FirstTokenLogits> first_token_logits;
};

struct NliVerdict {
  double entailment = 0.0;
  double neutral = 0.0;
  double contradiction = 0.0;
};

struct EmbeddingVector {
  std::vector<double> values;
};

// One wire hop: POST a JSON body to an endpoint path, get a JSON body back.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string post(const std::string& endpoint,
                           const std::string& body_json) = 0;
};

// Hex SHA-256 over endpoint and canonical body; the replay/record key.
std::string request_digest(const std::string& endpoint,
                           const std::string& body_json);

class HttpTransport : public Transport {
 public:
  // base_url like "http://host:port"; bearer_token may be empty.
  HttpTransport(std::string base_url, std::string bearer_token);
  ~HttpTransport() override;
  std::string post(const std::string& endpoint,
                   const std::string& body_json) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RetryPolicy {
  int max_attempts = 3;
  double backoff_base_seconds = 1.0;
};

// Retries transport failures with exponential backoff. Validation failures
// (malformed payloads) pass through untouched.
class RetryingTransport : public Transport {
 public:
  RetryingTransport(std::shared_ptr<Transport> inner, RetryPolicy policy);
  std::string post(const std::string& endpoint,
                   const std::string& body_json) override;

 private:
  std::shared_ptr<Transport> inner_;
  RetryPolicy policy_;
};

// Serves recorded responses by request digest; misses are errors.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(std::shared_ptr<const FixtureStore> store);
  std::string post(const std::string& endpoint,
                   const std::string& body_json) override;

 private:
  std::shared_ptr<const FixtureStore> store_;
};

// Forwards to an inner transport and records every response.
class RecordingTransport : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner,
                     std::shared_ptr<FixtureStore> store);
  std::string post(const std::string& endpoint,
                   const std::string& body_json) override;

 private:
  std::shared_ptr<Transport> inner_;
  std::shared_ptr<FixtureStore> store_;
};

struct BackendConfig {
  std::string chat_model;
  std::string embedding_model;
};

// Typed client over a Transport. Builds canonical request bodies, validates
// responses, and enforces the distribution/dimension invariants. The same
// parsing runs in live, record and replay modes.
class BackendClient {
 public:
  BackendClient(std::shared_ptr<Transport> transport, BackendConfig config);

  ChatResult complete(const ChatRequest& req);
  NliVerdict classify_nli(const std::string& premise,
                          const std::string& hypothesis);
  EmbeddingVector embed(const std::string& text);

  const BackendConfig& config() const { return config_; }

  static constexpr const char* kChatEndpoint = "/v1/chat/completions";
  static constexpr const char* kNliEndpoint = "/classify";
  static constexpr const char* kEmbeddingEndpoint = "/v1/embeddings";

 private:
  std::shared_ptr<Transport> transport_;
  BackendConfig config_;
  std::optional<std::size_t> embedding_dim_;
};

// Routes each endpoint to its own transport (chat, NLI and embeddings may be
// different services live; under replay they usually share one store).
class EndpointRouter : public Transport {
 public:
  EndpointRouter(std::shared_ptr<Transport> chat,
                 std::shared_ptr<Transport> nli,
                 std::shared_ptr<Transport> embedding);
  std::string post(const std::string& endpoint,
                   const std::string& body_json) override;

 private:
  std::shared_ptr<Transport> chat_;
  std::shared_ptr<Transport> nli_;
  std::shared_ptr<Transport> embedding_;
};

}  // namespace halluscore
