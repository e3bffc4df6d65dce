#include "halluscore/backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include <openssl/evp.h>

#include "httplib.h"
#include "json.hpp"

#include "halluscore/error.hpp"

namespace halluscore {

using nlohmann::json;

std::string request_digest(const std::string& endpoint,
                           const std::string& body_json) {
  const std::string payload = endpoint + "\n" + body_json;
  unsigned char hash[EVP_MAX_MD_SIZE];
  unsigned int hash_len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr ||
      EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, payload.data(), payload.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, hash, &hash_len) != 1) {
    EVP_MD_CTX_free(ctx);
    raise(ErrorCode::Internal, "SHA-256 digest computation failed");
  }
  EVP_MD_CTX_free(ctx);
  std::string hex(hash_len * 2, '0');
  for (unsigned int i = 0; i < hash_len; ++i) {
    std::snprintf(hex.data() + 2 * i, 3, "%02x", hash[i]);
  }
  return hex;
}

// ---------------------------------------------------------------------------
// HttpTransport

struct HttpTransport::Impl {
  std::string host;
  int port = 80;
  std::string bearer_token;
};

namespace {

void parse_base_url(const std::string& base_url, std::string& host, int& port) {
  std::string rest = base_url;
  const std::string http = "http://";
  const std::string https = "https://";
  if (rest.rfind(https, 0) == 0) {
    raise(ErrorCode::InvalidConfig,
          "https endpoints are not supported, use an http proxy: " + base_url);
  }
  if (rest.rfind(http, 0) == 0) rest = rest.substr(http.size());
  while (!rest.empty() && rest.back() == '/') rest.pop_back();
  const auto colon = rest.find(':');
  if (colon == std::string::npos) {
    host = rest;
    port = 80;
  } else {
    host = rest.substr(0, colon);
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      raise(ErrorCode::InvalidConfig, "bad port in base url " + base_url);
    }
  }
  if (host.empty()) {
    raise(ErrorCode::InvalidConfig, "empty host in base url " + base_url);
  }
}

}  // namespace

HttpTransport::HttpTransport(std::string base_url, std::string bearer_token)
    : impl_(std::make_unique<Impl>()) {
  parse_base_url(base_url, impl_->host, impl_->port);
  impl_->bearer_token = std::move(bearer_token);
}

HttpTransport::~HttpTransport() = default;

std::string HttpTransport::post(const std::string& endpoint,
                                const std::string& body_json) {
  httplib::Client client(impl_->host, impl_->port);
  client.set_read_timeout(120, 0);
  client.set_connection_timeout(10, 0);
  httplib::Headers headers;
  if (!impl_->bearer_token.empty()) {
    headers.emplace("Authorization", "Bearer " + impl_->bearer_token);
  }
  auto res = client.Post(endpoint, headers, body_json, "application/json");
  if (!res) {
    raise(ErrorCode::Transport, "POST " + endpoint + " failed: " +
                                    httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    raise(ErrorCode::Transport, "POST " + endpoint + " returned status " +
                                    std::to_string(res->status));
  }
  if (res->status != 200) {
    raise(ErrorCode::MalformedResponse,
          "POST " + endpoint + " returned status " +
              std::to_string(res->status) + ": " + res->body);
  }
  return res->body;
}

// ---------------------------------------------------------------------------
// RetryingTransport

RetryingTransport::RetryingTransport(std::shared_ptr<Transport> inner,
                                     RetryPolicy policy)
    : inner_(std::move(inner)), policy_(policy) {}

std::string RetryingTransport::post(const std::string& endpoint,
                                    const std::string& body_json) {
  for (int attempt = 1;; ++attempt) {
    try {
      return inner_->post(endpoint, body_json);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Transport || attempt >= policy_.max_attempts) {
        throw;
      }
      const double delay =
          policy_.backoff_base_seconds * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
  }
}

// ---------------------------------------------------------------------------
// Replay / Recording

ReplayTransport::ReplayTransport(std::shared_ptr<const FixtureStore> store)
    : store_(std::move(store)) {}

std::string ReplayTransport::post(const std::string& endpoint,
                                  const std::string& body_json) {
  const std::string digest = request_digest(endpoint, body_json);
  auto hit = store_->lookup(digest);
  if (!hit) {
    raise(ErrorCode::FixtureMiss,
          "no recorded response for " + endpoint + " digest " + digest);
  }
  return *hit;
}

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner,
                                       std::shared_ptr<FixtureStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

std::string RecordingTransport::post(const std::string& endpoint,
                                     const std::string& body_json) {
  const std::string response = inner_->post(endpoint, body_json);
  store_->insert(request_digest(endpoint, body_json), endpoint, response);
  return response;
}

// ---------------------------------------------------------------------------
// EndpointRouter

EndpointRouter::EndpointRouter(std::shared_ptr<Transport> chat,
                               std::shared_ptr<Transport> nli,
                               std::shared_ptr<Transport> embedding)
    : chat_(std::move(chat)),
      nli_(std::move(nli)),
      embedding_(std::move(embedding)) {}

std::string EndpointRouter::post(const std::string& endpoint,
                                 const std::string& body_json) {
  if (endpoint == BackendClient::kChatEndpoint) {
    return chat_->post(endpoint, body_json);
  }
  if (endpoint == BackendClient::kNliEndpoint) {
    return nli_->post(endpoint, body_json);
  }
  if (endpoint == BackendClient::kEmbeddingEndpoint) {
    return embedding_->post(endpoint, body_json);
  }
  raise(ErrorCode::Internal, "no route for endpoint " + endpoint);
}

// ---------------------------------------------------------------------------
// BackendClient

BackendClient::BackendClient(std::shared_ptr<Transport> transport,
                             BackendConfig config)
    : transport_(std::move(transport)), config_(std::move(config)) {}

namespace {

json parse_response(const std::string& endpoint, const std::string& body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) {
    raise(ErrorCode::MalformedResponse,
          endpoint + std::string(" returned invalid JSON"));
  }
  return parsed;
}

double require_logprob(const json& node, const std::string& endpoint) {
  if (!node.is_number()) {
    raise(ErrorCode::MalformedResponse,
          endpoint + std::string(" logprob entry is not a number"));
  }
  const double lp = node.get<double>();
  if (!std::isfinite(lp) || lp > 0.0) {
    raise(ErrorCode::MalformedResponse,
          endpoint + std::string(" logprob out of range: ") + node.dump());
  }
  return lp;
}

}  // namespace

ChatResult BackendClient::complete(const ChatRequest& req) {
  if (req.messages.empty()) {
    raise(ErrorCode::InvalidArgument, "chat request needs at least one message");
  }
  json body;
  body["model"] = req.model.empty() ? config_.chat_model : req.model;
  body["messages"] = json::array();
  for (const auto& m : req.messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  body["logprobs"] = req.want_logprobs;
  body["top_logprobs"] = req.top_logprobs;
  if (req.seed) body["seed"] = *req.seed;

  const json resp =
      parse_response(kChatEndpoint, transport_->post(kChatEndpoint, body.dump()));
  if (!resp.contains("choices") || !resp["choices"].is_array() ||
      resp["choices"].empty()) {
    raise(ErrorCode::MalformedResponse, "chat response has no choices");
  }
  const json& choice = resp["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string()) {
    raise(ErrorCode::MalformedResponse, "chat response has no message content");
  }

  ChatResult result;
  result.text = choice["message"]["content"].get<std::string>();

  if (req.want_logprobs) {
    if (!choice.contains("logprobs") || !choice["logprobs"].contains("content") ||
        !choice["logprobs"]["content"].is_array() ||
        choice["logprobs"]["content"].empty()) {
      raise(ErrorCode::MalformedResponse,
            "chat response lacks requested logprobs");
    }
    const json& content = choice["logprobs"]["content"];
    TokenLogprobs tl;
    for (const auto& tok : content) {
      if (!tok.contains("token") || !tok.contains("logprob")) {
        raise(ErrorCode::MalformedResponse, "chat logprob entry malformed");
      }
      tl.tokens.push_back({tok["token"].get<std::string>(),
                           require_logprob(tok["logprob"], kChatEndpoint)});
    }
    result.token_logprobs = std::move(tl);

    FirstTokenLogits first;
    const json& head = content[0];
    if (head.contains("top_logprobs") && head["top_logprobs"].is_array() &&
        !head["top_logprobs"].empty()) {
      for (const auto& entry : head["top_logprobs"]) {
        if (!entry.contains("token") || !entry.contains("logprob")) {
          raise(ErrorCode::MalformedResponse, "top_logprobs entry malformed");
        }
        first.entries.push_back(
            {entry["token"].get<std::string>(),
             require_logprob(entry["logprob"], kChatEndpoint)});
      }
    } else {
      first.entries.push_back(result.token_logprobs->tokens.front());
    }
    result.first_token_logits = std::move(first);
  }
  return result;
}

NliVerdict BackendClient::classify_nli(const std::string& premise,
                                       const std::string& hypothesis) {
  if (premise.empty()) raise(ErrorCode::EmptyText, "NLI premise is empty");
  if (hypothesis.empty()) raise(ErrorCode::EmptyText, "NLI hypothesis is empty");

  json body;
  body["premise"] = premise;
  body["hypothesis"] = hypothesis;
  const json resp =
      parse_response(kNliEndpoint, transport_->post(kNliEndpoint, body.dump()));

  NliVerdict verdict;
  for (const char* key : {"entailment", "neutral", "contradiction"}) {
    if (!resp.contains(key) || !resp[key].is_number()) {
      raise(ErrorCode::MalformedResponse,
            std::string("NLI response missing \"") + key + "\"");
    }
  }
  verdict.entailment = resp["entailment"].get<double>();
  verdict.neutral = resp["neutral"].get<double>();
  verdict.contradiction = resp["contradiction"].get<double>();

  const double probs[] = {verdict.entailment, verdict.neutral,
                          verdict.contradiction};
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      raise(ErrorCode::InvalidDistribution,
            "NLI probability outside [0,1]: " + std::to_string(p));
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-3) {
    raise(ErrorCode::InvalidDistribution,
          "NLI probabilities sum to " + std::to_string(sum));
  }
  verdict.entailment /= sum;
  verdict.neutral /= sum;
  verdict.contradiction /= sum;
  return verdict;
}

EmbeddingVector BackendClient::embed(const std::string& text) {
  if (text.empty()) raise(ErrorCode::EmptyText, "embedding input is empty");

  json body;
  body["model"] = config_.embedding_model;
  body["input"] = text;
  const json resp = parse_response(
      kEmbeddingEndpoint, transport_->post(kEmbeddingEndpoint, body.dump()));
  if (!resp.contains("data") || !resp["data"].is_array() ||
      resp["data"].empty() || !resp["data"][0].contains("embedding") ||
      !resp["data"][0]["embedding"].is_array()) {
    raise(ErrorCode::MalformedResponse, "embedding response malformed");
  }

  EmbeddingVector vec;
  for (const auto& v : resp["data"][0]["embedding"]) {
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      raise(ErrorCode::MalformedResponse, "embedding entry is not finite");
    }
    vec.values.push_back(v.get<double>());
  }
  if (vec.values.empty()) {
    raise(ErrorCode::MalformedResponse, "embedding response is empty");
  }
  if (embedding_dim_ && *embedding_dim_ != vec.values.size()) {
    raise(ErrorCode::DimensionMismatch,
          "embedding dimension changed from " +
              std::to_string(*embedding_dim_) + " to " +
              std::to_string(vec.values.size()));
  }
  embedding_dim_ = vec.values.size();
  return vec;
}

}  // namespace halluscore
