#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wideseek/trajectory.hpp"

namespace wideseek {

struct Message {
  std::string role;  // system | user | assistant | tool
  std::string content;
  friend bool operator==(const Message&, const Message&) = default;
};

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 1.0;
  std::size_t max_tokens = 8192;
};

// Role tags used by the orchestrator and the data pipeline.
inline constexpr std::string_view kLeadRole = "lead";
inline constexpr std::string_view kSubagentRole = "subagent";
inline constexpr std::string_view kQueryGeneratorRole = "query_generator";
inline constexpr std::string_view kAnswerGeneratorRole = "answer_generator";
inline constexpr std::string_view kSummarizerRole = "summarizer";

struct GenerationRequest {
  std::vector<Message> messages;
  SamplingParams sampling;
  std::string role;
  std::size_t turn = 1;
  std::string query_id;
  std::string state_hash;
  std::uint64_t seed = 0;

  // Throws PreconditionError on empty messages or max_tokens == 0.
  void validate() const;
};

struct Generation {
  std::string text;
  std::vector<TokenRecord> tokens;
  FinishReason finish = FinishReason::Stop;
};

struct RescoreRequest {
  std::vector<Message> messages;  // the recorded state, unchanged
  std::vector<TokenRecord> tokens;
  std::string role;
  std::size_t turn = 1;
  std::string query_id;
  std::string state_hash;
  std::uint64_t seed = 0;
};

// Abstract generative policy. Implementations must accept concurrent calls.
class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;

  virtual Generation generate(const GenerationRequest& request) = 0;

  // One logprob per recorded output token under the current policy.
  // Throws LengthMismatch when the backend disagrees on the token count.
  virtual std::vector<double> rescore(const RescoreRequest& request) = 0;

  // Token count of `text` under this backend's tokenizer (estimated for
  // remote backends).
  [[nodiscard]] virtual std::size_t count_tokens(std::string_view text) const = 0;

  [[nodiscard]] virtual std::string tokenizer_id() const = 0;
};

struct RetryPolicy {
  std::size_t max_attempts = 3;
  std::chrono::milliseconds base_delay{200};
  std::chrono::milliseconds max_delay{5000};

  [[nodiscard]] std::chrono::milliseconds delay_for(std::size_t attempt) const;
};

// Runs `fn`, retrying on BackendUnavailable / ToolUnavailable with capped
// exponential backoff. Rethrows the last failure.
template <class Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn) -> decltype(fn());

// Deterministic tokenizer of the scripted backend: each token is a run of
// whitespace followed by a run of non-whitespace (trailing whitespace forms
// its own token). Concatenating the pieces reproduces the text exactly.
class ScriptedTokenizer {
 public:
  static constexpr std::string_view kId = "scripted-ws-v1";

  struct Piece {
    std::string_view text;
    std::int64_t id;
  };

  [[nodiscard]] static std::vector<Piece> tokenize(std::string_view text);
  [[nodiscard]] static std::size_t count(std::string_view text);
};

// Script-driven backend. A script is a list of entries keyed by role and turn
// and optionally by query id, exact task text and state hash. The most
// specific matching entry wins; ties go to the earlier entry. An entry may
// carry several variants, one of which is picked from the request seed.
class ScriptedBackend final : public PolicyBackend {
 public:
  static constexpr double kDefaultLogprob = -0.5;

  struct Variant {
    std::string text;
    std::optional<std::vector<double>> logprobs;
    std::optional<std::vector<double>> rescore_logprobs;
    FinishReason finish = FinishReason::Stop;
  };

  struct Entry {
    std::string role;
    std::size_t turn = 1;
    std::optional<std::string> query_id;
    std::optional<std::string> task;
    std::optional<std::string> state_hash;
    std::vector<Variant> variants;
  };

  explicit ScriptedBackend(std::vector<Entry> entries);

  static ScriptedBackend from_json(const nlohmann::json& script);
  static ScriptedBackend from_file(const std::filesystem::path& path);

  Generation generate(const GenerationRequest& request) override;
  std::vector<double> rescore(const RescoreRequest& request) override;
  [[nodiscard]] std::size_t count_tokens(std::string_view text) const override;
  [[nodiscard]] std::string tokenizer_id() const override { return std::string(ScriptedTokenizer::kId); }

  [[nodiscard]] std::size_t entry_count() const noexcept { return entries_.size(); }

 private:
  [[nodiscard]] const Variant& lookup(std::string_view role, std::size_t turn,
                                      std::string_view query_id,
                                      const std::vector<Message>& messages,
                                      std::string_view state_hash, std::uint64_t seed) const;

  std::vector<Entry> entries_;
};

struct RemoteBackendConfig {
  std::string base_url = "http://127.0.0.1:8000";  // scheme://host:port[/prefix]
  std::string model;
  std::string api_key_env = "WIDESEEK_API_KEY";
  std::string tokenizer = "remote";
  std::size_t max_in_flight = 8;
  RetryPolicy retry;
  std::chrono::seconds timeout{300};
};

// Chat-completions client that requests per-token logprobs. Rescoring uses a
// companion endpoint, POST {base}/v1/rescore, taking {"model","messages",
// "token_ids"} and returning {"logprobs": [...]}.
class RemoteBackend final : public PolicyBackend {
 public:
  explicit RemoteBackend(RemoteBackendConfig config);
  ~RemoteBackend() override;

  Generation generate(const GenerationRequest& request) override;
  std::vector<double> rescore(const RescoreRequest& request) override;
  [[nodiscard]] std::size_t count_tokens(std::string_view text) const override;
  [[nodiscard]] std::string tokenizer_id() const override { return config_.tokenizer; }

  // Exposed for tests: request body and response parsing.
  [[nodiscard]] nlohmann::json build_request_body(const GenerationRequest& request,
                                                  std::string_view correlation_id) const;
  [[nodiscard]] static Generation parse_response(const nlohmann::json& body);

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body,
                      const std::string& correlation_id);
  std::string next_correlation_id();

  RemoteBackendConfig config_;
  std::string api_key_;
  std::counting_semaphore<> in_flight_;
  std::atomic<std::uint64_t> request_counter_{0};
};

// ---------------------------------------------------------------------------

namespace detail {
void sleep_for_retry(std::chrono::milliseconds delay);
[[nodiscard]] bool is_retryable(const std::exception& e) noexcept;
}  // namespace detail

template <class Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
  using detail::is_retryable;
  using detail::sleep_for_retry;
  const std::size_t attempts = policy.max_attempts == 0 ? 1 : policy.max_attempts;
  for (std::size_t attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const std::exception& e) {
      if (attempt >= attempts || !is_retryable(e)) throw;
      sleep_for_retry(policy.delay_for(attempt));
    }
  }
}

}  // namespace wideseek
