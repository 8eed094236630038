#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace wideseek {

struct TokenRecord {
  std::int64_t token_id = 0;
  double logprob_old = 0.0;  // recorded at rollout time
  std::optional<double> logprob_new;  // filled by rescoring

  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

enum class AgentKind { Lead, Subagent };

[[nodiscard]] std::string_view to_string(AgentKind kind) noexcept;
[[nodiscard]] AgentKind agent_kind_from_string(std::string_view s);

// Wire names of the three tools.
inline constexpr std::string_view kCreateSubAgentsTool = "create_sub_agents";
inline constexpr std::string_view kSearchTool = "search";
inline constexpr std::string_view kAccessTool = "access";

struct CreateSubAgents {
  std::vector<std::string> prompts;
  friend bool operator==(const CreateSubAgents&, const CreateSubAgents&) = default;
};

struct Search {
  std::string query;
  friend bool operator==(const Search&, const Search&) = default;
};

struct Access {
  std::string url;
  std::string query;
  friend bool operator==(const Access&, const Access&) = default;
};

struct ToolCall {
  std::variant<CreateSubAgents, Search, Access> call;
  std::string raw_json;

  [[nodiscard]] std::string_view name() const noexcept;
  template <class T>
  [[nodiscard]] bool is() const noexcept {
    return std::holds_alternative<T>(call);
  }
  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

// Why a trajectory stopped. Limit breaches and backend failures are statuses,
// never exceptions.
enum class Termination {
  Answered,
  TurnLimit,
  ContextOverflow,
  MalformedToolLoop,
  BackendError,
};

[[nodiscard]] std::string_view to_string(Termination t) noexcept;
[[nodiscard]] Termination termination_from_string(std::string_view s);

// A termination that breaches the context or turn limit.
[[nodiscard]] constexpr bool is_over_limit(Termination t) noexcept {
  return t == Termination::TurnLimit || t == Termination::ContextOverflow;
}

enum class FinishReason { Stop, Length };

[[nodiscard]] std::string_view to_string(FinishReason f) noexcept;
[[nodiscard]] FinishReason finish_reason_from_string(std::string_view s);

struct Turn {
  std::size_t index = 1;  // 1-based
  std::string state;      // serialized message sequence presented to the policy
  std::string state_hash;
  std::string output_text;
  std::vector<TokenRecord> tokens;
  FinishReason finish = FinishReason::Stop;
  std::vector<ToolCall> tool_calls;       // empty for terminal turns
  std::optional<std::string> parse_error;  // tool-call extraction failure
  std::optional<std::string> tool_result;
  std::optional<Termination> termination;  // set on the trajectory's last turn

  // JSON of the parsed call(s): an object for one call, an array for several.
  [[nodiscard]] std::string tool_call_json() const;
};

struct AgentTrajectory {
  std::size_t agent_index = 0;  // 0 is the lead; subagents follow in spawn order
  AgentKind kind = AgentKind::Lead;
  std::optional<std::size_t> parent_turn;  // spawning lead turn (subagents only)
  std::string task;                        // q for the lead, q_a for a subagent
  std::vector<Turn> turns;
  Termination termination = Termination::Answered;

  [[nodiscard]] std::size_t output_token_count() const noexcept;
};

struct RolloutMetadata {
  std::string tokenizer;
  std::string config_hash;
  std::vector<std::string> prompt_ids;
  std::vector<std::string> tool_versions;
  std::uint64_t seed = 0;
  std::optional<std::string> started_at;  // wall clock, only when enabled
  std::optional<std::string> finished_at;
};

struct Rollout {
  std::string query_id;
  std::size_t rollout_index = 0;  // position within its group
  std::vector<AgentTrajectory> agents;  // agents[0] is the lead
  std::string final_answer_text;
  Termination status = Termination::Answered;
  RolloutMetadata metadata;

  [[nodiscard]] const AgentTrajectory& lead() const { return agents.at(0); }
  [[nodiscard]] std::size_t subagent_count() const noexcept {
    return agents.empty() ? 0 : agents.size() - 1;
  }
};

[[nodiscard]] nlohmann::json to_json(const ToolCall& call);
[[nodiscard]] nlohmann::json to_json(const Rollout& rollout);
[[nodiscard]] nlohmann::json to_json(const RolloutMetadata& metadata);
[[nodiscard]] RolloutMetadata metadata_from_json(const nlohmann::json& j);

// Parses one trajectory record. Serialized states are not stored on the wire
// (only their hashes); callers restore them with restore_states().
[[nodiscard]] Rollout rollout_from_json(const nlohmann::json& j);

// Compact dump; invalid UTF-8 in model text is replaced rather than thrown on.
[[nodiscard]] std::string dump_json(const nlohmann::json& j);

// One compact JSON document per line.
[[nodiscard]] std::string to_jsonl_line(const Rollout& rollout);

}  // namespace wideseek
