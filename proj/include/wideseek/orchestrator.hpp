#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wideseek/policy.hpp"
#include "wideseek/tools.hpp"
#include "wideseek/trajectory.hpp"

namespace wideseek {

struct Limits {
  std::size_t max_lead_turns = 10;
  std::size_t max_sub_turns = 20;
  std::size_t max_subagents_per_turn = 10;
  std::size_t max_parallel_tool_calls = 5;
  std::size_t max_context_tokens = 32768;

  void validate() const;  // throws ConfigError
  [[nodiscard]] std::size_t turn_limit(AgentKind kind) const noexcept {
    return kind == AgentKind::Lead ? max_lead_turns : max_sub_turns;
  }
};

// System prompts by id. The shipped texts live in data/prompts.
struct PromptSet {
  std::string lead_id = "lead_system";
  std::string lead_system;
  std::string subagent_id = "subagent_system";
  std::string subagent_system;

  // Reads <dir>/<lead_id>.txt and <dir>/<subagent_id>.txt.
  static PromptSet load(const std::filesystem::path& dir, std::string lead_id = "lead_system",
                        std::string subagent_id = "subagent_system");

  [[nodiscard]] std::vector<std::string> ids() const { return {lead_id, subagent_id}; }
};

struct AgentRole {
  AgentKind kind = AgentKind::Lead;
  std::string system_prompt_id;
  std::string system_prompt;
  std::string task_text;

  static AgentRole lead(const PromptSet& prompts, std::string query);
  static AgentRole subagent(const PromptSet& prompts, std::string subtask);
};

// Tool calls found in one output. `error` is set when extraction failed; the
// agent sees it as the turn's tool result. No calls and no error means the
// turn is terminal.
struct Extraction {
  std::vector<ToolCall> calls;
  std::optional<std::string> error;

  [[nodiscard]] bool terminal() const noexcept { return calls.empty() && !error; }
};

// Parses <tool_call>{...}</tool_call> blocks outside think spans. The lead uses
// its last block; a subagent may issue several search/access calls at once.
[[nodiscard]] Extraction extract_tool_calls(std::string_view output, AgentKind kind, const Limits& limits);

// Removes <think>...</think> spans. An unclosed <think> runs to the end of the
// text, and a </think> with no opener drops everything before it.
[[nodiscard]] std::string remove_think(std::string_view text);

// Think-stripped subagent final outputs in spawn order, each under a
// "[Sub-agent k]" label, separated by blank lines.
[[nodiscard]] std::string strip_think(const std::vector<std::string>& outputs);

// Tool results of one subagent turn joined in call order.
[[nodiscard]] std::string join_tool_results(const std::vector<ToolCall>& calls,
                                            const std::vector<std::string>& results);

// Message sequence [p, q, o^1, tcr^1, ...] for the role and recorded history.
[[nodiscard]] std::vector<Message> build_messages(const AgentRole& role, const std::vector<Turn>& history);

// Compact, byte-stable JSON of a message sequence.
[[nodiscard]] std::string serialize_state(const std::vector<Message>& messages);

using TokenCounter = std::function<std::size_t(std::string_view)>;

struct State {
  std::vector<Message> messages;
  std::string serialized;
  std::string hash;
  std::size_t tokens = 0;  // sum of message content tokens
};

// Builds and measures the state; throws ContextOverflow above max_context_tokens.
[[nodiscard]] State build_state(const AgentRole& role, const std::vector<Turn>& history, const Limits& limits,
                                const TokenCounter& count_tokens);

// Refills Turn::state of a rollout read from JSONL and checks every hash.
// Throws FormatError on a mismatch.
void restore_states(Rollout& rollout, const PromptSet& prompts);

enum class Schedule {
  Threaded,  // subagents and tool calls run on their own threads
  Serial,    // spawn order, one at a time
  Reverse,   // reverse spawn order, one at a time
};

// Hooks for tests; called from worker threads, so implementations must be
// thread-safe.
class RolloutObserver {
 public:
  virtual ~RolloutObserver() = default;
  virtual void on_state_built(std::size_t /*agent_index*/, std::size_t /*turn*/, const State& /*state*/) {}
  virtual void on_agent_finished(std::size_t /*agent_index*/, Termination /*status*/) {}
};

struct OrchestratorOptions {
  Limits limits;
  SamplingParams sampling;
  Schedule schedule = Schedule::Threaded;
  std::size_t jitter_us = 0;  // random sleep before each subagent turn (threaded only)
  std::string config_hash;
  bool record_timestamps = false;
};

struct RolloutRequest {
  std::string query_id;
  std::string question;
  std::size_t rollout_index = 0;
  std::uint64_t seed = 0;
};

class Orchestrator {
 public:
  Orchestrator(PolicyBackend& policy, ToolService& tools, PromptSet prompts, OrchestratorOptions options);

  [[nodiscard]] Rollout run(const RolloutRequest& request, RolloutObserver* observer = nullptr) const;

  [[nodiscard]] const OrchestratorOptions& options() const noexcept { return options_; }
  [[nodiscard]] const PromptSet& prompts() const noexcept { return prompts_; }

 private:
  struct AgentRun;
  void run_agent(AgentRun& run) const;
  [[nodiscard]] std::string run_tools(const std::vector<ToolCall>& calls) const;

  PolicyBackend& policy_;
  ToolService& tools_;
  PromptSet prompts_;
  OrchestratorOptions options_;
};

}  // namespace wideseek
