#include "wideseek/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <future>
#include <random>
#include <sstream>
#include <thread>

#include "wideseek/errors.hpp"
#include "wideseek/hash.hpp"

namespace wideseek {

using nlohmann::json;

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kCallOpen = "<tool_call>";
constexpr std::string_view kCallClose = "</tool_call>";
constexpr std::size_t kMaxConsecutiveParseFailures = 3;

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read prompt file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool allowed(std::string_view tool, AgentKind kind) {
  if (kind == AgentKind::Lead) return tool == kCreateSubAgentsTool;
  return tool == kSearchTool || tool == kAccessTool;
}

// One <tool_call> body -> ToolCall, or an error message for the agent.
std::variant<ToolCall, std::string> parse_call(std::string_view body, AgentKind kind, const Limits& limits) {
  std::string raw = trim(body);
  json j = json::parse(raw, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::string("tool call is not a valid JSON object");
  auto name_it = j.find("name");
  if (name_it == j.end() || !name_it->is_string()) return std::string("tool call lacks a string \"name\"");
  const std::string name = name_it->get<std::string>();
  if (name != kCreateSubAgentsTool && name != kSearchTool && name != kAccessTool) {
    return "unknown tool '" + name + "'";
  }
  if (!allowed(name, kind)) {
    return "tool '" + name + "' is not available to " +
           (kind == AgentKind::Lead ? std::string("the lead agent") : std::string("a sub-agent"));
  }
  json args = j.value("arguments", json::object());
  if (args.is_string()) args = json::parse(args.get<std::string>(), nullptr, false);
  if (args.is_discarded() || !args.is_object()) return std::string("tool call \"arguments\" must be a JSON object");

  ToolCall call;
  call.raw_json = raw;
  if (name == kCreateSubAgentsTool) {
    auto subs = args.find("sub_agents");
    if (subs == args.end() || !subs->is_array() || subs->empty()) {
      return std::string("create_sub_agents needs a non-empty \"sub_agents\" list");
    }
    if (subs->size() > limits.max_subagents_per_turn) {
      return "too many sub-agents: max " + std::to_string(limits.max_subagents_per_turn) +
             " subagents per turn, got " + std::to_string(subs->size()) + "; split the work across turns";
    }
    CreateSubAgents c;
    for (const auto& s : *subs) {
      if (!s.is_object() || !s.contains("prompt") || !s["prompt"].is_string() ||
          trim(s["prompt"].get<std::string>()).empty()) {
        return std::string("every sub_agents entry needs a non-empty string \"prompt\"");
      }
      c.prompts.push_back(s["prompt"].get<std::string>());
    }
    call.call = std::move(c);
  } else if (name == kSearchTool) {
    auto q = args.find("query");
    if (q == args.end() || !q->is_string() || trim(q->get<std::string>()).empty()) {
      return std::string("search needs a non-empty string \"query\"");
    }
    call.call = Search{q->get<std::string>()};
  } else {
    auto url = args.find("url");
    if (url == args.end() || !url->is_string() || url->get<std::string>().empty()) {
      return std::string("access needs a string \"url\"");
    }
    auto q = args.find("query");
    std::string query = (q != args.end() && q->is_string()) ? q->get<std::string>() : std::string{};
    call.call = Access{url->get<std::string>(), std::move(query)};
  }
  return call;
}

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void jitter(std::size_t max_us) {
  if (max_us == 0) return;
  thread_local std::mt19937 rng{std::random_device{}()};
  std::uniform_int_distribution<std::size_t> dist(0, max_us);
  std::this_thread::sleep_for(std::chrono::microseconds(dist(rng)));
}

// Runs fn(i) for i in [0, n) under the schedule; rethrows the first failure
// (in index order) after every task has finished.
template <class Fn>
void run_all(std::size_t n, Schedule schedule, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (schedule == Schedule::Threaded && n > 1) {
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (std::size_t i = 0; i < n; ++i) threads.emplace_back(guarded, i);
    for (auto& t : threads) t.join();
  } else if (schedule == Schedule::Reverse) {
    for (std::size_t i = n; i-- > 0;) guarded(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void Limits::validate() const {
  if (max_lead_turns == 0 || max_sub_turns == 0 || max_subagents_per_turn == 0 || max_parallel_tool_calls == 0 ||
      max_context_tokens == 0) {
    throw ConfigError("all limits must be positive");
  }
}

PromptSet PromptSet::load(const std::filesystem::path& dir, std::string lead_id, std::string subagent_id) {
  PromptSet p;
  p.lead_system = read_text(dir / (lead_id + ".txt"));
  p.subagent_system = read_text(dir / (subagent_id + ".txt"));
  p.lead_id = std::move(lead_id);
  p.subagent_id = std::move(subagent_id);
  return p;
}

AgentRole AgentRole::lead(const PromptSet& prompts, std::string query) {
  return {AgentKind::Lead, prompts.lead_id, prompts.lead_system, std::move(query)};
}

AgentRole AgentRole::subagent(const PromptSet& prompts, std::string subtask) {
  return {AgentKind::Subagent, prompts.subagent_id, prompts.subagent_system, std::move(subtask)};
}

std::string remove_think(std::string_view text) {
  std::string s(text);
  auto open = s.find(kThinkOpen);
  auto close = s.find(kThinkClose);
  if (close != std::string::npos && (open == std::string::npos || close < open)) {
    s.erase(0, close + kThinkClose.size());
  }
  while ((open = s.find(kThinkOpen)) != std::string::npos) {
    close = s.find(kThinkClose, open);
    if (close == std::string::npos) {
      s.erase(open);
    } else {
      s.erase(open, close + kThinkClose.size() - open);
    }
  }
  while ((close = s.find(kThinkClose)) != std::string::npos) s.erase(close, kThinkClose.size());
  return trim(s);
}

std::string strip_think(const std::vector<std::string>& outputs) {
  std::string out;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (k > 0) out += "\n\n";
    out += "[Sub-agent " + std::to_string(k + 1) + "]\n" + remove_think(outputs[k]);
  }
  return out;
}

std::string join_tool_results(const std::vector<ToolCall>& calls, const std::vector<std::string>& results) {
  if (results.size() == 1) return results.front();
  std::string out;
  for (std::size_t k = 0; k < results.size(); ++k) {
    if (k > 0) out += "\n\n";
    out += "[Tool call " + std::to_string(k + 1) + ": " + std::string(calls[k].name()) + "]\n" + results[k];
  }
  return out;
}

Extraction extract_tool_calls(std::string_view output, AgentKind kind, const Limits& limits) {
  Extraction ex;
  const std::string visible = remove_think(output);
  std::vector<std::string_view> bodies;
  std::string_view rest = visible;
  for (;;) {
    auto open = rest.find(kCallOpen);
    if (open == std::string_view::npos) break;
    auto close = rest.find(kCallClose, open);
    if (close == std::string_view::npos) {
      ex.error = "unterminated <tool_call> block";
      return ex;
    }
    bodies.push_back(rest.substr(open + kCallOpen.size(), close - open - kCallOpen.size()));
    rest = rest.substr(close + kCallClose.size());
  }
  if (bodies.empty()) return ex;
  if (kind == AgentKind::Lead) {
    bodies.erase(bodies.begin(), bodies.end() - 1);
  } else if (bodies.size() > limits.max_parallel_tool_calls) {
    ex.error = "too many tool calls: max " + std::to_string(limits.max_parallel_tool_calls) +
               " per turn, got " + std::to_string(bodies.size());
    return ex;
  }
  for (auto body : bodies) {
    auto parsed = parse_call(body, kind, limits);
    if (auto* err = std::get_if<std::string>(&parsed)) {
      ex.calls.clear();
      ex.error = std::move(*err);
      return ex;
    }
    ex.calls.push_back(std::move(std::get<ToolCall>(parsed)));
  }
  return ex;
}

std::vector<Message> build_messages(const AgentRole& role, const std::vector<Turn>& history) {
  std::vector<Message> messages;
  messages.reserve(2 + 2 * history.size());
  messages.push_back({"system", role.system_prompt});
  messages.push_back({"user", role.task_text});
  for (const auto& turn : history) {
    messages.push_back({"assistant", turn.output_text});
    if (turn.tool_result) messages.push_back({"tool", *turn.tool_result});
  }
  return messages;
}

std::string serialize_state(const std::vector<Message>& messages) {
  json arr = json::array();
  for (const auto& m : messages) arr.push_back({{"role", m.role}, {"content", m.content}});
  return dump_json(arr);
}

State build_state(const AgentRole& role, const std::vector<Turn>& history, const Limits& limits,
                  const TokenCounter& count_tokens) {
  State st;
  st.messages = build_messages(role, history);
  for (const auto& m : st.messages) st.tokens += count_tokens(m.content);
  if (st.tokens > limits.max_context_tokens) {
    throw ContextOverflow("state of " + std::to_string(st.tokens) + " tokens exceeds the " +
                          std::to_string(limits.max_context_tokens) + "-token context");
  }
  st.serialized = serialize_state(st.messages);
  st.hash = hash_hex(st.serialized);
  return st;
}

void restore_states(Rollout& rollout, const PromptSet& prompts) {
  for (auto& agent : rollout.agents) {
    AgentRole role = agent.kind == AgentKind::Lead ? AgentRole::lead(prompts, agent.task)
                                                   : AgentRole::subagent(prompts, agent.task);
    std::vector<Turn> history;
    for (auto& turn : agent.turns) {
      std::string state = serialize_state(build_messages(role, history));
      if (hash_hex(state) != turn.state_hash) {
        throw FormatError("state hash mismatch for " + rollout.query_id + " agent " +
                          std::to_string(agent.agent_index) + " turn " + std::to_string(turn.index) +
                          " (prompt files differ from the ones used at rollout time?)");
      }
      turn.state = std::move(state);
      history.push_back(turn);
    }
  }
}

struct Orchestrator::AgentRun {
  AgentRole role;
  AgentTrajectory* traj = nullptr;
  const RolloutRequest* request = nullptr;
  RolloutObserver* observer = nullptr;
  // Lead only: runs one batch of subagents to completion and returns their
  // think-stripped summaries.
  std::function<std::string(const std::vector<std::string>&, std::size_t)> spawn;
};

Orchestrator::Orchestrator(PolicyBackend& policy, ToolService& tools, PromptSet prompts, OrchestratorOptions options)
    : policy_(policy), tools_(tools), prompts_(std::move(prompts)), options_(std::move(options)) {
  options_.limits.validate();
}

std::string Orchestrator::run_tools(const std::vector<ToolCall>& calls) const {
  std::vector<std::string> results(calls.size());
  run_all(calls.size(), options_.schedule, [&](std::size_t k) {
    try {
      if (const auto* s = std::get_if<Search>(&calls[k].call)) {
        results[k] = tools_.search(s->query);
      } else if (const auto* a = std::get_if<Access>(&calls[k].call)) {
        results[k] = tools_.access(a->url, a->query);
      }
    } catch (const ToolUnavailable&) {
      throw;
    } catch (const Error& e) {
      results[k] = std::string("Error: ") + e.what();
    }
  });
  return join_tool_results(calls, results);
}

void Orchestrator::run_agent(AgentRun& run) const {
  AgentTrajectory& traj = *run.traj;
  const Limits& limits = options_.limits;
  const AgentKind kind = run.role.kind;
  const std::size_t max_turns = limits.turn_limit(kind);
  const TokenCounter counter = [this](std::string_view t) { return policy_.count_tokens(t); };

  auto finish = [&](Termination status) {
    traj.termination = status;
    if (!traj.turns.empty()) traj.turns.back().termination = status;
  };

  std::size_t parse_failures = 0;
  for (std::size_t t = 1; t <= max_turns; ++t) {
    if (kind == AgentKind::Subagent && options_.schedule == Schedule::Threaded) jitter(options_.jitter_us);

    State st;
    try {
      st = build_state(run.role, traj.turns, limits, counter);
    } catch (const ContextOverflow&) {
      finish(Termination::ContextOverflow);
      return;
    }
    if (run.observer) run.observer->on_state_built(traj.agent_index, t, st);

    GenerationRequest req;
    req.messages = st.messages;
    req.sampling = options_.sampling;
    req.role = std::string(kind == AgentKind::Lead ? kLeadRole : kSubagentRole);
    req.turn = t;
    req.query_id = run.request->query_id;
    req.state_hash = st.hash;
    req.seed = derive_seed(run.request->seed, run.request->rollout_index, traj.agent_index, t);
    const std::size_t remaining = limits.max_context_tokens - st.tokens;
    const bool capped_by_context = remaining < req.sampling.max_tokens;
    req.sampling.max_tokens = std::max<std::size_t>(1, std::min(req.sampling.max_tokens, remaining));

    Generation gen;
    try {
      gen = policy_.generate(req);
    } catch (const BackendUnavailable&) {
      finish(Termination::BackendError);
      return;
    }

    Turn turn;
    turn.index = t;
    turn.state = std::move(st.serialized);
    turn.state_hash = std::move(st.hash);
    turn.output_text = std::move(gen.text);
    turn.tokens = std::move(gen.tokens);
    turn.finish = gen.finish;

    if (gen.finish == FinishReason::Length && capped_by_context) {
      traj.turns.push_back(std::move(turn));
      finish(Termination::ContextOverflow);
      return;
    }

    Extraction ex = extract_tool_calls(turn.output_text, kind, limits);
    if (ex.error) {
      turn.parse_error = *ex.error;
      turn.tool_result = "Error: " + *ex.error;
      traj.turns.push_back(std::move(turn));
      if (++parse_failures >= kMaxConsecutiveParseFailures) {
        finish(Termination::MalformedToolLoop);
        return;
      }
      continue;
    }
    parse_failures = 0;

    if (ex.terminal()) {
      traj.turns.push_back(std::move(turn));
      finish(Termination::Answered);
      return;
    }

    turn.tool_calls = std::move(ex.calls);
    try {
      if (kind == AgentKind::Lead) {
        turn.tool_result = run.spawn(std::get<CreateSubAgents>(turn.tool_calls.front().call).prompts, t);
      } else {
        turn.tool_result = run_tools(turn.tool_calls);
      }
    } catch (const ToolUnavailable& e) {
      turn.tool_result = std::string("Error: ") + e.what();
      traj.turns.push_back(std::move(turn));
      finish(Termination::BackendError);
      return;
    }
    traj.turns.push_back(std::move(turn));
  }
  finish(Termination::TurnLimit);
}

Rollout Orchestrator::run(const RolloutRequest& request, RolloutObserver* observer) const {
  Rollout rollout;
  rollout.query_id = request.query_id;
  rollout.rollout_index = request.rollout_index;
  rollout.metadata.tokenizer = policy_.tokenizer_id();
  rollout.metadata.config_hash = options_.config_hash;
  rollout.metadata.prompt_ids = prompts_.ids();
  rollout.metadata.tool_versions = tools_.versions();
  rollout.metadata.seed = request.seed;
  if (options_.record_timestamps) rollout.metadata.started_at = utc_now();

  AgentTrajectory lead;
  lead.agent_index = 0;
  lead.kind = AgentKind::Lead;
  lead.task = request.question;

  std::vector<AgentTrajectory> subagents;
  AgentRun lead_run{AgentRole::lead(prompts_, request.question), &lead, &request, observer, {}};
  lead_run.spawn = [&](const std::vector<std::string>& prompts, std::size_t lead_turn) {
    std::vector<AgentTrajectory> batch(prompts.size());
    for (std::size_t k = 0; k < prompts.size(); ++k) {
      batch[k].agent_index = 1 + subagents.size() + k;
      batch[k].kind = AgentKind::Subagent;
      batch[k].parent_turn = lead_turn;
      batch[k].task = prompts[k];
    }
    // Wait-all barrier: run_all returns only when every subagent is terminal.
    run_all(batch.size(), options_.schedule, [&](std::size_t k) {
      AgentRun sub{AgentRole::subagent(prompts_, prompts[k]), &batch[k], &request, observer, {}};
      run_agent(sub);
      if (observer) observer->on_agent_finished(batch[k].agent_index, batch[k].termination);
    });
    std::vector<std::string> finals;
    for (const auto& sub : batch) finals.push_back(sub.turns.empty() ? std::string{} : sub.turns.back().output_text);
    for (auto& sub : batch) subagents.push_back(std::move(sub));
    return strip_think(finals);
  };

  run_agent(lead_run);
  if (observer) observer->on_agent_finished(0, lead.termination);

  rollout.status = lead.termination;
  if (lead.termination == Termination::Answered) rollout.final_answer_text = lead.turns.back().output_text;
  rollout.agents.push_back(std::move(lead));
  for (auto& sub : subagents) rollout.agents.push_back(std::move(sub));
  if (options_.record_timestamps) rollout.metadata.finished_at = utc_now();
  return rollout;
}

}  // namespace wideseek
