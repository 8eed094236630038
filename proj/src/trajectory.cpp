#include "wideseek/trajectory.hpp"

#include <numeric>

#include "wideseek/errors.hpp"

namespace wideseek {

using nlohmann::json;

std::string_view to_string(AgentKind kind) noexcept {
  return kind == AgentKind::Lead ? "lead" : "subagent";
}

AgentKind agent_kind_from_string(std::string_view s) {
  if (s == "lead") return AgentKind::Lead;
  if (s == "subagent") return AgentKind::Subagent;
  throw FormatError("unknown agent role '" + std::string(s) + "'");
}

std::string_view ToolCall::name() const noexcept {
  if (is<CreateSubAgents>()) return kCreateSubAgentsTool;
  if (is<Search>()) return kSearchTool;
  return kAccessTool;
}

std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::Answered: return "answered";
    case Termination::TurnLimit: return "turn_limit";
    case Termination::ContextOverflow: return "context_overflow";
    case Termination::MalformedToolLoop: return "malformed_tool_loop";
    case Termination::BackendError: return "backend_error";
  }
  return "answered";
}

Termination termination_from_string(std::string_view s) {
  for (auto t : {Termination::Answered, Termination::TurnLimit, Termination::ContextOverflow,
                 Termination::MalformedToolLoop, Termination::BackendError}) {
    if (to_string(t) == s) return t;
  }
  throw FormatError("unknown termination '" + std::string(s) + "'");
}

std::string_view to_string(FinishReason f) noexcept {
  return f == FinishReason::Stop ? "stop" : "length";
}

FinishReason finish_reason_from_string(std::string_view s) {
  if (s == "stop") return FinishReason::Stop;
  if (s == "length") return FinishReason::Length;
  throw FormatError("unknown finish reason '" + std::string(s) + "'");
}

json to_json(const ToolCall& call) {
  json args = json::object();
  if (const auto* c = std::get_if<CreateSubAgents>(&call.call)) {
    json subs = json::array();
    for (const auto& p : c->prompts) subs.push_back({{"prompt", p}});
    args["sub_agents"] = std::move(subs);
  } else if (const auto* s = std::get_if<Search>(&call.call)) {
    args["query"] = s->query;
  } else if (const auto* a = std::get_if<Access>(&call.call)) {
    args["url"] = a->url;
    args["query"] = a->query;
  }
  return json{{"name", call.name()}, {"arguments", std::move(args)}};
}

namespace {

ToolCall tool_call_from_json(const json& j) {
  ToolCall call;
  call.raw_json = j.dump();
  const std::string name = j.at("name").get<std::string>();
  const json& args = j.at("arguments");
  if (name == kCreateSubAgentsTool) {
    CreateSubAgents c;
    for (const auto& sub : args.at("sub_agents")) c.prompts.push_back(sub.at("prompt").get<std::string>());
    call.call = std::move(c);
  } else if (name == kSearchTool) {
    call.call = Search{args.at("query").get<std::string>()};
  } else if (name == kAccessTool) {
    call.call = Access{args.at("url").get<std::string>(), args.value("query", std::string{})};
  } else {
    throw FormatError("unknown tool '" + name + "' in trajectory record");
  }
  return call;
}

template <class T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json tool_calls_to_json(const std::vector<ToolCall>& calls) {
  if (calls.size() == 1) return to_json(calls.front());
  json arr = json::array();
  for (const auto& c : calls) arr.push_back(to_json(c));
  return arr;
}

json turn_to_json(const Turn& turn) {
  json tokens = json::array();
  for (const auto& t : turn.tokens) {
    json tok = {{"id", t.token_id}, {"logprob_old", t.logprob_old}};
    if (t.logprob_new) tok["logprob_new"] = *t.logprob_new;
    tokens.push_back(std::move(tok));
  }
  json j = {
      {"index", turn.index},
      {"state_hash", turn.state_hash},
      {"output_text", turn.output_text},
      {"tokens", std::move(tokens)},
      {"finish_reason", to_string(turn.finish)},
      {"tool_call_json", turn.tool_calls.empty() ? json(nullptr) : tool_calls_to_json(turn.tool_calls)},
      {"tool_result_text", optional_to_json(turn.tool_result)},
      {"termination", turn.termination ? json(to_string(*turn.termination)) : json(nullptr)},
  };
  if (turn.parse_error) j["parse_error"] = *turn.parse_error;
  return j;
}

Turn turn_from_json(const json& j) {
  Turn turn;
  turn.index = j.at("index").get<std::size_t>();
  turn.state_hash = j.at("state_hash").get<std::string>();
  turn.output_text = j.at("output_text").get<std::string>();
  for (const auto& t : j.at("tokens")) {
    TokenRecord rec;
    rec.token_id = t.at("id").get<std::int64_t>();
    rec.logprob_old = t.at("logprob_old").get<double>();
    if (auto it = t.find("logprob_new"); it != t.end() && !it->is_null()) rec.logprob_new = it->get<double>();
    turn.tokens.push_back(rec);
  }
  turn.finish = finish_reason_from_string(j.value("finish_reason", std::string("stop")));
  const json& calls = j.at("tool_call_json");
  if (calls.is_array()) {
    for (const auto& c : calls) turn.tool_calls.push_back(tool_call_from_json(c));
  } else if (calls.is_object()) {
    turn.tool_calls.push_back(tool_call_from_json(calls));
  }
  if (auto it = j.find("parse_error"); it != j.end() && !it->is_null()) turn.parse_error = it->get<std::string>();
  if (const json& r = j.at("tool_result_text"); !r.is_null()) turn.tool_result = r.get<std::string>();
  if (const json& t = j.at("termination"); !t.is_null()) {
    turn.termination = termination_from_string(t.get<std::string>());
  }
  return turn;
}

}  // namespace

std::string Turn::tool_call_json() const {
  if (tool_calls.empty()) return "null";
  return dump_json(tool_calls_to_json(tool_calls));
}

std::size_t AgentTrajectory::output_token_count() const noexcept {
  return std::accumulate(turns.begin(), turns.end(), std::size_t{0},
                         [](std::size_t acc, const Turn& t) { return acc + t.tokens.size(); });
}

json to_json(const RolloutMetadata& m) {
  json j = {
      {"tokenizer", m.tokenizer},
      {"config_hash", m.config_hash},
      {"prompt_ids", m.prompt_ids},
      {"tool_versions", m.tool_versions},
      {"seed", m.seed},
  };
  if (m.started_at) j["started_at"] = *m.started_at;
  if (m.finished_at) j["finished_at"] = *m.finished_at;
  return j;
}

RolloutMetadata metadata_from_json(const json& j) {
  RolloutMetadata m;
  m.tokenizer = j.value("tokenizer", std::string{});
  m.config_hash = j.value("config_hash", std::string{});
  m.prompt_ids = j.value("prompt_ids", std::vector<std::string>{});
  m.tool_versions = j.value("tool_versions", std::vector<std::string>{});
  m.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("started_at")) m.started_at = j.at("started_at").get<std::string>();
  if (j.contains("finished_at")) m.finished_at = j.at("finished_at").get<std::string>();
  return m;
}

json to_json(const Rollout& rollout) {
  json agents = json::array();
  for (const auto& a : rollout.agents) {
    json turns = json::array();
    for (const auto& t : a.turns) turns.push_back(turn_to_json(t));
    agents.push_back({
        {"agent_index", a.agent_index},
        {"role", to_string(a.kind)},
        {"parent_turn", optional_to_json(a.parent_turn)},
        {"task", a.task},
        {"termination", to_string(a.termination)},
        {"turns", std::move(turns)},
    });
  }
  return json{
      {"query_id", rollout.query_id},
      {"rollout_index", rollout.rollout_index},
      {"agents", std::move(agents)},
      {"outcome", {{"final_answer_text", rollout.final_answer_text}, {"status", to_string(rollout.status)}}},
      {"metadata", to_json(rollout.metadata)},
  };
}

Rollout rollout_from_json(const json& j) {
  try {
    Rollout r;
    r.query_id = j.at("query_id").get<std::string>();
    r.rollout_index = j.value("rollout_index", std::size_t{0});
    for (const auto& a : j.at("agents")) {
      AgentTrajectory traj;
      traj.agent_index = a.at("agent_index").get<std::size_t>();
      traj.kind = agent_kind_from_string(a.at("role").get<std::string>());
      if (const json& p = a.at("parent_turn"); !p.is_null()) traj.parent_turn = p.get<std::size_t>();
      traj.task = a.value("task", std::string{});
      traj.termination = termination_from_string(a.value("termination", std::string("answered")));
      for (const auto& t : a.at("turns")) traj.turns.push_back(turn_from_json(t));
      r.agents.push_back(std::move(traj));
    }
    const json& outcome = j.at("outcome");
    r.final_answer_text = outcome.at("final_answer_text").get<std::string>();
    r.status = termination_from_string(outcome.at("status").get<std::string>());
    if (j.contains("metadata")) r.metadata = metadata_from_json(j.at("metadata"));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed trajectory record: ") + e.what());
  }
}

std::string dump_json(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string to_jsonl_line(const Rollout& rollout) { return dump_json(to_json(rollout)); }

}  // namespace wideseek
