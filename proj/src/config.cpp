#include "wideseek/config.hpp"

#include <cstdlib>
#include <fstream>

#include "wideseek/errors.hpp"
#include "wideseek/hash.hpp"

#ifndef WIDESEEK_DEFAULT_PROMPT_DIR
#define WIDESEEK_DEFAULT_PROMPT_DIR "data/prompts"
#endif

namespace wideseek {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  auto it = j.find(key);
  if (it == j.end()) return empty;
  if (!it->is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return *it;
}

RetryPolicy retry_from_json(const json& j, RetryPolicy r) {
  r.max_attempts = j.value("max_attempts", r.max_attempts);
  r.base_delay = std::chrono::milliseconds(j.value("base_delay_ms", static_cast<long long>(r.base_delay.count())));
  r.max_delay = std::chrono::milliseconds(j.value("max_delay_ms", static_cast<long long>(r.max_delay.count())));
  return r;
}

json retry_to_json(const RetryPolicy& r) {
  return json{{"max_attempts", r.max_attempts},
              {"base_delay_ms", r.base_delay.count()},
              {"max_delay_ms", r.max_delay.count()}};
}

}  // namespace

std::filesystem::path default_prompt_dir() {
  if (const char* env = std::getenv("WIDESEEK_PROMPT_DIR"); env && *env) return env;
  return WIDESEEK_DEFAULT_PROMPT_DIR;
}

std::string_view to_string(Schedule s) noexcept {
  switch (s) {
    case Schedule::Threaded: return "threaded";
    case Schedule::Serial: return "serial";
    case Schedule::Reverse: return "reverse";
  }
  return "threaded";
}

Schedule schedule_from_string(std::string_view s) {
  for (auto v : {Schedule::Threaded, Schedule::Serial, Schedule::Reverse}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown schedule '" + std::string(s) + "'");
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.prompts.dir = default_prompt_dir();
  return c;
}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c = defaults();
  try {
    c.seed = j.value("seed", c.seed);
    c.schedule = schedule_from_string(j.value("schedule", std::string(to_string(c.schedule))));
    c.jitter_us = j.value("jitter_us", c.jitter_us);
    c.record_timestamps = j.value("record_timestamps", c.record_timestamps);

    const json& lim = section(j, "limits");
    c.limits.max_lead_turns = lim.value("max_lead_turns", c.limits.max_lead_turns);
    c.limits.max_sub_turns = lim.value("max_sub_turns", c.limits.max_sub_turns);
    c.limits.max_subagents_per_turn = lim.value("max_subagents_per_turn", c.limits.max_subagents_per_turn);
    c.limits.max_parallel_tool_calls = lim.value("max_parallel_tool_calls", c.limits.max_parallel_tool_calls);
    c.limits.max_context_tokens = lim.value("max_context_tokens", c.limits.max_context_tokens);

    c.reward = reward_config_from_json(section(j, "reward"));

    const json& adv = section(j, "advantage");
    c.advantage.eps_low = adv.value("eps_low", c.advantage.eps_low);
    c.advantage.eps_high = adv.value("eps_high", c.advantage.eps_high);
    c.advantage.eps_degenerate = adv.value("eps_degenerate", c.advantage.eps_degenerate);
    c.advantage.group_size = adv.value("group_size", j.value("group_size", c.advantage.group_size));

    const json& smp = section(j, "sampling");
    c.sampling.temperature = smp.value("temperature", c.sampling.temperature);
    c.sampling.top_p = smp.value("top_p", c.sampling.top_p);
    c.sampling.max_tokens = smp.value("max_tokens", c.sampling.max_tokens);

    const json& be = section(j, "backend");
    std::string kind = be.value("kind", std::string("scripted"));
    if (kind == "scripted") {
      c.backend.kind = BackendKind::Scripted;
    } else if (kind == "remote") {
      c.backend.kind = BackendKind::Remote;
    } else {
      throw ConfigError("backend.kind must be 'scripted' or 'remote'");
    }
    c.backend.script = resolve(base_dir, be.value("script", std::string{}));
    const json& rem = section(be, "remote");
    auto& rc = c.backend.remote;
    rc.base_url = rem.value("base_url", rc.base_url);
    rc.model = rem.value("model", rc.model);
    rc.api_key_env = rem.value("api_key_env", rc.api_key_env);
    rc.tokenizer = rem.value("tokenizer", rc.tokenizer);
    rc.max_in_flight = rem.value("max_in_flight", rc.max_in_flight);
    rc.timeout = std::chrono::seconds(rem.value("timeout_s", static_cast<long long>(rc.timeout.count())));
    rc.retry = retry_from_json(section(rem, "retry"), rc.retry);

    const json& tl = section(j, "tools");
    std::string mode = tl.value("mode", std::string("local"));
    if (mode == "local") {
      c.tools.mode = ToolMode::Local;
    } else if (mode == "summarize") {
      c.tools.mode = ToolMode::Summarize;
    } else if (mode == "remote") {
      c.tools.mode = ToolMode::Remote;
    } else {
      throw ConfigError("tools.mode must be 'local', 'summarize' or 'remote'");
    }
    c.tools.corpus = resolve(base_dir, tl.value("corpus", std::string{}));
    c.tools.index = resolve(base_dir, tl.value("index", std::string{}));
    c.tools.params.search_k = tl.value("search_k", c.tools.params.search_k);
    c.tools.params.snippet_window = tl.value("snippet_window", c.tools.params.snippet_window);
    c.tools.params.snippet_len = tl.value("snippet_len", c.tools.params.snippet_len);
    c.tools.params.access_len = tl.value("access_len", c.tools.params.access_len);
    c.tools.summarizer_prompt_id = tl.value("summarizer_prompt", c.tools.summarizer_prompt_id);
    const json& trem = section(tl, "remote");
    c.tools.remote.base_url = trem.value("base_url", c.tools.remote.base_url);
    c.tools.remote.api_key_env = trem.value("api_key_env", c.tools.remote.api_key_env);
    c.tools.remote.retry = retry_from_json(section(trem, "retry"), c.tools.remote.retry);

    const json& pr = section(j, "prompts");
    if (pr.contains("dir")) c.prompts.dir = resolve(base_dir, pr.at("dir").get<std::string>());
    c.prompts.lead_id = pr.value("lead", c.prompts.lead_id);
    c.prompts.subagent_id = pr.value("subagent", c.prompts.subagent_id);

    const json& rep = section(j, "repetition");
    c.repetition.window = rep.value("window", c.repetition.window);
    c.repetition.coverage = rep.value("coverage", c.repetition.coverage);
    c.repetition.max_ngram = rep.value("max_ngram", c.repetition.max_ngram);

    c.pipeline = pipeline_config_from_json(section(j, "pipeline"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return from_json(j, path.parent_path());
}

void RunConfig::validate() const {
  limits.validate();
  reward.validate();
  advantage.validate();
  repetition.validate();
  pipeline.validate();
  if (sampling.max_tokens == 0) throw ConfigError("sampling.max_tokens must be at least 1");
  if (sampling.temperature < 0 || sampling.top_p <= 0 || sampling.top_p > 1) {
    throw ConfigError("sampling temperature must be >= 0 and top_p in (0, 1]");
  }
  if (tools.params.search_k == 0 || tools.params.access_len == 0 || tools.params.snippet_window == 0) {
    throw ConfigError("tool window parameters must be positive");
  }
}

json RunConfig::to_json() const {
  return json{
      {"seed", seed},
      {"schedule", to_string(schedule)},
      {"limits",
       {{"max_lead_turns", limits.max_lead_turns},
        {"max_sub_turns", limits.max_sub_turns},
        {"max_subagents_per_turn", limits.max_subagents_per_turn},
        {"max_parallel_tool_calls", limits.max_parallel_tool_calls},
        {"max_context_tokens", limits.max_context_tokens}}},
      {"reward", wideseek::to_json(reward)},
      {"advantage",
       {{"eps_low", advantage.eps_low},
        {"eps_high", advantage.eps_high},
        {"eps_degenerate", advantage.eps_degenerate},
        {"group_size", advantage.group_size}}},
      {"sampling",
       {{"temperature", sampling.temperature}, {"top_p", sampling.top_p}, {"max_tokens", sampling.max_tokens}}},
      {"backend",
       {{"kind", backend.kind == BackendKind::Scripted ? "scripted" : "remote"},
        {"remote",
         {{"base_url", backend.remote.base_url},
          {"model", backend.remote.model},
          {"tokenizer", backend.remote.tokenizer},
          {"retry", retry_to_json(backend.remote.retry)}}}}},
      {"tools",
       {{"mode", tools.mode == ToolMode::Local ? "local" : tools.mode == ToolMode::Summarize ? "summarize" : "remote"},
        {"search_k", tools.params.search_k},
        {"snippet_window", tools.params.snippet_window},
        {"snippet_len", tools.params.snippet_len},
        {"access_len", tools.params.access_len}}},
      {"prompts", {{"lead", prompts.lead_id}, {"subagent", prompts.subagent_id}}},
      {"repetition",
       {{"window", repetition.window}, {"coverage", repetition.coverage}, {"max_ngram", repetition.max_ngram}}},
      {"pipeline", wideseek::to_json(pipeline)},
  };
}

// Scheduling does not change results, so it stays out of the hash.
std::string RunConfig::hash() const {
  json j = to_json();
  j.erase("schedule");
  return hash_hex(dump_json(j));
}

}  // namespace wideseek
