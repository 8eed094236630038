#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "wideseek/advantage.hpp"
#include "wideseek/buffer.hpp"
#include "wideseek/datapipe.hpp"
#include "wideseek/orchestrator.hpp"
#include "wideseek/policy.hpp"
#include "wideseek/reward.hpp"
#include "wideseek/tools.hpp"

namespace wideseek {

enum class BackendKind { Scripted, Remote };
enum class ToolMode { Local, Summarize, Remote };

struct BackendSpec {
  BackendKind kind = BackendKind::Scripted;
  std::filesystem::path script;  // scripted
  RemoteBackendConfig remote;
};

struct ToolSpec {
  ToolMode mode = ToolMode::Local;
  std::filesystem::path corpus;
  std::filesystem::path index;  // prebuilt artifact; preferred over corpus when set
  ToolParams params;
  RemoteToolConfig remote;
  std::string summarizer_prompt_id = "access_summarizer";
};

struct PromptSpec {
  std::filesystem::path dir;  // defaults to the installed data/prompts
  std::string lead_id = "lead_system";
  std::string subagent_id = "subagent_system";
};

// Everything a run depends on. Relative paths in a config file resolve against
// the file's directory.
struct RunConfig {
  std::uint64_t seed = 0;
  Limits limits;
  RewardConfig reward;
  AdvantageConfig advantage;
  SamplingParams sampling;
  BackendSpec backend;
  ToolSpec tools;
  PromptSpec prompts;
  RepetitionConfig repetition;
  PipelineConfig pipeline;
  Schedule schedule = Schedule::Threaded;
  std::size_t jitter_us = 0;
  bool record_timestamps = false;

  static RunConfig defaults();
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig from_file(const std::filesystem::path& path);

  // Throws ConfigError.
  void validate() const;

  // Every setting except filesystem paths, which vary between machines.
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string hash() const;
};

[[nodiscard]] std::filesystem::path default_prompt_dir();

[[nodiscard]] std::string_view to_string(Schedule s) noexcept;
[[nodiscard]] Schedule schedule_from_string(std::string_view s);

}  // namespace wideseek
