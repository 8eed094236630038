#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "wideseek/metrics.hpp"
#include "wideseek/tabletext.hpp"
#include "wideseek/trajectory.hpp"

namespace wideseek {

// Which tokens count toward the length penalty's L.
enum class LengthTarget {
  LeadFinalTurn,  // output tokens of the lead's last turn
  LeadTotal,      // all lead output tokens
  AllAgentsTotal  // all output tokens of every agent
};

[[nodiscard]] std::string_view to_string(LengthTarget t) noexcept;
[[nodiscard]] LengthTarget length_target_from_string(std::string_view s);

struct RewardConfig {
  double r_format_bonus = 0.1;
  double r_tool_bonus = 0.05;
  double alpha_len = 0.1;
  std::size_t len_threshold = 3000;
  std::size_t len_max = 5000;
  LengthTarget length_target = LengthTarget::LeadFinalTurn;

  // Throws ConfigError.
  void validate() const;
};

struct FormatCheck {
  bool valid = false;
  std::optional<Table> table;
  std::string error;  // why the format is invalid
};

// Valid iff a ```markdown block exists and parses as a strict table.
[[nodiscard]] FormatCheck check_format(std::string_view final_text);

[[nodiscard]] double length_penalty(std::size_t length, const RewardConfig& cfg);

[[nodiscard]] std::size_t response_length(const Rollout& rollout, LengthTarget target);

// True when any agent issued at least one access call.
[[nodiscard]] bool used_access(const Rollout& rollout);

struct RewardBreakdown {
  double r_ans = 0.0;
  double r_format = 0.0;
  double r_tool = 0.0;
  double r_len = 0.0;
  double total = 0.0;
  bool format_valid = false;
  std::size_t length_used = 0;
};

[[nodiscard]] RewardBreakdown compute_reward(const Rollout& rollout, const Table& gt, const UniqueKey& key,
                                             const RewardConfig& cfg);

[[nodiscard]] nlohmann::json to_json(const RewardBreakdown& r);
[[nodiscard]] nlohmann::json to_json(const RewardConfig& cfg);
[[nodiscard]] RewardConfig reward_config_from_json(const nlohmann::json& j);

}  // namespace wideseek
