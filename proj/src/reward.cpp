#include "wideseek/reward.hpp"

#include <algorithm>

#include "wideseek/errors.hpp"

namespace wideseek {

using nlohmann::json;

std::string_view to_string(LengthTarget t) noexcept {
  switch (t) {
    case LengthTarget::LeadFinalTurn: return "lead_final_turn";
    case LengthTarget::LeadTotal: return "lead_total";
    case LengthTarget::AllAgentsTotal: return "all_agents_total";
  }
  return "lead_final_turn";
}

LengthTarget length_target_from_string(std::string_view s) {
  for (auto t : {LengthTarget::LeadFinalTurn, LengthTarget::LeadTotal, LengthTarget::AllAgentsTotal}) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("unknown length_target '" + std::string(s) + "'");
}

void RewardConfig::validate() const {
  if (r_format_bonus < 0 || r_tool_bonus < 0 || alpha_len < 0) {
    throw ConfigError("reward bonuses and alpha_len must be non-negative");
  }
  if (len_threshold >= len_max) throw ConfigError("reward len_threshold must be below len_max");
}

FormatCheck check_format(std::string_view final_text) {
  FormatCheck out;
  auto block = extract_answer_block(final_text);
  if (!block) {
    out.error = "no ```markdown answer block";
    return out;
  }
  try {
    out.table = parse_table(*block, ParseMode::Strict);
    out.valid = true;
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

double length_penalty(std::size_t length, const RewardConfig& cfg) {
  if (length <= cfg.len_threshold) return 0.0;
  const double span = static_cast<double>(cfg.len_max - cfg.len_threshold);
  const double frac = static_cast<double>(length - cfg.len_threshold) / span;
  return cfg.alpha_len * std::clamp(frac, 0.0, 1.0);
}

std::size_t response_length(const Rollout& rollout, LengthTarget target) {
  if (rollout.agents.empty()) return 0;
  switch (target) {
    case LengthTarget::LeadFinalTurn: {
      const auto& turns = rollout.lead().turns;
      return turns.empty() ? 0 : turns.back().tokens.size();
    }
    case LengthTarget::LeadTotal:
      return rollout.lead().output_token_count();
    case LengthTarget::AllAgentsTotal: {
      std::size_t n = 0;
      for (const auto& a : rollout.agents) n += a.output_token_count();
      return n;
    }
  }
  return 0;
}

bool used_access(const Rollout& rollout) {
  for (const auto& agent : rollout.agents) {
    for (const auto& turn : agent.turns) {
      for (const auto& call : turn.tool_calls) {
        if (call.is<Access>()) return true;
      }
    }
  }
  return false;
}

RewardBreakdown compute_reward(const Rollout& rollout, const Table& gt, const UniqueKey& key,
                               const RewardConfig& cfg) {
  RewardBreakdown r;
  r.length_used = response_length(rollout, cfg.length_target);
  r.r_len = length_penalty(r.length_used, cfg);
  r.r_tool = used_access(rollout) ? cfg.r_tool_bonus : 0.0;

  FormatCheck fmt = check_format(rollout.final_answer_text);
  r.format_valid = fmt.valid;
  if (!fmt.valid) return r;  // total stays 0

  r.r_ans = item_f1(*fmt.table, gt, key).f1;
  r.r_format = cfg.r_format_bonus;
  r.total = r.r_ans + r.r_format + r.r_tool - r.r_len;
  return r;
}

json to_json(const RewardBreakdown& r) {
  return json{{"r_ans", r.r_ans},   {"r_format", r.r_format},         {"r_tool", r.r_tool},
              {"r_len", r.r_len},   {"total", r.total},               {"format_valid", r.format_valid},
              {"length_used", r.length_used}};
}

json to_json(const RewardConfig& cfg) {
  return json{{"r_format_bonus", cfg.r_format_bonus}, {"r_tool_bonus", cfg.r_tool_bonus},
              {"alpha_len", cfg.alpha_len},           {"len_threshold", cfg.len_threshold},
              {"len_max", cfg.len_max},               {"length_target", to_string(cfg.length_target)}};
}

RewardConfig reward_config_from_json(const json& j) {
  RewardConfig cfg;
  cfg.r_format_bonus = j.value("r_format_bonus", cfg.r_format_bonus);
  cfg.r_tool_bonus = j.value("r_tool_bonus", cfg.r_tool_bonus);
  cfg.alpha_len = j.value("alpha_len", cfg.alpha_len);
  cfg.len_threshold = j.value("len_threshold", cfg.len_threshold);
  cfg.len_max = j.value("len_max", cfg.len_max);
  if (j.contains("length_target")) cfg.length_target = length_target_from_string(j.at("length_target").get<std::string>());
  cfg.validate();
  return cfg;
}

}  // namespace wideseek
