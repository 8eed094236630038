#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wideseek/trajectory.hpp"

namespace wideseek {

struct AdvantageConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;
  double eps_degenerate = 1e-8;
  std::size_t group_size = 8;

  void validate() const;  // throws ConfigError
};

struct GroupAdvantages {
  std::vector<double> rewards;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::vector<double> advantages;
  bool degenerate = false;  // std <= eps: every advantage is 0
};

// Throws GroupTooSmall when fewer than two rewards are given.
[[nodiscard]] GroupAdvantages normalize_group(const std::vector<double>& rewards,
                                              double eps_degenerate = 1e-8);

// Output-token counts per rollout, per agent, per turn.
using GroupShape = std::vector<std::vector<std::vector<std::size_t>>>;

[[nodiscard]] GroupShape shape_of(const std::vector<Rollout>& group);

// Every output token of agent a in rollout i gets weight[i][a]
// = (1/G)(1/N_i)(1/T_ia), where T_ia is the agent's total output tokens and
// N_i counts only agents with T_ia > 0. Zero-token agents get weight 0 and a
// warning. Prompt and tool-result tokens are never weighted.
struct WeightTable {
  std::vector<std::vector<double>> weight;       // per token, [rollout][agent]
  std::vector<std::vector<std::size_t>> tokens;  // T_ia
  std::vector<std::size_t> active_agents;        // N_i
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t group_size() const noexcept { return weight.size(); }
};

[[nodiscard]] WeightTable token_weights(const GroupShape& shape);
[[nodiscard]] WeightTable token_weights(const std::vector<Rollout>& group);

// min(r*A, clip(r, 1-eps_low, 1+eps_high)*A).
[[nodiscard]] double clipped_surrogate(double ratio, double adv, double eps_low, double eps_high) noexcept;

// True when the clipped branch is strictly smaller, i.e. the gradient is cut.
[[nodiscard]] bool clip_active(double ratio, double adv, double eps_low, double eps_high) noexcept;

// d surrogate / d logprob_new with r = exp(logprob_new - logprob_old):
// r*A where the unclipped branch is the minimum, 0 where the clip binds.
[[nodiscard]] double surrogate_gradient(double logprob_new, double logprob_old, double adv, double eps_low,
                                        double eps_high) noexcept;

struct TokenTerm {
  std::size_t rollout = 0;
  std::size_t agent = 0;
  std::size_t turn = 0;      // 1-based turn index
  std::size_t position = 0;  // token position within the turn
  double weight = 0.0;
  double ratio = 1.0;
  double advantage = 0.0;
  double term = 0.0;  // weight * clipped surrogate
  bool clipped = false;
};

struct ObjectiveReport {
  std::vector<TokenTerm> terms;
  double objective = 0.0;  // to maximize
  double clip_fraction = 0.0;
  std::size_t weighted_tokens = 0;
  std::vector<std::string> warnings;
};

// Throws MissingLogprob when a weighted token lacks logprob_new, and
// PreconditionError when advantages and group sizes disagree.
[[nodiscard]] ObjectiveReport group_objective(const std::vector<Rollout>& group,
                                              const GroupAdvantages& advantages,
                                              const AdvantageConfig& cfg);

[[nodiscard]] nlohmann::json to_json(const GroupAdvantages& g);
[[nodiscard]] nlohmann::json to_json(const TokenTerm& t);

}  // namespace wideseek
