#include "wideseek/advantage.hpp"

#include <algorithm>
#include <cmath>

#include "wideseek/errors.hpp"

namespace wideseek {

using nlohmann::json;

void AdvantageConfig::validate() const {
  if (eps_low <= 0 || eps_low >= 1) throw ConfigError("eps_low must be in (0, 1)");
  if (eps_high <= 0) throw ConfigError("eps_high must be positive");
  if (eps_degenerate < 0) throw ConfigError("eps_degenerate must be non-negative");
  if (group_size < 2) throw ConfigError("group size must be at least 2");
}

GroupAdvantages normalize_group(const std::vector<double>& rewards, double eps_degenerate) {
  if (rewards.size() < 2) {
    throw GroupTooSmall("group of " + std::to_string(rewards.size()) + " rollouts; need at least 2");
  }
  GroupAdvantages g;
  g.rewards = rewards;
  const double n = static_cast<double>(rewards.size());
  double sum = 0.0;
  for (double r : rewards) sum += r;
  g.mean = sum / n;
  double sq = 0.0;
  for (double r : rewards) sq += (r - g.mean) * (r - g.mean);
  g.std = std::sqrt(sq / n);
  g.advantages.assign(rewards.size(), 0.0);
  if (g.std <= eps_degenerate) {
    g.degenerate = true;
    return g;
  }
  for (std::size_t i = 0; i < rewards.size(); ++i) g.advantages[i] = (rewards[i] - g.mean) / g.std;
  return g;
}

GroupShape shape_of(const std::vector<Rollout>& group) {
  GroupShape shape;
  shape.reserve(group.size());
  for (const auto& rollout : group) {
    auto& agents = shape.emplace_back();
    for (const auto& agent : rollout.agents) {
      auto& turns = agents.emplace_back();
      for (const auto& turn : agent.turns) turns.push_back(turn.tokens.size());
    }
  }
  return shape;
}

WeightTable token_weights(const GroupShape& shape) {
  WeightTable w;
  const std::size_t g = shape.size();
  if (g == 0) return w;
  w.weight.resize(g);
  w.tokens.resize(g);
  w.active_agents.resize(g, 0);
  for (std::size_t i = 0; i < g; ++i) {
    const auto& agents = shape[i];
    w.tokens[i].resize(agents.size(), 0);
    for (std::size_t a = 0; a < agents.size(); ++a) {
      for (std::size_t n : agents[a]) w.tokens[i][a] += n;
      if (w.tokens[i][a] > 0) {
        ++w.active_agents[i];
      } else {
        w.warnings.push_back("rollout " + std::to_string(i) + " agent " + std::to_string(a) +
                             " produced no tokens; dropped from N_i");
      }
    }
    w.weight[i].assign(agents.size(), 0.0);
    if (w.active_agents[i] == 0) {
      w.warnings.push_back("rollout " + std::to_string(i) + " has no generated tokens");
      continue;
    }
    for (std::size_t a = 0; a < agents.size(); ++a) {
      if (w.tokens[i][a] == 0) continue;
      w.weight[i][a] = 1.0 / (static_cast<double>(g) * static_cast<double>(w.active_agents[i]) *
                              static_cast<double>(w.tokens[i][a]));
    }
  }
  return w;
}

WeightTable token_weights(const std::vector<Rollout>& group) { return token_weights(shape_of(group)); }

double clipped_surrogate(double ratio, double adv, double eps_low, double eps_high) noexcept {
  const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
  return std::min(ratio * adv, clipped * adv);
}

bool clip_active(double ratio, double adv, double eps_low, double eps_high) noexcept {
  const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
  return clipped * adv < ratio * adv;
}

double surrogate_gradient(double logprob_new, double logprob_old, double adv, double eps_low,
                          double eps_high) noexcept {
  const double ratio = std::exp(logprob_new - logprob_old);
  return clip_active(ratio, adv, eps_low, eps_high) ? 0.0 : ratio * adv;
}

ObjectiveReport group_objective(const std::vector<Rollout>& group, const GroupAdvantages& advantages,
                                const AdvantageConfig& cfg) {
  if (advantages.advantages.size() != group.size()) {
    throw PreconditionError("advantages cover " + std::to_string(advantages.advantages.size()) +
                            " rollouts but the group has " + std::to_string(group.size()));
  }
  ObjectiveReport report;
  WeightTable weights = token_weights(group);
  report.warnings = weights.warnings;
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const double adv = advantages.advantages[i];
    for (std::size_t a = 0; a < group[i].agents.size(); ++a) {
      const double w = weights.weight[i][a];
      if (w == 0.0) continue;
      for (const auto& turn : group[i].agents[a].turns) {
        for (std::size_t j = 0; j < turn.tokens.size(); ++j) {
          const TokenRecord& tok = turn.tokens[j];
          if (!tok.logprob_new) {
            throw MissingLogprob("rollout " + std::to_string(i) + " agent " + std::to_string(a) + " turn " +
                                 std::to_string(turn.index) + " token " + std::to_string(j) +
                                 " has no logprob_new");
          }
          TokenTerm t;
          t.rollout = i;
          t.agent = a;
          t.turn = turn.index;
          t.position = j;
          t.weight = w;
          t.ratio = std::exp(*tok.logprob_new - tok.logprob_old);
          t.advantage = adv;
          t.clipped = clip_active(t.ratio, adv, cfg.eps_low, cfg.eps_high);
          t.term = w * clipped_surrogate(t.ratio, adv, cfg.eps_low, cfg.eps_high);
          report.objective += t.term;
          if (t.clipped) ++clipped;
          report.terms.push_back(t);
        }
      }
    }
  }
  report.weighted_tokens = report.terms.size();
  report.clip_fraction =
      report.weighted_tokens == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(report.weighted_tokens);
  return report;
}

json to_json(const GroupAdvantages& g) {
  return json{{"rewards", g.rewards}, {"mean", g.mean},
              {"std", g.std},         {"advantages", g.advantages},
              {"degenerate", g.degenerate}};
}

json to_json(const TokenTerm& t) {
  return json{{"rollout", t.rollout}, {"agent", t.agent}, {"turn", t.turn},       {"position", t.position},
              {"weight", t.weight},   {"ratio", t.ratio}, {"advantage", t.advantage}, {"term", t.term},
              {"clipped", t.clipped}};
}

}  // namespace wideseek
