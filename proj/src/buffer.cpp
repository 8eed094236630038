#include "wideseek/buffer.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "wideseek/errors.hpp"

namespace wideseek {

using nlohmann::json;

void RepetitionConfig::validate() const {
  if (window == 0 || max_ngram == 0) throw ConfigError("repetition window and max_ngram must be positive");
  if (coverage <= 0 || coverage > 1) throw ConfigError("repetition coverage must be in (0, 1]");
}

bool detect_repetition(const std::vector<std::int64_t>& tokens, const RepetitionConfig& cfg) {
  const std::size_t len = std::min(cfg.window, tokens.size());
  if (len < 2) return false;
  const std::int64_t* w = tokens.data() + (tokens.size() - len);
  const double needed = cfg.coverage * static_cast<double>(len);
  for (std::size_t n = 1; n <= cfg.max_ngram && 2 * n <= len; ++n) {
    // Maximal runs of positions i with w[i] == w[i+n]; a run of r matches
    // spans a periodic stretch of r + n tokens.
    std::size_t run = 0;
    for (std::size_t i = 0; i + n < len; ++i) {
      if (w[i] == w[i + n]) {
        ++run;
        const std::size_t span = run + n;
        if (span >= 2 * n && static_cast<double>(span) >= needed) return true;
      } else {
        run = 0;
      }
    }
  }
  return false;
}

bool detect_repetition(const std::vector<TokenRecord>& tokens, const RepetitionConfig& cfg) {
  std::vector<std::int64_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(t.token_id);
  return detect_repetition(ids, cfg);
}

std::string_view to_string(InclusionReason r) noexcept {
  switch (r) {
    case InclusionReason::Normal: return "normal";
    case InclusionReason::FormatPenalty: return "format_penalty";
    case InclusionReason::RepetitionPenalty: return "repetition_penalty";
    case InclusionReason::OverflowPenalty: return "overflow_penalty";
  }
  return "normal";
}

namespace {

bool within_limits(const AgentTrajectory& agent, const Limits& limits) {
  if (is_over_limit(agent.termination)) return false;
  return agent.turns.size() <= limits.turn_limit(agent.kind);
}

TrainingSample make_sample(const Rollout& rollout, const AgentTrajectory& agent, const Turn& turn, double reward,
                           InclusionReason reason) {
  TrainingSample s;
  s.query_id = rollout.query_id;
  s.rollout_index = rollout.rollout_index;
  s.agent_index = agent.agent_index;
  s.turn_index = turn.index;
  s.role = agent.kind;
  s.state = turn.state;
  s.state_hash = turn.state_hash;
  s.tokens = turn.tokens;
  s.reward = reward;
  s.reason = reason;
  return s;
}

}  // namespace

std::vector<TrainingSample> collect(const Rollout& rollout, const RewardBreakdown& reward, const Limits& limits,
                                    const RepetitionConfig& rep) {
  std::vector<TrainingSample> out;
  if (reward.format_valid) {
    for (const auto& agent : rollout.agents) {
      if (!within_limits(agent, limits) || agent.termination == Termination::BackendError) continue;
      for (const auto& turn : agent.turns) {
        out.push_back(make_sample(rollout, agent, turn, reward.total, InclusionReason::Normal));
      }
    }
    return out;
  }

  // Invalid format. Keyed by (agent, turn) so the lead's final turn keeps its
  // format_penalty reason when the lead is also over the limit.
  std::map<std::pair<std::size_t, std::size_t>, TrainingSample> picked;
  for (std::size_t a = 0; a < rollout.agents.size(); ++a) {
    const auto& agent = rollout.agents[a];
    if (within_limits(agent, limits) || agent.termination == Termination::BackendError) continue;
    std::vector<std::size_t> looping;
    for (std::size_t t = 0; t < agent.turns.size(); ++t) {
      if (detect_repetition(agent.turns[t].tokens, rep)) looping.push_back(t);
    }
    if (!looping.empty()) {
      for (std::size_t t : looping) {
        picked.insert_or_assign({a, t}, make_sample(rollout, agent, agent.turns[t], reward.total,
                                                    InclusionReason::RepetitionPenalty));
      }
    } else {
      for (std::size_t t = 0; t < agent.turns.size(); ++t) {
        picked.insert_or_assign({a, t}, make_sample(rollout, agent, agent.turns[t], reward.total,
                                                    InclusionReason::OverflowPenalty));
      }
    }
  }
  if (!rollout.agents.empty() && !rollout.lead().turns.empty()) {
    const auto& lead = rollout.lead();
    picked.insert_or_assign({0, lead.turns.size() - 1}, make_sample(rollout, lead, lead.turns.back(), reward.total,
                                                                    InclusionReason::FormatPenalty));
  }
  for (auto& [key, sample] : picked) out.push_back(std::move(sample));
  return out;
}

json to_json(const TrainingSample& s) {
  json tokens = json::array();
  for (const auto& t : s.tokens) {
    json tok = {{"id", t.token_id}, {"logprob_old", t.logprob_old}};
    if (t.logprob_new) tok["logprob_new"] = *t.logprob_new;
    tokens.push_back(std::move(tok));
  }
  return json{
      {"query_id", s.query_id},
      {"rollout_index", s.rollout_index},
      {"agent_index", s.agent_index},
      {"turn_index", s.turn_index},
      {"role", to_string(s.role)},
      {"state", s.state},
      {"state_hash", s.state_hash},
      {"tokens", std::move(tokens)},
      {"reward", s.reward},
      {"inclusion_reason", to_string(s.reason)},
  };
}

BufferWriter::BufferWriter(const std::filesystem::path& path, bool append)
    : out_(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc)) {
  if (!out_) throw IoError("cannot open buffer file " + path.string());
}

void BufferWriter::write(const std::vector<TrainingSample>& samples) {
  std::lock_guard lock(mu_);
  for (const auto& s : samples) out_ << dump_json(to_json(s)) << '\n';
  out_.flush();
  if (!out_) throw IoError("buffer write failed");
  written_ += samples.size();
}

}  // namespace wideseek
