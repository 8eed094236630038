#include "wideseek/runner.hpp"

#include <fstream>
#include <sstream>

#include "wideseek/errors.hpp"
#include "wideseek/hash.hpp"

namespace wideseek {

using nlohmann::json;

json Provenance::to_json() const {
  return json{{"config_hash", config_hash}, {"tool_versions", tool_versions}, {"prompt_ids", prompt_ids}};
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::shared_ptr<const Index> load_index(const ToolSpec& spec) {
  if (!spec.index.empty()) return std::make_shared<const Index>(Index::load(spec.index));
  if (!spec.corpus.empty()) return std::make_shared<const Index>(Index::build_from_file(spec.corpus));
  throw ConfigError("local tools need tools.index or tools.corpus");
}

}  // namespace

std::string run_hash(const RunConfig& cfg) {
  std::string h = cfg.hash();
  if (cfg.backend.kind == BackendKind::Scripted && !cfg.backend.script.empty()) {
    h = hash_hex(h + ":" + hash_hex(slurp(cfg.backend.script)));
  }
  return h;
}

std::unique_ptr<PolicyBackend> make_backend(const RunConfig& cfg) {
  if (cfg.backend.kind == BackendKind::Remote) return std::make_unique<RemoteBackend>(cfg.backend.remote);
  if (cfg.backend.script.empty()) throw ConfigError("scripted backend needs backend.script");
  return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(cfg.backend.script));
}

Runtime::Runtime(RunConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  backend_ = make_backend(cfg_);
  switch (cfg_.tools.mode) {
    case ToolMode::Local:
      index_ = load_index(cfg_.tools);
      tools_ = std::make_unique<LocalToolService>(index_, cfg_.tools.params);
      break;
    case ToolMode::Summarize: {
      index_ = load_index(cfg_.tools);
      std::string prompt = slurp(cfg_.prompts.dir / (cfg_.tools.summarizer_prompt_id + ".txt"));
      tools_ = std::make_unique<SummarizingToolService>(index_, cfg_.tools.params, *backend_, std::move(prompt),
                                                        cfg_.sampling);
      break;
    }
    case ToolMode::Remote:
      tools_ = std::make_unique<RemoteToolService>(cfg_.tools.remote);
      break;
  }
  prompts_ = PromptSet::load(cfg_.prompts.dir, cfg_.prompts.lead_id, cfg_.prompts.subagent_id);
  provenance_.config_hash = run_hash(cfg_);
  provenance_.tool_versions = tools_->versions();
  provenance_.prompt_ids = prompts_.ids();
  if (cfg_.tools.mode == ToolMode::Summarize) provenance_.prompt_ids.push_back(cfg_.tools.summarizer_prompt_id);
}

Orchestrator Runtime::orchestrator() {
  OrchestratorOptions opts;
  opts.limits = cfg_.limits;
  opts.sampling = cfg_.sampling;
  opts.schedule = cfg_.schedule;
  opts.jitter_us = cfg_.jitter_us;
  opts.config_hash = provenance_.config_hash;
  opts.record_timestamps = cfg_.record_timestamps;
  return Orchestrator(*backend_, *tools_, prompts_, opts);
}

std::uint64_t rollout_seed(std::uint64_t base, std::string_view query_id) {
  return derive_seed(base, fnv1a64(query_id));
}

void rescore_rollout(Rollout& rollout, PolicyBackend& backend) {
  for (auto& agent : rollout.agents) {
    for (auto& turn : agent.turns) {
      if (turn.tokens.empty()) continue;
      if (turn.state.empty()) throw PreconditionError("turn state missing; restore states before rescoring");
      RescoreRequest req;
      for (const auto& m : json::parse(turn.state)) {
        req.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
      }
      req.tokens = turn.tokens;
      req.role = agent.kind == AgentKind::Lead ? std::string(kLeadRole) : std::string(kSubagentRole);
      req.turn = turn.index;
      req.query_id = rollout.query_id;
      req.state_hash = turn.state_hash;
      req.seed = derive_seed(rollout.metadata.seed, rollout.rollout_index, agent.agent_index, turn.index);
      std::vector<double> lp = backend.rescore(req);
      if (lp.size() != turn.tokens.size()) {
        throw LengthMismatch("rescore returned " + std::to_string(lp.size()) + " logprobs for " +
                             std::to_string(turn.tokens.size()) + " tokens");
      }
      for (std::size_t k = 0; k < lp.size(); ++k) turn.tokens[k].logprob_new = lp[k];
    }
  }
}

json GroupOutcome::summary() const {
  json rewards_json = json::array();
  for (const auto& r : rewards) rewards_json.push_back(to_json(r));
  json statuses = json::array();
  for (const auto& r : rollouts) statuses.push_back(to_string(r.status));
  return json{{"query_id", query_id},
              {"rewards", std::move(rewards_json)},
              {"status", std::move(statuses)},
              {"advantages", to_json(advantages)},
              {"objective", objective.objective},
              {"clip_fraction", objective.clip_fraction},
              {"weighted_tokens", objective.weighted_tokens},
              {"samples", samples.size()},
              {"warnings", objective.warnings}};
}

GroupOutcome run_group(Runtime& rt, const DatasetInstance& instance, const std::string& query_id,
                       std::size_t group_size) {
  const GroundTruth gt = ground_truth(instance);
  Orchestrator orch = rt.orchestrator();
  GroupOutcome out;
  out.query_id = query_id;
  const std::uint64_t seed = rollout_seed(rt.config().seed, query_id);
  std::vector<double> totals;
  for (std::size_t i = 0; i < group_size; ++i) {
    out.rollouts.push_back(orch.run({query_id, instance.question, i, seed}));
    out.rewards.push_back(compute_reward(out.rollouts.back(), gt.table, gt.key, rt.config().reward));
    totals.push_back(out.rewards.back().total);
  }
  out.advantages = normalize_group(totals, rt.config().advantage.eps_degenerate);
  for (auto& r : out.rollouts) rescore_rollout(r, rt.backend());
  out.objective = group_objective(out.rollouts, out.advantages, rt.config().advantage);
  for (std::size_t i = 0; i < out.rollouts.size(); ++i) {
    auto s = collect(out.rollouts[i], out.rewards[i], rt.config().limits, rt.config().repetition);
    out.samples.insert(out.samples.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

}  // namespace wideseek
