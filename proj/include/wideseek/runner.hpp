#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wideseek/advantage.hpp"
#include "wideseek/buffer.hpp"
#include "wideseek/config.hpp"
#include "wideseek/datapipe.hpp"
#include "wideseek/orchestrator.hpp"
#include "wideseek/reward.hpp"

namespace wideseek {

// Stamped into every artifact the CLI writes.
struct Provenance {
  std::string config_hash;
  std::vector<std::string> tool_versions;
  std::vector<std::string> prompt_ids;

  [[nodiscard]] nlohmann::json to_json() const;
};

// Config hash plus the scripted-backend script contents, which change outputs
// without touching the config.
[[nodiscard]] std::string run_hash(const RunConfig& cfg);

[[nodiscard]] std::unique_ptr<PolicyBackend> make_backend(const RunConfig& cfg);

// Backend, tools and prompts for a rollout run.
class Runtime {
 public:
  explicit Runtime(RunConfig cfg);

  [[nodiscard]] const RunConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] PolicyBackend& backend() noexcept { return *backend_; }
  [[nodiscard]] ToolService& tools() noexcept { return *tools_; }
  [[nodiscard]] const PromptSet& prompts() const noexcept { return prompts_; }
  [[nodiscard]] const Provenance& provenance() const noexcept { return provenance_; }
  [[nodiscard]] Orchestrator orchestrator();

 private:
  RunConfig cfg_;
  std::unique_ptr<PolicyBackend> backend_;
  std::shared_ptr<const Index> index_;
  std::unique_ptr<ToolService> tools_;
  PromptSet prompts_;
  Provenance provenance_;
};

// Seed of rollout `rollout_index` of query `query_id`.
[[nodiscard]] std::uint64_t rollout_seed(std::uint64_t base, std::string_view query_id);

// Fills logprob_new on every token from the backend. Turn states must be
// populated.
void rescore_rollout(Rollout& rollout, PolicyBackend& backend);

struct GroupOutcome {
  std::string query_id;
  std::vector<Rollout> rollouts;
  std::vector<RewardBreakdown> rewards;
  GroupAdvantages advantages;
  ObjectiveReport objective;
  std::vector<TrainingSample> samples;

  // Per-group summary without per-token terms.
  [[nodiscard]] nlohmann::json summary() const;
};

// rollout -> reward -> advantage -> rescore -> objective -> collect for one
// dataset instance.
[[nodiscard]] GroupOutcome run_group(Runtime& rt, const DatasetInstance& instance, const std::string& query_id,
                                     std::size_t group_size);

}  // namespace wideseek
