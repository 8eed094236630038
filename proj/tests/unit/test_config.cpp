#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "builders.hpp"
#include "wideseek/config.hpp"
#include "wideseek/errors.hpp"
#include "wideseek/runner.hpp"

using namespace wideseek;
using nlohmann::json;

TEST(RunConfig, DefaultsMatchTrainingConstants) {
  RunConfig c = RunConfig::defaults();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.advantage.eps_low, 0.2);
  EXPECT_EQ(c.advantage.eps_high, 0.28);
  EXPECT_EQ(c.advantage.group_size, 8u);
  EXPECT_EQ(c.reward.r_format_bonus, 0.1);
  EXPECT_EQ(c.reward.r_tool_bonus, 0.05);
  EXPECT_EQ(c.reward.alpha_len, 0.1);
  EXPECT_EQ(c.reward.len_threshold, 3000u);
  EXPECT_EQ(c.reward.len_max, 5000u);
  EXPECT_EQ(c.limits.max_lead_turns, 10u);
  EXPECT_EQ(c.limits.max_sub_turns, 20u);
  EXPECT_EQ(c.limits.max_subagents_per_turn, 10u);
  EXPECT_EQ(c.limits.max_parallel_tool_calls, 5u);
  EXPECT_EQ(c.limits.max_context_tokens, 32768u);
  EXPECT_EQ(c.sampling.temperature, 1.0);
  EXPECT_EQ(c.sampling.top_p, 1.0);
}

TEST(RunConfig, FromFileResolvesRelativePaths) {
  RunConfig c = RunConfig::from_file(fixture::path("golden.json"));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.advantage.group_size, 4u);
  EXPECT_EQ(c.backend.kind, BackendKind::Scripted);
  EXPECT_EQ(std::filesystem::weakly_canonical(c.backend.script),
            std::filesystem::weakly_canonical(fixture::path("golden_script.json")));
  EXPECT_TRUE(std::filesystem::exists(c.tools.corpus));
  EXPECT_TRUE(std::filesystem::exists(c.prompts.dir / "lead_system.txt"));
}

TEST(RunConfig, HashIgnoresPathsButNotSettings) {
  RunConfig a = RunConfig::from_file(fixture::path("golden.json"));
  RunConfig b = a;
  b.tools.corpus = "/elsewhere/corpus.jsonl";
  b.prompts.dir = "/elsewhere/prompts";
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 8;
  EXPECT_NE(a.hash(), b.hash());
  RunConfig c = a;
  c.reward.len_threshold = 2000;
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(RunConfig::from_json(a.to_json()).hash(), a.hash());
}

TEST(RunConfig, RunHashCoversScript) {
  RunConfig a = fixture::config("golden.json");
  RunConfig b = a;
  b.backend.script = fixture::path("desk_script.json");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(run_hash(a), run_hash(b));
}

TEST(RunConfig, Errors) {
  EXPECT_THROW((void)RunConfig::from_json(json{{"seed", "x"}}), ConfigError);
  EXPECT_THROW((void)RunConfig::from_json(json{{"schedule", "sideways"}}), ConfigError);
  EXPECT_THROW((void)RunConfig::from_json(json{{"advantage", {{"eps_low", -1}}}}), ConfigError);
  EXPECT_THROW((void)RunConfig::from_json(json{{"limits", {{"max_lead_turns", 0}}}}), ConfigError);
  EXPECT_THROW((void)RunConfig::from_file("/nonexistent/cfg.json"), IoError);
  EXPECT_EQ(schedule_from_string(to_string(Schedule::Reverse)), Schedule::Reverse);
}

TEST(Runtime, ProvenanceAndGroupRun) {
  Runtime rt(fixture::config("desk.json"));
  const Provenance& p = rt.provenance();
  EXPECT_EQ(p.config_hash, run_hash(rt.config()));
  EXPECT_EQ(p.prompt_ids, (std::vector<std::string>{"lead_system", "subagent_system"}));
  ASSERT_EQ(p.tool_versions.size(), 3u);
  json j = p.to_json();
  EXPECT_TRUE(j.contains("config_hash"));
  EXPECT_TRUE(j.contains("tool_versions"));
  EXPECT_TRUE(j.contains("prompt_ids"));

  auto ds = load_dataset(fixture::path("desk_dataset.json"));
  GroupOutcome g = run_group(rt, ds[0], instance_id(ds[0], 0), 4);
  EXPECT_EQ(g.rollouts.size(), 4u);
  EXPECT_EQ(g.rewards.size(), 4u);
  EXPECT_EQ(g.advantages.advantages.size(), 4u);
  for (const auto& r : g.rollouts) {
    EXPECT_EQ(r.metadata.config_hash, p.config_hash);
    for (const auto& a : r.agents)
      for (const auto& t : a.turns)
        for (const auto& tok : t.tokens) EXPECT_TRUE(tok.logprob_new.has_value());
  }
  GroupOutcome again = run_group(rt, ds[0], instance_id(ds[0], 0), 4);
  EXPECT_EQ(again.summary(), g.summary());
}
