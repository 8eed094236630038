// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures (capped at 1).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "builders.hpp"
#include "oracles.hpp"
#include "wideseek/advantage.hpp"
#include "wideseek/buffer.hpp"
#include "wideseek/datapipe.hpp"
#include "wideseek/errors.hpp"
#include "wideseek/metrics.hpp"
#include "wideseek/reward.hpp"
#include "wideseek/runner.hpp"

using namespace wideseek;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failure messages of a criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) msgs_.push_back(what);
  }
  [[nodiscard]] Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    std::string d = std::to_string(failures_) + " failure(s): ";
    for (std::size_t i = 0; i < msgs_.size(); ++i) d += (i ? "; " : "") + msgs_[i];
    return {false, d};
  }

 private:
  std::size_t failures_ = 0;
  std::vector<std::string> msgs_;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// 1 ---------------------------------------------------------------------------

Outcome weight_conservation() {
  Check c;
  std::mt19937_64 rng(1001);
  const auto t0 = Clock::now();
  double worst = 0;
  std::size_t tokens_summed = 0;
  const int groups = 1000;
  for (int g = 0; g < groups; ++g) {
    const std::size_t G = 2 + rng() % 15;
    GroupShape shape(G);
    for (auto& roll : shape) {
      roll.resize(1 + rng() % 11);
      for (auto& agent : roll) {
        agent.resize(1 + rng() % 20);
        for (auto& t : agent) t = 1 + rng() % 4096;
      }
    }
    WeightTable w = token_weights(shape);
    double total = 0;
    for (std::size_t i = 0; i < G; ++i) {
      double sum = 0;  // one addition per token
      for (std::size_t a = 0; a < shape[i].size(); ++a) {
        const double wt = w.weight[i][a];
        if (wt < 0) c.expect(false, "negative weight");
        for (std::size_t n : shape[i][a]) {
          for (std::size_t k = 0; k < n; ++k) sum += wt;
          tokens_summed += n;
        }
      }
      worst = std::max(worst, std::abs(sum - 1.0 / double(G)));
      total += sum;
    }
    worst = std::max(worst, std::abs(total - 1.0));
    c.expect(std::abs(total - 1.0) <= 1e-9, "group total " + fmt(total));
  }
  const double secs = seconds_since(t0);
  c.expect(worst <= 1e-9, "max deviation " + fmt(worst));
  c.expect(secs < 10.0, "runtime " + fmt(secs) + " s");
  return c.done(std::to_string(groups) + " groups, " + std::to_string(tokens_summed) + " tokens, max |err| " +
                fmt(worst) + ", " + fmt(secs) + " s");
}

// 2 ---------------------------------------------------------------------------

Outcome advantage_normalization() {
  Check c;
  std::mt19937_64 rng(2002);
  std::uniform_real_distribution<double> u(0.0, 1.15);
  double worst_mean = 0, worst_std = 0;
  int normal = 0, degenerate = 0;
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> r(2 + rng() % 15);
    const int kind = i % 4;
    if (kind == 3) {
      std::fill(r.begin(), r.end(), u(rng));  // degenerate: identical rewards
      if (i % 8 == 3) r[0] += 1e-10;          // below eps_degenerate
    } else {
      for (auto& x : r) x = u(rng);
    }
    GroupAdvantages g = normalize_group(r);
    if (kind == 3) {
      ++degenerate;
      c.expect(g.degenerate, "expected degenerate flag");
      c.expect(std::all_of(g.advantages.begin(), g.advantages.end(), [](double a) { return a == 0.0; }),
               "degenerate group with nonzero advantage");
    } else {
      ++normal;
      c.expect(!g.degenerate, "unexpected degenerate flag");
      worst_mean = std::max(worst_mean, std::abs(oracle::mean(g.advantages)));
      worst_std = std::max(worst_std, std::abs(oracle::population_std(g.advantages) - 1.0));
    }
  }
  c.expect(worst_mean <= 1e-9, "mean deviation " + fmt(worst_mean));
  c.expect(worst_std <= 1e-9, "std deviation " + fmt(worst_std));
  return c.done(std::to_string(normal) + " groups |mean| <= " + fmt(worst_mean) + ", |std-1| <= " + fmt(worst_std) +
                "; " + std::to_string(degenerate) + " degenerate groups all zero");
}

// 3 ---------------------------------------------------------------------------

Outcome clip_behavior() {
  Check c;
  const double lo = 0.2, hi = 0.28;
  std::size_t grid = 0;
  for (int i = 0; i < 100; ++i) {
    const double r = 0.05 + 0.02 * i;  // 0.05 .. 2.03, crosses both clip edges
    for (int j = 0; j < 100; ++j) {
      const double a = -2.5 + 0.05 * j;
      const double direct = std::min(r * a, std::clamp(r, 1 - lo, 1 + hi) * a);
      c.expect(clipped_surrogate(r, a, lo, hi) == direct, "grid mismatch at r=" + fmt(r) + " A=" + fmt(a));
      c.expect(oracle::surrogate(r, a, lo, hi) == direct, "oracle disagrees at r=" + fmt(r));
      ++grid;
    }
  }

  std::mt19937_64 rng(3003);
  std::uniform_real_distribution<double> old_lp(-4.0, -0.01), delta(-0.7, 0.7), adv(-3.0, 3.0);
  const double h = 1e-6;
  double worst = 0;
  int checked = 0, flat = 0;
  while (checked < 1000) {
    const double lp_old = old_lp(rng), lp_new = lp_old + delta(rng), a = adv(rng);
    const double r = std::exp(lp_new - lp_old);
    if (std::abs(r - (1 - lo)) < 1e-4 || std::abs(r - (1 + hi)) < 1e-4 || std::abs(a) < 1e-3) continue;
    auto f = [&](double x) { return clipped_surrogate(std::exp(x - lp_old), a, lo, hi); };
    const double fd = (f(lp_new + h) - f(lp_new - h)) / (2 * h);
    const double g = surrogate_gradient(lp_new, lp_old, a, lo, hi);
    if (g == 0.0) {
      ++flat;
      c.expect(std::abs(fd) <= 1e-9, "clipped region has slope " + fmt(fd));
    } else {
      const double rel = std::abs(fd - g) / std::abs(g);
      worst = std::max(worst, rel);
      c.expect(rel <= 1e-5, "derivative rel err " + fmt(rel));
    }
    ++checked;
  }
  return c.done(std::to_string(grid) + "-point grid exact; " + std::to_string(checked) +
                " derivative checks (" + std::to_string(flat) + " in clipped region), max rel err " + fmt(worst));
}

// 4 ---------------------------------------------------------------------------

Outcome zero_objective() {
  Check c;
  std::mt19937_64 rng(4004);
  std::uniform_real_distribution<double> lp(-3.0, -0.001), u(0.0, 1.15);
  double worst = 0;
  const int groups = 300;
  for (int g = 0; g < groups; ++g) {
    const std::size_t G = 2 + rng() % 7;
    std::vector<Rollout> group;
    std::vector<double> rewards;
    for (std::size_t i = 0; i < G; ++i) {
      std::vector<std::vector<std::size_t>> tokens(1 + rng() % 4);
      for (auto& agent : tokens) {
        agent.resize(1 + rng() % 5);
        for (auto& t : agent) t = 1 + rng() % 300;
      }
      Rollout r = fixture::rollout(tokens, -0.5, i);
      for (auto& a : r.agents)
        for (auto& t : a.turns)
          for (auto& tok : t.tokens) tok.logprob_new = tok.logprob_old = lp(rng);
      group.push_back(std::move(r));
      rewards.push_back(u(rng));
    }
    GroupAdvantages adv = normalize_group(rewards);
    if (adv.degenerate) continue;
    ObjectiveReport rep = group_objective(group, adv, AdvantageConfig{});
    worst = std::max(worst, std::abs(rep.objective));
    c.expect(rep.clip_fraction == 0.0, "clip fraction " + fmt(rep.clip_fraction));
  }
  c.expect(worst <= 1e-9, "objective " + fmt(worst));
  return c.done(std::to_string(groups) + " on-policy groups, max |objective| " + fmt(worst));
}

// 5 ---------------------------------------------------------------------------

std::string fenced(const std::string& md) { return "```markdown\n" + md + "```"; }

Outcome reward_constants() {
  Check c;
  RewardConfig cfg;
  c.expect(cfg.r_format_bonus == 0.1 && cfg.r_tool_bonus == 0.05 && cfg.alpha_len == 0.1 &&
               cfg.len_threshold == 3000 && cfg.len_max == 5000,
           "default constants differ");
  const std::vector<std::string> h = {"K", "V"};
  Table gt = fixture::table(h, {{"k1", "a"}, {"k2", "b"}});
  UniqueKey key({"K"});

  Rollout half = fixture::answered(fenced(fixture::markdown(h, {{"k1", "a"}, {"k3", "z"}})), 2000, true);
  RewardBreakdown r1 = compute_reward(half, gt, key, cfg);
  c.expect(r1.r_ans == 0.5, "item F1 of the 0.65 case is " + fmt(r1.r_ans));
  c.expect(r1.total == 0.65, "0.65 case gave " + fmt(r1.total));

  Rollout prose = fixture::answered("k1 is a and k2 is b", 2000, true);
  RewardBreakdown r2 = compute_reward(prose, gt, key, cfg);
  c.expect(r2.total == 0.0 && !r2.format_valid, "invalid format gave " + fmt(r2.total));

  Rollout perfect = fixture::answered(fenced(fixture::markdown(h, {{"k1", "a"}, {"k2", "b"}})), 0, false);
  RewardBreakdown r3 = compute_reward(perfect, gt, key, cfg);
  c.expect(r3.total == 1.1, "1.1 case gave " + fmt(r3.total));

  c.expect(length_penalty(4000, cfg) == 0.05, "length_penalty(4000) = " + fmt(length_penalty(4000, cfg)));
  return c.done("0.65 / 0 / 1.1 reproduced exactly; length_penalty(4000) == 0.05");
}

// 6 ---------------------------------------------------------------------------

Outcome metrics_oracle() {
  Check c;
  std::mt19937 rng(6006);
  const std::vector<std::string> vals = {"x", "1,000", "1000", "Y.", "y"};
  int pairs = 0;
  for (; pairs < 1000; ++pairs) {
    const bool composite = rng() % 2;
    const std::vector<std::string> key = composite ? std::vector<std::string>{"K1", "K2"} : std::vector<std::string>{"K1"};
    std::vector<std::string> header = key;
    header.insert(header.end(), {"A", "B"});
    auto rows_for = [&](const std::vector<std::string>& hdr) {
      const std::size_t n = rng() % 6;  // 0..5 rows
      std::vector<std::vector<std::string>> rows;
      std::set<std::string> seen;
      for (int attempt = 0; rows.size() < n && attempt < 50; ++attempt) {
        std::vector<std::string> row;
        std::string k;
        for (const auto& col : hdr) {
          const bool is_key = std::find(key.begin(), key.end(), col) != key.end();
          row.push_back(is_key ? "k" + std::to_string(rng() % (composite ? 3 : 7)) : vals[rng() % vals.size()]);
          if (is_key) k += row.back() + "|";
        }
        if (seen.insert(k).second) rows.push_back(row);
      }
      return rows;
    };
    Table gt = fixture::table(header, rows_for(header));
    std::vector<std::string> pred_header = header;
    if (rng() % 8 == 0) pred_header.push_back("Extra");
    if (rng() % 8 == 0) pred_header.erase(pred_header.end() - (pred_header.back() == "Extra" ? 2 : 1));
    std::shuffle(pred_header.begin(), pred_header.end(), rng);
    Table pred = fixture::table(pred_header, rows_for(pred_header));

    const UniqueKey uk(key);
    const ScoreTriple item = item_f1(pred, gt, uk), row = row_f1(pred, gt, uk);
    const oracle::Counts bi = oracle::brute_item(pred, gt, key), br = oracle::brute_row(pred, gt, key);
    c.expect(item.f1 == bi.f1() && item.precision == bi.precision() && item.recall == bi.recall(),
             "item mismatch on pair " + std::to_string(pairs));
    c.expect(row.f1 == br.f1() && row.precision == br.precision() && row.recall == br.recall(),
             "row mismatch on pair " + std::to_string(pairs));
  }

  const std::vector<std::string> h = {"key", "A", "B"};
  Table wgt = fixture::table(h, {{"k1", "a1", "b1"}, {"k2", "a2", "b2"}});
  Table wpred = fixture::table(h, {{"k1", "a1", "bX"}, {"k2", "a2", "b2"}, {"k3", "a3", "b3"}});
  const double wi = item_f1(wpred, wgt, UniqueKey({"key"})).f1, wr = row_f1(wpred, wgt, UniqueKey({"key"})).f1;
  c.expect(wi == 2.0 / 3.0, "worked item F1 " + fmt(wi));
  c.expect(wr == 0.4, "worked row F1 " + fmt(wr));
  return c.done(std::to_string(pairs) + " random pairs match the brute-force oracle; worked pair item F1 2/3, row F1 0.4");
}

// 7 ---------------------------------------------------------------------------

Outcome fig7_fixture() {
  Check c;
  DatasetInstance inst = load_dataset(fixture::path("fig7.json")).at(0);
  Table t = parse_table(inst.answer);
  c.expect(t.row_count() == 13 && t.column_count() == 5,
           "shape " + std::to_string(t.row_count()) + "x" + std::to_string(t.column_count()));
  GroundTruth gt = ground_truth(inst);
  const ScoreTriple item = item_f1(gt.table, gt.table, gt.key), row = row_f1(gt.table, gt.table, gt.key);
  c.expect(item.f1 == 1.0, "item F1 " + fmt(item.f1));
  c.expect(row.f1 == 1.0, "row F1 " + fmt(row.f1));
  c.expect(success(gt.table, gt.table, gt.key), "success false");
  FormatCheck fc = check_format(fenced(inst.answer));
  c.expect(fc.valid && fc.table && *fc.table == gt.table, "fenced answer fails the format check");
  PipelineConfig cfg;
  cfg.consistency_threshold = 0.9;
  cfg.min_rows = 3;
  Verdict v = filter_pair(gt.table, gt.table, gt.key, cfg);
  c.expect(v.keep, "filter_pair dropped it: " + v.reason);
  try {
    validate_query(inst.question);
  } catch (const ValidationFailure& e) {
    c.expect(false, std::string("question fails validation: ") + e.what());
  }
  return c.done("13x5 table; item F1 = row F1 = 1; success; kept at 0.9 / 3");
}

// 8 ---------------------------------------------------------------------------

class Recorder : public RolloutObserver {
 public:
  struct Event {
    std::string kind;  // "state" or "done"
    std::size_t agent;
    std::size_t turn;
  };
  void on_state_built(std::size_t agent, std::size_t turn, const State& st) override {
    std::lock_guard lock(mu_);
    events.push_back({"state", agent, turn});
    max_tokens = std::max(max_tokens, st.tokens);
  }
  void on_agent_finished(std::size_t agent, Termination) override {
    std::lock_guard lock(mu_);
    events.push_back({"done", agent, 0});
  }
  std::vector<Event> events;
  std::size_t max_tokens = 0;

 private:
  std::mutex mu_;
};

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::istringstream in(fixture::read(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

// Context isolation, barrier, think hygiene and limits for one rollout.
void check_invariants(Check& c, const Rollout& r, const Recorder& rec, const PromptSet& prompts,
                      const Limits& limits) {
  const std::string q = r.lead().task;
  // isolation: a subagent's state is its own system prompt, task and turns
  for (std::size_t a = 1; a < r.agents.size(); ++a) {
    const auto& agent = r.agents[a];
    for (std::size_t t = 0; t < agent.turns.size(); ++t) {
      json msgs = json::parse(agent.turns[t].state);
      c.expect(msgs.size() >= 2 && msgs[0]["content"] == prompts.subagent_system && msgs[1]["content"] == agent.task,
               "subagent state does not start with [p_sub, q_a]");
      std::size_t k = 2;
      for (std::size_t h = 0; h < t; ++h) {
        c.expect(k < msgs.size() && msgs[k]["content"] == agent.turns[h].output_text, "foreign assistant message");
        ++k;
        if (agent.turns[h].tool_result) {
          c.expect(k < msgs.size() && msgs[k]["content"] == *agent.turns[h].tool_result, "foreign tool message");
          ++k;
        }
      }
      c.expect(k == msgs.size(), "extra messages in subagent state");
      c.expect(agent.turns[t].state.find(q) == std::string::npos || agent.task.find(q) != std::string::npos,
               "subagent state contains the lead's question");
      for (std::size_t b = 1; b < r.agents.size(); ++b) {
        if (b == a) continue;
        for (const auto& other : r.agents[b].turns) {
          auto pos = other.output_text.find("SECRET-");
          if (pos == std::string::npos) continue;
          auto marker = other.output_text.substr(pos, other.output_text.find_first_of(" .<\n", pos) - pos);
          c.expect(agent.turns[t].state.find(marker) == std::string::npos, "sibling marker " + marker + " leaked");
        }
      }
    }
  }
  // think hygiene: nothing from a think span reaches the lead
  for (const auto& t : r.lead().turns) {
    if (!t.tool_result) continue;
    c.expect(t.tool_result->find("<think>") == std::string::npos, "<think> in lead tool result");
    c.expect(t.tool_result->find("</think>") == std::string::npos, "</think> in lead tool result");
    c.expect(t.tool_result->find("SECRET-") == std::string::npos, "think content in lead tool result");
  }
  for (const auto& t : r.lead().turns) c.expect(t.state.find("SECRET-") == std::string::npos, "think content in lead state");
  // barrier: lead state t+1 comes after every subagent spawned at t is done
  std::map<std::size_t, std::size_t> done_at, lead_state_at;
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    const auto& e = rec.events[i];
    if (e.kind == "done") done_at[e.agent] = i;
    if (e.kind == "state" && e.agent == 0) lead_state_at[e.turn] = i;
  }
  for (std::size_t a = 1; a < r.agents.size(); ++a) {
    const std::size_t parent = *r.agents[a].parent_turn;
    c.expect(done_at.count(a) == 1, "subagent never finished");
    if (lead_state_at.count(parent + 1))
      c.expect(done_at[a] < lead_state_at[parent + 1], "lead resumed before subagent " + std::to_string(a) + " finished");
  }
  // limits
  c.expect(r.lead().turns.size() <= limits.max_lead_turns, "lead turn limit exceeded");
  std::map<std::size_t, std::size_t> spawned;
  for (std::size_t a = 1; a < r.agents.size(); ++a) {
    ++spawned[*r.agents[a].parent_turn];
    c.expect(r.agents[a].turns.size() <= limits.max_sub_turns, "subagent turn limit exceeded");
    for (const auto& t : r.agents[a].turns)
      c.expect(t.tool_calls.size() <= limits.max_parallel_tool_calls, "parallel tool-call limit exceeded");
  }
  for (const auto& [turn, n] : spawned) c.expect(n <= limits.max_subagents_per_turn, "subagent cap exceeded");
  c.expect(rec.max_tokens <= limits.max_context_tokens, "context limit exceeded");
}

Outcome golden_run() {
  Check c;
  const auto golden = read_lines(fixture::path("golden_trajectories.jsonl"));
  const auto ds = load_dataset(fixture::path("golden_dataset.json"));
  c.expect(golden.size() == ds.size(), "golden file has " + std::to_string(golden.size()) + " lines");

  struct Sched {
    Schedule s;
    std::size_t jitter;
    const char* name;
  };
  const std::vector<Sched> schedules = {{Schedule::Threaded, 0, "threaded"},
                                        {Schedule::Serial, 0, "serial"},
                                        {Schedule::Reverse, 0, "reverse"},
                                        {Schedule::Threaded, 400, "threaded+jitter"}};
  std::set<std::string> used;
  std::size_t compared = 0;
  for (int run = 0; run < 20; ++run) {
    const Sched& sc = schedules[run % schedules.size()];
    RunConfig cfg = fixture::config("golden.json");
    cfg.schedule = sc.s;
    cfg.jitter_us = sc.jitter;
    Runtime rt(cfg);
    Orchestrator orch = rt.orchestrator();
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::string id = instance_id(ds[i], i);
      Recorder rec;
      Rollout r = orch.run({id, ds[i].question, 0, rollout_seed(cfg.seed, id)}, &rec);
      const std::string line = to_jsonl_line(r);
      c.expect(i < golden.size() && line == golden[i], std::string("run ") + std::to_string(run) + " (" + sc.name +
                                                           ") differs from golden line " + std::to_string(i));
      ++compared;
      check_invariants(c, r, rec, rt.prompts(), cfg.limits);
    }
    used.insert(sc.name);
  }

  // the fixture exercises what the invariants are about
  Rollout nz = rollout_from_json(json::parse(golden.at(0)));
  c.expect(nz.agents.size() >= 3, "golden rollout has too few subagents");
  bool saw_parse_error = false, saw_unclosed_think = false;
  for (const auto& a : nz.agents)
    for (const auto& t : a.turns) {
      saw_parse_error |= t.parse_error.has_value();
      const auto open = t.output_text.rfind("<think>");
      saw_unclosed_think |= a.kind == AgentKind::Subagent && open != std::string::npos &&
                            t.output_text.find("</think>", open) == std::string::npos;
    }
  c.expect(saw_parse_error, "fixture lacks a malformed tool call");
  c.expect(saw_unclosed_think, "fixture lacks an unclosed think block");

  std::string names;
  for (const auto& n : used) names += (names.empty() ? "" : ", ") + n;
  return c.done(std::to_string(compared) + " rollouts over 20 runs byte-identical to golden (" + names +
                "); isolation, barrier, think hygiene and limits hold");
}

// 9 ---------------------------------------------------------------------------

Outcome buffer_rules() {
  Check c;
  using Key = std::tuple<std::size_t, std::size_t, std::string>;
  auto keys = [](const std::vector<TrainingSample>& s) {
    std::set<Key> out;
    for (const auto& x : s) out.insert({x.agent_index, x.turn_index, std::string(to_string(x.reason))});
    return out;
  };
  RewardBreakdown ok;
  ok.format_valid = true;
  ok.total = 0.9;
  RewardBreakdown bad;

  auto s1 = keys(collect(fixture::buffer_valid_with_stuck_subagent(), ok, Limits{}));
  c.expect(s1 == std::set<Key>{{0, 1, "normal"}, {0, 2, "normal"}, {1, 1, "normal"}, {1, 2, "normal"}},
           "valid-format exclusion");
  auto s2 = keys(collect(fixture::buffer_invalid_clean(), bad, Limits{}));
  c.expect(s2 == std::set<Key>{{0, 2, "format_penalty"}}, "lead-final-turn-only");
  auto s3 = keys(collect(fixture::buffer_invalid_with_loop(), bad, Limits{}));
  c.expect(s3 == std::set<Key>{{0, 2, "format_penalty"}, {1, 2, "repetition_penalty"}}, "repetition composition");
  return c.done("valid-format exclusion {4 normal}; invalid clean {lead final}; invalid + loop {lead final, loop turn}");
}

// 10 --------------------------------------------------------------------------

std::string desk_run(Schedule schedule, std::size_t& groups, std::size_t& rollouts, std::size_t& samples) {
  RunConfig cfg = fixture::config("desk.json");
  cfg.schedule = schedule;
  Runtime rt(cfg);
  const auto ds = load_dataset(fixture::path("desk_dataset.json"));
  std::string out;
  groups = rollouts = samples = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    GroupOutcome g = run_group(rt, ds[i], instance_id(ds[i], i), 4);
    for (const auto& r : g.rollouts) out += to_jsonl_line(r) + "\n";
    for (const auto& s : g.samples) out += dump_json(to_json(s)) + "\n";
    json summary = g.summary();
    json terms = json::array();
    for (const auto& t : g.objective.terms) terms.push_back(to_json(t));
    out += dump_json(summary) + "\n" + dump_json(terms) + "\n";
    ++groups;
    rollouts += g.rollouts.size();
    samples += g.samples.size();
  }
  return out;
}

Outcome desk_run_check() {
  Check c;
  std::size_t groups = 0, rollouts = 0, samples = 0;
  const auto t0 = Clock::now();
  const std::string a = desk_run(Schedule::Threaded, groups, rollouts, samples);
  const double secs = seconds_since(t0);
  std::size_t g2 = 0, r2 = 0, s2 = 0;
  const std::string b = desk_run(Schedule::Threaded, g2, r2, s2);
  const std::string s = desk_run(Schedule::Serial, g2, r2, s2);
  c.expect(groups == 8 && rollouts == 32, "ran " + std::to_string(groups) + " groups / " + std::to_string(rollouts) +
                                              " rollouts");
  c.expect(secs < 60.0, "took " + fmt(secs) + " s");
  c.expect(a == b, "repeat run differs");
  c.expect(a == s, "serial schedule differs");
  c.expect(samples > 0, "no training samples");
  return c.done("8 tasks x G=4 -> " + std::to_string(samples) + " samples in " + fmt(secs) + " s; " +
                std::to_string(a.size()) + " bytes identical across 3 runs");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"weight conservation", weight_conservation},
      {"advantage normalization", advantage_normalization},
      {"clip behavior", clip_behavior},
      {"zero-objective identity", zero_objective},
      {"reward constants", reward_constants},
      {"metrics oracle", metrics_oracle},
      {"Fig. 7 fixture", fig7_fixture},
      {"orchestrator golden run", golden_run},
      {"buffer rules", buffer_rules},
      {"end-to-end desk run", desk_run_check},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
