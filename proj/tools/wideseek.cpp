#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wideseek/advantage.hpp"
#include "wideseek/buffer.hpp"
#include "wideseek/config.hpp"
#include "wideseek/datapipe.hpp"
#include "wideseek/errors.hpp"
#include "wideseek/metrics.hpp"
#include "wideseek/reward.hpp"
#include "wideseek/runner.hpp"
#include "wideseek/tabletext.hpp"
#include "wideseek/tools.hpp"
#include "wideseek/trajectory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wideseek;

namespace {

struct Common {
  std::string config;
  std::string dataset;
  std::string corpus;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::optional<std::size_t> group_size;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig::defaults() : RunConfig::from_file(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.backend == "remote") cfg.backend.kind = BackendKind::Remote;
  if (c.backend == "scripted") cfg.backend.kind = BackendKind::Scripted;
  if (c.group_size) cfg.advantage.group_size = *c.group_size;
  if (!c.corpus.empty()) {
    cfg.tools.corpus = c.corpus;
    cfg.tools.index.clear();
  }
  cfg.validate();
  return cfg;
}

// Provenance for commands that don't run the tools.
Provenance static_provenance(const RunConfig& cfg) {
  return {run_hash(cfg), {}, {cfg.prompts.lead_id, cfg.prompts.subagent_id}};
}

Provenance provenance_of(const Rollout& r) {
  return {r.metadata.config_hash, r.metadata.tool_versions, r.metadata.prompt_ids};
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

// Writes through a temp file so a failed run never leaves a partial output.
class OutFile {
 public:
  explicit OutFile(const std::string& path) : path_(path), tmp_(path + ".tmp") {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot write " + path_.string());
  }
  std::ofstream& stream() { return out_; }
  void line(const json& j) { out_ << dump_json(j) << '\n'; }
  void commit() {
    out_.close();
    if (!out_) throw IoError("write failed for " + path_.string());
    fs::rename(tmp_, path_);
  }

 private:
  fs::path path_;
  fs::path tmp_;
  std::ofstream out_;
};

void write_json(const std::string& path, const json& j) {
  OutFile f(path);
  f.stream() << j.dump(2) << '\n';
  f.commit();
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError(path + ":" + std::to_string(n) + ": not valid JSON");
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<Rollout> read_rollouts(const std::string& path) {
  std::vector<Rollout> out;
  for (const auto& j : read_jsonl(path)) out.push_back(rollout_from_json(j));
  return out;
}

// id -> instance
std::map<std::string, DatasetInstance> index_dataset(const std::vector<DatasetInstance>& ds) {
  std::map<std::string, DatasetInstance> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::string id = instance_id(ds[i], i);
    if (!out.emplace(id, ds[i]).second) throw FormatError("duplicate dataset id '" + id + "'");
  }
  return out;
}

const DatasetInstance& lookup(const std::map<std::string, DatasetInstance>& ds, const std::string& id) {
  auto it = ds.find(id);
  if (it == ds.end()) throw FormatError("no dataset instance with id '" + id + "'");
  return it->second;
}

// --- subcommands -----------------------------------------------------------

int cmd_index(const Common& c) {
  require(c.corpus, "--corpus");
  require(c.out, "--out");
  RunConfig cfg = load_config(c);
  Index idx = Index::build_from_file(c.corpus);
  LocalToolService svc(std::make_shared<const Index>(idx), cfg.tools.params);
  Provenance p = static_provenance(cfg);
  p.tool_versions = svc.versions();
  json j = json::parse(idx.serialize());
  j["provenance"] = p.to_json();
  OutFile f(c.out);
  f.stream() << dump_json(j);
  f.commit();
  std::cout << dump_json({{"documents", idx.doc_count()}, {"fingerprint", idx.fingerprint()}}) << '\n';
  return 0;
}

int cmd_rollout(const Common& c, std::size_t per_task, const std::string& collect_path) {
  require(c.dataset, "--dataset");
  require(c.out, "--out");
  RunConfig cfg = load_config(c);
  auto ds = load_dataset(c.dataset);
  Runtime rt(cfg);
  Orchestrator orch = rt.orchestrator();
  OutFile traj(c.out);
  std::optional<OutFile> buf;
  if (!collect_path.empty()) buf.emplace(collect_path);
  std::size_t rollouts = 0, samples = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string id = instance_id(ds[i], i);
    const std::uint64_t seed = rollout_seed(cfg.seed, id);
    std::optional<GroundTruth> gt;
    if (buf) gt = ground_truth(ds[i]);
    for (std::size_t k = 0; k < per_task; ++k) {
      Rollout r = orch.run({id, ds[i].question, k, seed});
      traj.stream() << to_jsonl_line(r) << '\n';
      ++rollouts;
      if (buf) {
        RewardBreakdown rw = compute_reward(r, gt->table, gt->key, cfg.reward);
        for (const auto& s : collect(r, rw, cfg.limits, cfg.repetition)) {
          json line = to_json(s);
          line["provenance"] = rt.provenance().to_json();
          buf->line(line);
          ++samples;
        }
      }
    }
  }
  traj.commit();
  if (buf) buf->commit();
  json summary = {{"rollouts", rollouts}, {"provenance", rt.provenance().to_json()}};
  if (!collect_path.empty()) summary["samples"] = samples;
  std::cout << dump_json(summary) << '\n';
  return 0;
}

int cmd_reward(const Common& c, const std::string& rollouts_path) {
  require(c.dataset, "--dataset");
  require(rollouts_path, "--rollouts");
  require(c.out, "--out");
  RunConfig cfg = load_config(c);
  auto ds = index_dataset(load_dataset(c.dataset));
  OutFile f(c.out);
  for (const auto& r : read_rollouts(rollouts_path)) {
    GroundTruth gt = ground_truth(lookup(ds, r.query_id));
    RewardBreakdown rw = compute_reward(r, gt.table, gt.key, cfg.reward);
    f.line({{"query_id", r.query_id},
            {"rollout_index", r.rollout_index},
            {"reward", to_json(rw)},
            {"provenance", provenance_of(r).to_json()}});
  }
  f.commit();
  return 0;
}

// JSONL: per group, one {"type":"group"} summary followed by one
// {"type":"token"} record per weighted output token.
int cmd_advantage(const Common& c, const std::string& rollouts_path, const std::string& rewards_path,
                  bool rescore) {
  require(rollouts_path, "--rollouts");
  require(c.out, "--out");
  RunConfig cfg = load_config(c);
  std::vector<Rollout> all = read_rollouts(rollouts_path);

  std::map<std::pair<std::string, std::size_t>, double> totals;
  if (!rewards_path.empty()) {
    for (const auto& j : read_jsonl(rewards_path)) {
      totals[{j.at("query_id").get<std::string>(), j.at("rollout_index").get<std::size_t>()}] =
          j.at("reward").at("total").get<double>();
    }
  } else {
    require(c.dataset, "--dataset or --rewards");
    auto ds = index_dataset(load_dataset(c.dataset));
    for (const auto& r : all) {
      GroundTruth gt = ground_truth(lookup(ds, r.query_id));
      totals[{r.query_id, r.rollout_index}] = compute_reward(r, gt.table, gt.key, cfg.reward).total;
    }
  }

  std::unique_ptr<PolicyBackend> backend;
  std::optional<PromptSet> prompts;
  if (rescore) {
    backend = make_backend(cfg);
    prompts = PromptSet::load(cfg.prompts.dir, cfg.prompts.lead_id, cfg.prompts.subagent_id);
  }

  // Groups in first-appearance order, rollouts by index.
  std::vector<std::string> order;
  std::map<std::string, std::vector<Rollout>> groups;
  for (auto& r : all) {
    if (!groups.count(r.query_id)) order.push_back(r.query_id);
    groups[r.query_id].push_back(std::move(r));
  }
  OutFile f(c.out);
  std::size_t degenerate = 0;
  for (const auto& qid : order) {
    auto& g = groups[qid];
    std::sort(g.begin(), g.end(), [](const Rollout& a, const Rollout& b) { return a.rollout_index < b.rollout_index; });
    std::vector<double> rewards;
    for (const auto& r : g) {
      auto it = totals.find({r.query_id, r.rollout_index});
      if (it == totals.end()) {
        throw FormatError("no reward for " + r.query_id + " rollout " + std::to_string(r.rollout_index));
      }
      rewards.push_back(it->second);
    }
    GroupAdvantages adv = normalize_group(rewards, cfg.advantage.eps_degenerate);
    if (adv.degenerate) ++degenerate;
    if (rescore) {
      for (auto& r : g) {
        restore_states(r, *prompts);
        rescore_rollout(r, *backend);
      }
    }
    bool have_new = true;
    for (const auto& r : g)
      for (const auto& a : r.agents)
        for (const auto& t : a.turns)
          for (const auto& tok : t.tokens) have_new = have_new && tok.logprob_new.has_value();

    json group = {{"type", "group"}, {"query_id", qid}, {"advantages", to_json(adv)},
                  {"provenance", provenance_of(g.front()).to_json()}};
    json warnings = json::array();
    if (g.size() != cfg.advantage.group_size) {
      warnings.push_back("group has " + std::to_string(g.size()) + " rollouts, configured G is " +
                         std::to_string(cfg.advantage.group_size));
    }
    std::vector<json> tokens;
    if (have_new) {
      ObjectiveReport rep = group_objective(g, adv, cfg.advantage);
      group["objective"] = rep.objective;
      group["clip_fraction"] = rep.clip_fraction;
      group["weighted_tokens"] = rep.weighted_tokens;
      for (const auto& msg : rep.warnings) warnings.push_back(msg);
      for (const auto& t : rep.terms) {
        json line = to_json(t);
        line["type"] = "token";
        line["query_id"] = qid;
        tokens.push_back(std::move(line));
      }
    } else {
      WeightTable w = token_weights(g);
      group["objective"] = nullptr;
      for (const auto& msg : w.warnings) warnings.push_back(msg);
      std::size_t weighted = 0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t a = 0; a < g[i].agents.size(); ++a) {
          for (const auto& turn : g[i].agents[a].turns) {
            for (std::size_t k = 0; k < turn.tokens.size(); ++k) {
              tokens.push_back({{"type", "token"}, {"query_id", qid}, {"rollout", i}, {"agent", a},
                                {"turn", turn.index}, {"position", k}, {"weight", w.weight[i][a]},
                                {"advantage", adv.advantages[i]}});
              ++weighted;
            }
          }
        }
      }
      group["weighted_tokens"] = weighted;
    }
    group["warnings"] = std::move(warnings);
    f.line(group);
    for (const auto& t : tokens) f.line(t);
  }
  f.commit();
  std::cout << dump_json({{"groups", order.size()}, {"degenerate_groups", degenerate}}) << '\n';
  return 0;
}

// Predictions: trajectory JSONL (final_answer_text per rollout) or JSONL of
// {"id", "answer_text"}.
int cmd_evaluate(const Common& c, const std::string& predictions) {
  require(c.dataset, "--dataset");
  require(predictions, "--predictions");
  require(c.out, "--out");
  RunConfig cfg = load_config(c);
  auto ds = index_dataset(load_dataset(c.dataset));
  std::map<std::string, std::vector<SampleScore>> per_query;
  json samples = json::array();
  std::optional<Provenance> prov;
  for (const auto& j : read_jsonl(predictions)) {
    std::string id, answer;
    if (j.contains("agents")) {
      Rollout r = rollout_from_json(j);
      if (!prov) prov = provenance_of(r);
      id = r.query_id;
      answer = r.final_answer_text;
    } else {
      id = j.at("id").get<std::string>();
      answer = j.contains("answer_text") ? j.at("answer_text").get<std::string>() : j.at("answer").get<std::string>();
    }
    GroundTruth gt = ground_truth(lookup(ds, id));
    SampleScore s;
    FormatCheck fc = check_format(answer);
    if (fc.valid) {
      s.item_f1 = item_f1(*fc.table, gt.table, gt.key).f1;
      s.row_f1 = row_f1(*fc.table, gt.table, gt.key).f1;
      s.success = success(*fc.table, gt.table, gt.key);
    }
    per_query[id].push_back(s);
    samples.push_back({{"id", id},
                       {"format_valid", fc.valid},
                       {"item_f1", s.item_f1},
                       {"row_f1", s.row_f1},
                       {"success", s.success}});
  }
  std::vector<std::vector<SampleScore>> grouped;
  for (auto& [id, v] : per_query) grouped.push_back(v);
  CorpusScore agg = aggregate_scores(grouped);
  json aggregate = {{"queries", agg.queries},         {"samples", agg.samples},
                    {"item_f1_avg", agg.item_f1_avg}, {"item_f1_max", agg.item_f1_max},
                    {"row_f1_avg", agg.row_f1_avg},   {"row_f1_max", agg.row_f1_max},
                    {"success_avg", agg.success_avg}, {"success_pass", agg.success_pass}};
  Provenance p = prov ? *prov : static_provenance(cfg);
  p.config_hash = run_hash(cfg);
  write_json(c.out, {{"aggregate", aggregate}, {"samples", std::move(samples)}, {"provenance", p.to_json()}});
  std::cout << dump_json(aggregate) << '\n';
  return 0;
}

int cmd_filter(const Common& c, const std::string& log_path, const std::string& report_path) {
  require(log_path, "--log");
  require(c.out, "--out");
  RunConfig cfg = load_config(c);
  PipelineResult res = filter_log(load_generation_log(log_path), cfg.pipeline);
  save_dataset(c.out, res.retained);
  json report = res.report.to_json();
  report["provenance"] = static_provenance(cfg).to_json();
  if (!report_path.empty()) write_json(report_path, report);
  std::cout << dump_json({{"total", res.report.total}, {"retained", res.report.retained}}) << '\n';
  return 0;
}

int cmd_generate(const Common& c, const std::string& intents, const std::string& log_path,
                 const std::string& report_path) {
  require(intents, "--intents");
  require(c.out, "--out");
  RunConfig cfg = load_config(c);
  auto backend = make_backend(cfg);
  DatapipePrompts prompts = DatapipePrompts::load(cfg.prompts.dir);
  PipelineResult res = run_pipeline(read_seed_intents(intents), *backend, prompts, cfg.pipeline, cfg.seed,
                                    cfg.sampling);
  save_dataset(c.out, res.retained);
  Provenance p = static_provenance(cfg);
  p.prompt_ids = {"query_generator", "answer_generator"};
  if (!log_path.empty()) {
    OutFile f(log_path);
    for (const auto& r : res.log) {
      json line = to_json(r);
      line["provenance"] = p.to_json();
      f.line(line);
    }
    f.commit();
  }
  json report = res.report.to_json();
  report["provenance"] = p.to_json();
  if (!report_path.empty()) write_json(report_path, report);
  std::cout << dump_json({{"total", res.report.total}, {"retained", res.report.retained}}) << '\n';
  return 0;
}

// rollout -> reward -> advantage -> collect for every task, into one directory.
int cmd_desk(const Common& c) {
  require(c.dataset, "--dataset");
  require(c.out, "--out");
  RunConfig cfg = load_config(c);
  auto ds = load_dataset(c.dataset);
  Runtime rt(cfg);
  fs::create_directories(c.out);
  const fs::path dir(c.out);
  OutFile traj((dir / "trajectories.jsonl").string());
  OutFile buf((dir / "buffer.jsonl").string());
  json groups = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    GroupOutcome g = run_group(rt, ds[i], instance_id(ds[i], i), cfg.advantage.group_size);
    for (const auto& r : g.rollouts) traj.stream() << to_jsonl_line(r) << '\n';
    for (const auto& s : g.samples) {
      json line = to_json(s);
      line["provenance"] = rt.provenance().to_json();
      buf.line(line);
    }
    groups.push_back(g.summary());
  }
  traj.commit();
  buf.commit();
  write_json((dir / "summary.json").string(), {{"groups", std::move(groups)}, {"provenance", rt.provenance().to_json()}});
  std::cout << dump_json({{"tasks", ds.size()}, {"group_size", cfg.advantage.group_size}}) << '\n';
  return 0;
}

void report_error(std::string_view context, std::string_view kind, std::string_view message) {
  json err = {{"error", {{"command", context}, {"kind", kind}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wideseek: multi-agent rollouts, rewards and advantages at desk scale"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&c](CLI::App* sub) {
    sub->add_option("--config", c.config, "run config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "override the config seed");
    sub->add_option("--backend", c.backend, "policy backend")->check(CLI::IsMember({"remote", "scripted"}));
    sub->add_option("--group-size", c.group_size, "rollouts per query (G)")->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "output path");
  };

  auto* index = app.add_subcommand("index", "build a search index artifact from a corpus");
  add_common(index);
  index->add_option("--corpus", c.corpus, "corpus JSONL");

  std::string collect_path;
  std::size_t per_task = 1;
  auto* rollout = app.add_subcommand("rollout", "run rollouts for every dataset task");
  add_common(rollout);
  rollout->add_option("--dataset", c.dataset, "dataset JSON");
  rollout->add_option("--corpus", c.corpus, "corpus JSONL (overrides the config index)");
  rollout->add_option("--per-task", per_task, "rollouts per task (default 1)")->check(CLI::PositiveNumber);
  rollout->add_option("--collect", collect_path, "also write buffer samples here");

  std::string predictions;
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against a dataset");
  add_common(evaluate);
  evaluate->add_option("--dataset", c.dataset, "dataset JSON");
  evaluate->add_option("--predictions", predictions, "trajectory JSONL or {id, answer_text} JSONL");

  std::string rollouts_path;
  auto* reward = app.add_subcommand("reward", "reward breakdown per rollout");
  add_common(reward);
  reward->add_option("--dataset", c.dataset, "dataset JSON");
  reward->add_option("--rollouts", rollouts_path, "trajectory JSONL");

  std::string rewards_path;
  bool rescore = false;
  auto* advantage = app.add_subcommand("advantage", "group advantages, token weights and objective");
  add_common(advantage);
  advantage->add_option("--rollouts", rollouts_path, "trajectory JSONL");
  advantage->add_option("--rewards", rewards_path, "reward JSONL from `reward`");
  advantage->add_option("--dataset", c.dataset, "dataset JSON (when --rewards is absent)");
  advantage->add_flag("--rescore", rescore, "fill logprob_new from the backend first");

  std::string log_path, report_path;
  auto* filter = app.add_subcommand("filter", "self-consistency filter over a generation log");
  add_common(filter);
  filter->add_option("--log", log_path, "generation log JSONL");
  filter->add_option("--report", report_path, "drop report JSON");

  std::string intents;
  auto* generate = app.add_subcommand("generate", "synthesize and filter dataset instances");
  add_common(generate);
  generate->add_option("--intents", intents, "seed intents, one per line");
  generate->add_option("--log", log_path, "generation log JSONL");
  generate->add_option("--report", report_path, "drop report JSON");

  auto* desk = app.add_subcommand("desk", "rollout, reward, advantage and collect per task into --out/");
  add_common(desk);
  desk->add_option("--dataset", c.dataset, "dataset JSON");
  desk->add_option("--corpus", c.corpus, "corpus JSONL (overrides the config index)");

  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (*index) return cmd_index(c);
    if (*rollout) return cmd_rollout(c, per_task, collect_path);
    if (*evaluate) return cmd_evaluate(c, predictions);
    if (*reward) return cmd_reward(c, rollouts_path);
    if (*advantage) return cmd_advantage(c, rollouts_path, rewards_path, rescore);
    if (*filter) return cmd_filter(c, log_path, report_path);
    if (*generate) return cmd_generate(c, intents, log_path, report_path);
    if (*desk) return cmd_desk(c);
  } catch (const Error& e) {
    report_error(name, e.kind(), e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    report_error(name, "FormatError", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error(name, "InternalError", e.what());
    return 3;
  }
  return 1;
}
