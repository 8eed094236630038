#include "wideseek/datapipe.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "wideseek/errors.hpp"
#include "wideseek/hash.hpp"
#include "wideseek/orchestrator.hpp"
#include "wideseek/trajectory.hpp"

namespace wideseek {

using nlohmann::json;

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Content of the last ```json block.
std::optional<std::string> last_json_block(std::string_view text) {
  constexpr std::string_view open = "```json";
  std::optional<std::string> found;
  std::size_t pos = 0;
  while ((pos = text.find(open, pos)) != std::string_view::npos) {
    auto body = text.find('\n', pos);
    if (body == std::string_view::npos) break;
    auto close = text.find("```", body + 1);
    if (close == std::string_view::npos) break;
    found = std::string(text.substr(body + 1, close - body - 1));
    pos = close + 3;
  }
  return found;
}

bool has_duplicate_keys(const Table& t, const UniqueKey& key) {
  try {
    (void)align_rows(t, t, key, AlignMode::Dataset);
  } catch (const PreconditionError&) {
    return true;
  }
  return false;
}

}  // namespace

std::string instance_id(const DatasetInstance& d, std::size_t index) {
  return d.id ? *d.id : std::to_string(index);
}

json to_json(const DatasetInstance& d) {
  json j = {{"question", d.question}, {"answer", d.answer}, {"unique_columns", d.unique_columns}};
  if (d.id) j["id"] = *d.id;
  return j;
}

DatasetInstance dataset_instance_from_json(const json& j) {
  try {
    DatasetInstance d;
    if (j.contains("id")) d.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    d.question = j.at("question").get<std::string>();
    d.answer = j.at("answer").get<std::string>();
    d.unique_columns = j.at("unique_columns").get<std::vector<std::string>>();
    return d;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed dataset instance: ") + e.what());
  }
}

std::vector<DatasetInstance> load_dataset(const std::filesystem::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw FormatError("dataset " + path.string() + " is not valid JSON");
  if (j.is_object()) j = json::array({j});
  if (!j.is_array()) throw FormatError("dataset " + path.string() + " must be a JSON array");
  std::vector<DatasetInstance> out;
  for (const auto& item : j) out.push_back(dataset_instance_from_json(item));
  return out;
}

void save_dataset(const std::filesystem::path& path, const std::vector<DatasetInstance>& instances) {
  json arr = json::array();
  for (const auto& d : instances) arr.push_back(to_json(d));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << arr.dump(2, ' ', false, json::error_handler_t::replace) << '\n';
}

GroundTruth ground_truth(const DatasetInstance& d) {
  auto block = extract_answer_block(d.answer);
  GroundTruth gt{parse_table(block ? *block : d.answer, ParseMode::Lenient), UniqueKey(d.unique_columns)};
  (void)align_rows(gt.table, gt.table, gt.key, AlignMode::Dataset);
  return gt;
}

void PipelineConfig::validate() const {
  if (!(consistency_threshold > 0 && consistency_threshold <= 1)) {
    throw ConfigError("consistency_threshold must be in (0, 1]");
  }
  if (min_rows < 1) throw ConfigError("min_rows must be at least 1");
  if (row_count_min > row_count_max) throw ConfigError("row_count range is empty");
}

json to_json(const PipelineConfig& cfg) {
  return json{{"consistency_threshold", cfg.consistency_threshold},
              {"min_rows", cfg.min_rows},
              {"row_count_range", {cfg.row_count_min, cfg.row_count_max}},
              {"generator_backend", cfg.generator_backend}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig cfg;
  cfg.consistency_threshold = j.value("consistency_threshold", cfg.consistency_threshold);
  cfg.min_rows = j.value("min_rows", cfg.min_rows);
  if (j.contains("row_count_range")) {
    auto r = j.at("row_count_range").get<std::vector<std::size_t>>();
    if (r.size() != 2) throw ConfigError("row_count_range needs two values");
    cfg.row_count_min = r[0];
    cfg.row_count_max = r[1];
  }
  cfg.generator_backend = j.value("generator_backend", cfg.generator_backend);
  cfg.validate();
  return cfg;
}

DatapipePrompts DatapipePrompts::load(const std::filesystem::path& dir) {
  return {read_file(dir / "query_generator.txt"), read_file(dir / "answer_generator.txt")};
}

void validate_query(std::string_view query) {
  const std::string q = lower_ascii(query);
  if (q.find("single markdown table") == std::string::npos) {
    throw ValidationFailure("query lacks the single-markdown-table output mandate");
  }
  constexpr std::string_view cols = "column names are as follows";
  auto pos = q.find(cols);
  if (pos == std::string::npos) throw ValidationFailure("query lacks a column list");
  auto rest = std::string_view(q).substr(pos + cols.size());
  auto nl = rest.find('\n');
  auto list = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
  auto end = list.find('\n');
  auto first_line = list.substr(0, end);
  if (first_line.find_first_not_of(" \t\r:") == std::string_view::npos) {
    throw ValidationFailure("query column list is empty");
  }
  if (q.find("```markdown") == std::string::npos) throw ValidationFailure("query lacks the ```markdown format block");
}

std::string generate_query(std::string_view seed_intent, std::size_t target_rows, PolicyBackend& backend,
                           const DatapipePrompts& prompts, const PipelineConfig& cfg, const StageContext& ctx) {
  if (target_rows < cfg.row_count_min || target_rows > cfg.row_count_max) {
    throw PreconditionError("target row count " + std::to_string(target_rows) + " outside [" +
                            std::to_string(cfg.row_count_min) + ", " + std::to_string(cfg.row_count_max) + "]");
  }
  GenerationRequest req;
  req.messages = {{"system", prompts.query_generator},
                  {"user", "Seed intent: " + std::string(seed_intent) +
                               "\nTarget row count: " + std::to_string(target_rows)}};
  req.sampling = ctx.sampling;
  req.role = std::string(kQueryGeneratorRole);
  req.query_id = ctx.instance_id;
  for (std::size_t attempt = 1;; ++attempt) {
    req.turn = attempt;
    req.seed = derive_seed(ctx.seed, attempt);
    std::string query = remove_think(backend.generate(req).text);
    try {
      validate_query(query);
      return query;
    } catch (const ValidationFailure&) {
      if (attempt >= 2) throw;
    }
  }
}

ParsedResponse parse_response_text(std::string_view text) {
  const std::string visible = remove_think(text);
  auto block = extract_answer_block(visible);
  if (!block) throw UnparseableAnswer("response has no ```markdown table");
  ParsedResponse out;
  try {
    out.table = parse_table(*block, ParseMode::Lenient);
  } catch (const Error& e) {
    throw UnparseableAnswer(std::string("response table does not parse: ") + e.what());
  }
  if (auto js = last_json_block(visible)) {
    json j = json::parse(*js, nullptr, false);
    if (j.is_object() && j.contains("unique_columns") && j["unique_columns"].is_array()) {
      std::vector<std::string> cols;
      for (const auto& c : j["unique_columns"]) {
        if (c.is_string()) cols.push_back(c.get<std::string>());
      }
      if (!cols.empty()) out.unique_columns = std::move(cols);
    }
  }
  return out;
}

AnswerPair generate_answers(std::string_view query, PolicyBackend& backend, const DatapipePrompts& prompts,
                            const StageContext& ctx) {
  GenerationRequest req;
  req.messages = {{"system", prompts.answer_generator}, {"user", std::string(query)}};
  req.sampling = ctx.sampling;
  req.role = std::string(kAnswerGeneratorRole);
  req.query_id = ctx.instance_id;

  AnswerPair pair;
  req.turn = 1;
  req.seed = derive_seed(ctx.seed, 1);
  pair.response_a = backend.generate(req).text;
  req.turn = 2;
  req.seed = derive_seed(ctx.seed, 2);
  pair.response_b = backend.generate(req).text;

  ParsedResponse a = parse_response_text(pair.response_a);
  ParsedResponse b = parse_response_text(pair.response_b);
  pair.a = std::move(a.table);
  pair.b = std::move(b.table);
  if (a.unique_columns) {
    pair.unique_columns = *a.unique_columns;
  } else if (b.unique_columns) {
    pair.unique_columns = *b.unique_columns;
  } else {
    throw UnparseableAnswer("neither response names its unique columns");
  }
  return pair;
}

Verdict filter_pair(const Table& a, const Table& b, const UniqueKey& key, const PipelineConfig& cfg) {
  if (!key.present_in(a) || !key.present_in(b)) return Verdict::drop(kDropMissingKey);
  // duplicate keys always depress consistency, so they are checked first
  if (has_duplicate_keys(a, key) || has_duplicate_keys(b, key)) return Verdict::drop(kDropDuplicateKeys);
  const double c = consistency(a, b, key);
  if (c < cfg.consistency_threshold) return Verdict::drop(kDropLowConsistency, c);
  if (a.row_count() < cfg.min_rows || b.row_count() < cfg.min_rows) return Verdict::drop(kDropTooFewRows, c);
  return Verdict::kept(c);
}

json to_json(const GenerationRecord& r) {
  json j = {{"id", r.id}, {"question", r.question}, {"response_a", r.response_a}, {"response_b", r.response_b}};
  if (r.unique_columns) j["unique_columns"] = *r.unique_columns;
  if (r.failure) j["failure"] = *r.failure;
  return j;
}

GenerationRecord generation_record_from_json(const json& j) {
  try {
    GenerationRecord r;
    r.id = j.at("id").get<std::string>();
    r.question = j.value("question", std::string{});
    r.response_a = j.value("response_a", std::string{});
    r.response_b = j.value("response_b", std::string{});
    if (j.contains("unique_columns")) r.unique_columns = j.at("unique_columns").get<std::vector<std::string>>();
    if (j.contains("failure") && !j.at("failure").is_null()) r.failure = j.at("failure").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed generation record: ") + e.what());
  }
}

std::vector<GenerationRecord> load_generation_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open generation log " + path.string());
  std::vector<GenerationRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError("generation log line is not JSON");
    out.push_back(generation_record_from_json(j));
  }
  return out;
}

json PipelineReport::to_json() const {
  json drop_counts = json::object();
  for (const auto& [reason, n] : drops) drop_counts[reason] = n;
  return json{{"total", total},
              {"retained", retained},
              {"dropped", total - retained},
              {"drops", std::move(drop_counts)},
              {"retention_rate", total == 0 ? 0.0 : static_cast<double>(retained) / static_cast<double>(total)},
              {"instances", per_instance}};
}

PipelineResult filter_log(const std::vector<GenerationRecord>& log, const PipelineConfig& cfg) {
  PipelineResult result;
  result.log = log;
  auto record = [&](const GenerationRecord& r, const Verdict& v) {
    ++result.report.total;
    json entry = {{"id", r.id}, {"keep", v.keep}};
    if (v.keep) {
      ++result.report.retained;
      entry["consistency"] = v.consistency;
    } else {
      ++result.report.drops[v.reason];
      entry["reason"] = v.reason;
      if (v.reason != kDropUnparseable && v.reason != kDropValidation && v.reason != kDropBackend) {
        entry["consistency"] = v.consistency;
      }
    }
    result.report.per_instance.push_back(std::move(entry));
  };

  for (const auto& r : log) {
    if (r.failure) {
      record(r, Verdict::drop(*r.failure));
      continue;
    }
    ParsedResponse a, b;
    try {
      a = parse_response_text(r.response_a);
      b = parse_response_text(r.response_b);
    } catch (const UnparseableAnswer&) {
      record(r, Verdict::drop(kDropUnparseable));
      continue;
    }
    std::optional<std::vector<std::string>> cols = r.unique_columns ? r.unique_columns
                                                   : a.unique_columns ? a.unique_columns
                                                                      : b.unique_columns;
    if (!cols || cols->empty()) {
      record(r, Verdict::drop(kDropUnparseable));
      continue;
    }
    UniqueKey key;
    try {
      key = UniqueKey(*cols);
    } catch (const PreconditionError&) {
      record(r, Verdict::drop(kDropUnparseable));
      continue;
    }
    Verdict v = filter_pair(a.table, b.table, key, cfg);
    record(r, v);
    if (v.keep) {
      auto block = extract_answer_block(remove_think(r.response_a));
      DatasetInstance d;
      d.id = r.id;
      d.question = r.question;
      d.answer = *block;
      d.unique_columns = *cols;
      result.retained.push_back(std::move(d));
    }
  }
  return result;
}

PipelineResult run_pipeline(const std::vector<std::string>& seed_intents, PolicyBackend& backend,
                            const DatapipePrompts& prompts, const PipelineConfig& cfg, std::uint64_t seed,
                            const SamplingParams& sampling) {
  cfg.validate();
  std::vector<GenerationRecord> log;
  const std::size_t span = cfg.row_count_max - cfg.row_count_min + 1;
  for (std::size_t i = 0; i < seed_intents.size(); ++i) {
    GenerationRecord r;
    r.id = "gen-" + std::to_string(i);
    StageContext ctx{r.id, derive_seed(seed, i), sampling};
    const std::size_t target_rows = cfg.row_count_min + splitmix64(derive_seed(seed, i, 7)) % span;
    try {
      r.question = generate_query(seed_intents[i], target_rows, backend, prompts, cfg, ctx);
    } catch (const ValidationFailure&) {
      r.failure = std::string(kDropValidation);
      log.push_back(std::move(r));
      continue;
    } catch (const BackendUnavailable&) {
      r.failure = std::string(kDropBackend);
      log.push_back(std::move(r));
      continue;
    }
    try {
      StageContext answer_ctx{r.id, derive_seed(seed, i, 1), sampling};
      AnswerPair pair = generate_answers(r.question, backend, prompts, answer_ctx);
      r.response_a = std::move(pair.response_a);
      r.response_b = std::move(pair.response_b);
      r.unique_columns = std::move(pair.unique_columns);
    } catch (const UnparseableAnswer&) {
      r.failure = std::string(kDropUnparseable);
    } catch (const BackendUnavailable&) {
      r.failure = std::string(kDropBackend);
    }
    log.push_back(std::move(r));
  }
  return filter_log(log, cfg);
}

std::vector<std::string> read_seed_intents(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open seed intents " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line.front() == '{') {
      json j = json::parse(line, nullptr, false);
      if (!j.is_discarded() && j.contains("intent") && j["intent"].is_string()) {
        out.push_back(j["intent"].get<std::string>());
        continue;
      }
    }
    out.push_back(line);
  }
  return out;
}

}  // namespace wideseek
