#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wideseek/metrics.hpp"
#include "wideseek/policy.hpp"
#include "wideseek/tabletext.hpp"

namespace wideseek {

struct DatasetInstance {
  std::optional<std::string> id;  // absent in the bare schema; defaults to the array index
  std::string question;
  std::string answer;  // markdown table
  std::vector<std::string> unique_columns;
};

// Dataset file: JSON array of {"question", "answer", "unique_columns"} with an
// optional "id". Throws IoError / FormatError.
[[nodiscard]] std::vector<DatasetInstance> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const std::vector<DatasetInstance>& instances);
[[nodiscard]] nlohmann::json to_json(const DatasetInstance& d);
[[nodiscard]] DatasetInstance dataset_instance_from_json(const nlohmann::json& j);
[[nodiscard]] std::string instance_id(const DatasetInstance& d, std::size_t index);

// Parsed ground truth of an instance. Throws MalformedTable, MissingKeyColumn
// or PreconditionError when the instance breaks the dataset invariants.
struct GroundTruth {
  Table table;
  UniqueKey key;
};
[[nodiscard]] GroundTruth ground_truth(const DatasetInstance& d);

struct PipelineConfig {
  double consistency_threshold = 0.9;
  std::size_t min_rows = 3;
  std::size_t row_count_min = 10;
  std::size_t row_count_max = 50;
  std::string generator_backend = "scripted";

  void validate() const;  // throws ConfigError
};

[[nodiscard]] nlohmann::json to_json(const PipelineConfig& cfg);
[[nodiscard]] PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

// Stage-1/2 prompt texts (non-canonical).
struct DatapipePrompts {
  std::string query_generator;
  std::string answer_generator;

  // Reads query_generator.txt and answer_generator.txt from `dir`.
  static DatapipePrompts load(const std::filesystem::path& dir);
};

// Throws ValidationFailure unless the query names its columns and mandates a
// single ```markdown table.
void validate_query(std::string_view query);

struct StageContext {
  std::string instance_id;
  std::uint64_t seed = 0;
  SamplingParams sampling;
};

// Stage 1. Retries once on ValidationFailure, then rethrows it. Throws
// PreconditionError when target_rows is outside the configured range.
[[nodiscard]] std::string generate_query(std::string_view seed_intent, std::size_t target_rows,
                                         PolicyBackend& backend, const DatapipePrompts& prompts,
                                         const PipelineConfig& cfg, const StageContext& ctx);

struct ParsedResponse {
  Table table;
  std::optional<std::vector<std::string>> unique_columns;
};

// Answer table (lenient) plus the ```json {"unique_columns": [...]} block if
// present. Throws UnparseableAnswer.
[[nodiscard]] ParsedResponse parse_response_text(std::string_view text);

struct AnswerPair {
  std::string response_a;
  std::string response_b;
  Table a;
  Table b;
  std::vector<std::string> unique_columns;
};

// Stage 2: two independent samples. Throws UnparseableAnswer.
[[nodiscard]] AnswerPair generate_answers(std::string_view query, PolicyBackend& backend,
                                          const DatapipePrompts& prompts, const StageContext& ctx);

inline constexpr std::string_view kDropLowConsistency = "low_consistency";
inline constexpr std::string_view kDropTooFewRows = "too_few_rows";
inline constexpr std::string_view kDropDuplicateKeys = "duplicate_keys";
inline constexpr std::string_view kDropMissingKey = "missing_key_column";
inline constexpr std::string_view kDropUnparseable = "unparseable";
inline constexpr std::string_view kDropValidation = "validation_failure";
inline constexpr std::string_view kDropBackend = "backend_error";

struct Verdict {
  bool keep = false;
  std::string reason;  // empty when kept
  double consistency = 0.0;

  static Verdict kept(double c) { return {true, {}, c}; }
  static Verdict drop(std::string_view why, double c = 0.0) { return {false, std::string(why), c}; }
};

// Stage 3. Checks run in order: key presence, consistency, row count,
// distinct keys.
[[nodiscard]] Verdict filter_pair(const Table& a, const Table& b, const UniqueKey& key, const PipelineConfig& cfg);

// One generated pair as logged between stages 2 and 3.
struct GenerationRecord {
  std::string id;
  std::string question;
  std::string response_a;
  std::string response_b;
  std::optional<std::vector<std::string>> unique_columns;  // overrides the responses' json block
  std::optional<std::string> failure;                      // stage 1/2 drop reason
};

[[nodiscard]] nlohmann::json to_json(const GenerationRecord& r);
[[nodiscard]] GenerationRecord generation_record_from_json(const nlohmann::json& j);
[[nodiscard]] std::vector<GenerationRecord> load_generation_log(const std::filesystem::path& path);

struct PipelineReport {
  std::size_t total = 0;
  std::size_t retained = 0;
  std::map<std::string, std::size_t> drops;
  std::vector<nlohmann::json> per_instance;

  [[nodiscard]] nlohmann::json to_json() const;
};

struct PipelineResult {
  std::vector<DatasetInstance> retained;
  std::vector<GenerationRecord> log;
  PipelineReport report;
};

// Stage 3 over a generation log; a pure function of its inputs.
[[nodiscard]] PipelineResult filter_log(const std::vector<GenerationRecord>& log, const PipelineConfig& cfg);

// Stages 1-3 for each seed intent.
[[nodiscard]] PipelineResult run_pipeline(const std::vector<std::string>& seed_intents, PolicyBackend& backend,
                                          const DatapipePrompts& prompts, const PipelineConfig& cfg,
                                          std::uint64_t seed, const SamplingParams& sampling = {});

// Seed intents: one per line, or JSONL objects with an "intent" field.
[[nodiscard]] std::vector<std::string> read_seed_intents(const std::filesystem::path& path);

}  // namespace wideseek
