#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wideseek/orchestrator.hpp"
#include "wideseek/reward.hpp"
#include "wideseek/trajectory.hpp"

namespace wideseek {

struct RepetitionConfig {
  std::size_t window = 512;     // W: trailing tokens examined
  double coverage = 0.8;        // p: fraction of the window a loop must cover
  std::size_t max_ngram = 50;   // n: longest loop period considered

  void validate() const;  // throws ConfigError
};

// True when the last min(W, len) tokens contain one run of a repeated n-gram
// (n <= max_ngram, at least two full repeats) covering >= coverage of them.
[[nodiscard]] bool detect_repetition(const std::vector<std::int64_t>& tokens, const RepetitionConfig& cfg = {});
[[nodiscard]] bool detect_repetition(const std::vector<TokenRecord>& tokens, const RepetitionConfig& cfg = {});

enum class InclusionReason { Normal, FormatPenalty, RepetitionPenalty, OverflowPenalty };

[[nodiscard]] std::string_view to_string(InclusionReason r) noexcept;

struct TrainingSample {
  std::string query_id;
  std::size_t rollout_index = 0;
  std::size_t agent_index = 0;
  std::size_t turn_index = 0;
  AgentKind role = AgentKind::Lead;
  std::string state;  // serialized message sequence
  std::string state_hash;
  std::vector<TokenRecord> tokens;
  double reward = 0.0;
  InclusionReason reason = InclusionReason::Normal;
};

// Training-buffer admission for one finished rollout. Samples come out in
// (agent, turn) order. Turn states must be populated (restore_states for
// rollouts read back from disk).
[[nodiscard]] std::vector<TrainingSample> collect(const Rollout& rollout, const RewardBreakdown& reward,
                                                  const Limits& limits, const RepetitionConfig& rep = {});

[[nodiscard]] nlohmann::json to_json(const TrainingSample& s);

// Append-only JSONL writer; safe to share between threads.
class BufferWriter {
 public:
  explicit BufferWriter(const std::filesystem::path& path, bool append = false);
  void write(const std::vector<TrainingSample>& samples);
  [[nodiscard]] std::size_t written() const noexcept { return written_; }

 private:
  std::mutex mu_;
  std::ofstream out_;
  std::size_t written_ = 0;
};

}  // namespace wideseek
