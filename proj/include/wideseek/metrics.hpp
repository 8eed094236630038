#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wideseek/tabletext.hpp"

namespace wideseek {

// Columns whose value tuple distinguishes rows. Names are stored normalized.
class UniqueKey {
 public:
  UniqueKey() = default;
  // Normalizes each raw name; throws PreconditionError when empty.
  explicit UniqueKey(const std::vector<std::string>& raw_columns);

  [[nodiscard]] const std::vector<std::string>& columns() const noexcept { return columns_; }

  // Throws MissingKeyColumn naming the first absent column.
  void require_in(const Table& table, std::string_view which) const;
  [[nodiscard]] bool present_in(const Table& table) const;

 private:
  std::vector<std::string> columns_;
};

struct ScoreTriple {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  // Micro scores from counts. Both totals zero is a vacuous perfect match.
  static ScoreTriple from_counts(std::size_t correct, std::size_t predicted, std::size_t expected);
};

struct RowAlignment {
  std::vector<std::pair<std::size_t, std::size_t>> matched;  // (pred row, gt row)
  std::vector<std::size_t> unmatched_pred;
  std::vector<std::size_t> unmatched_gt;
  // pred column index -> gt column index, for columns present in both.
  std::map<std::size_t, std::size_t> column_map;
  std::vector<std::string> extra_pred_columns;
  bool missing_key_column = false;  // pred lacks a key column; nothing matched
  std::vector<std::string> warnings;
};

enum class AlignMode {
  Eval,     // missing pred key columns and duplicate gt keys are tolerated
  Dataset,  // both are errors
};

// Pairs pred rows with gt rows whose key tuples are equal. The first pred row
// (source order) with a given key claims the first gt row with that key.
// Throws MissingKeyColumn if a key column is absent from gt.
[[nodiscard]] RowAlignment align_rows(const Table& pred, const Table& gt, const UniqueKey& key,
                                      AlignMode mode = AlignMode::Eval);

// Cell-level micro P/R/F1. Every pred cell counts toward precision; a cell is
// correct when its row is matched and it equals the gt cell in the same
// (normalized) column. Key cells of matched rows count as correct.
[[nodiscard]] ScoreTriple item_f1(const Table& pred, const Table& gt, const UniqueKey& key);

// Row-level P/R/F1. A pred row is correct when matched and every gt column
// has an equal cell.
[[nodiscard]] ScoreTriple row_f1(const Table& pred, const Table& gt, const UniqueKey& key);

// row F1 of 1 and no pred columns outside gt.
[[nodiscard]] bool success(const Table& pred, const Table& gt, const UniqueKey& key);

// Agreement of two independent answers, `b` as reference.
[[nodiscard]] double consistency(const Table& a, const Table& b, const UniqueKey& key);

struct SampleScore {
  double item_f1 = 0.0;
  double row_f1 = 0.0;
  bool success = false;
};

// Aggregates over k samples of one query, then averaged over queries.
struct CorpusScore {
  std::size_t queries = 0;
  std::size_t samples = 0;
  double item_f1_avg = 0.0;  // Avg@k
  double item_f1_max = 0.0;  // Max@k
  double row_f1_avg = 0.0;
  double row_f1_max = 0.0;
  double success_avg = 0.0;   // Avg@k
  double success_pass = 0.0;  // Pass@k
};

[[nodiscard]] CorpusScore aggregate_scores(const std::vector<std::vector<SampleScore>>& per_query);

}  // namespace wideseek
