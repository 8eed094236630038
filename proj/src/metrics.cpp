#include "wideseek/metrics.hpp"

#include <algorithm>
#include <unordered_map>

#include "wideseek/errors.hpp"

namespace wideseek {
namespace {

std::string key_tuple(const std::vector<NormCell>& row, const std::vector<std::size_t>& cols) {
  std::string tuple;
  for (std::size_t c : cols) {
    std::string k = cell_key(row[c]);
    tuple += std::to_string(k.size());
    tuple += ':';
    tuple += k;
  }
  return tuple;
}

std::vector<std::size_t> key_indices(const Table& table, const UniqueKey& key) {
  std::vector<std::size_t> out;
  for (const auto& col : key.columns()) out.push_back(*table.column_index(col));
  return out;
}

struct CellCounts {
  std::size_t correct_cells = 0;
  std::size_t correct_rows = 0;
};

CellCounts count_correct(const Table& pred, const Table& gt, const RowAlignment& alignment) {
  CellCounts counts;
  for (const auto& [p, g] : alignment.matched) {
    std::size_t row_correct = 0;
    for (const auto& [pc, gc] : alignment.column_map) {
      if (cells_equal(pred.rows[p][pc], gt.rows[g][gc])) ++row_correct;
    }
    counts.correct_cells += row_correct;
    if (row_correct == gt.column_count()) ++counts.correct_rows;
  }
  return counts;
}

}  // namespace

UniqueKey::UniqueKey(const std::vector<std::string>& raw_columns) {
  if (raw_columns.empty()) throw PreconditionError("unique key has no columns");
  for (const auto& raw : raw_columns) {
    std::string norm = normalize_header(raw);
    if (norm.empty()) throw PreconditionError("unique key column name is empty");
    columns_.push_back(std::move(norm));
  }
}

void UniqueKey::require_in(const Table& table, std::string_view which) const {
  for (const auto& col : columns_) {
    if (!table.column_index(col)) {
      throw MissingKeyColumn("key column '" + col + "' missing from " + std::string(which) + " table");
    }
  }
}

bool UniqueKey::present_in(const Table& table) const {
  return std::all_of(columns_.begin(), columns_.end(),
                     [&](const std::string& col) { return table.column_index(col).has_value(); });
}

ScoreTriple ScoreTriple::from_counts(std::size_t correct, std::size_t predicted,
                                     std::size_t expected) {
  if (predicted == 0 && expected == 0) return {1.0, 1.0, 1.0};
  ScoreTriple s;
  s.precision = predicted == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(predicted);
  s.recall = expected == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(expected);
  s.f1 = correct == 0 ? 0.0
                      : 2.0 * static_cast<double>(correct) / static_cast<double>(predicted + expected);
  return s;
}

RowAlignment align_rows(const Table& pred, const Table& gt, const UniqueKey& key, AlignMode mode) {
  key.require_in(gt, "ground-truth");

  RowAlignment out;
  for (std::size_t pc = 0; pc < pred.headers.size(); ++pc) {
    if (auto gc = gt.column_index(pred.headers[pc])) {
      out.column_map.emplace(pc, *gc);
    } else {
      out.extra_pred_columns.push_back(pred.headers[pc]);
    }
  }

  if (!key.present_in(pred)) {
    if (mode == AlignMode::Dataset) key.require_in(pred, "predicted");
    out.missing_key_column = true;
    out.warnings.push_back("predicted table lacks a key column; no rows matched");
    for (std::size_t i = 0; i < pred.row_count(); ++i) out.unmatched_pred.push_back(i);
    for (std::size_t i = 0; i < gt.row_count(); ++i) out.unmatched_gt.push_back(i);
    return out;
  }

  const auto gt_cols = key_indices(gt, key);
  const auto pred_cols = key_indices(pred, key);

  std::unordered_map<std::string, std::size_t> gt_by_key;
  for (std::size_t g = 0; g < gt.row_count(); ++g) {
    auto [it, inserted] = gt_by_key.emplace(key_tuple(gt.rows[g], gt_cols), g);
    if (!inserted) {
      if (mode == AlignMode::Dataset) {
        throw PreconditionError("duplicate key in ground-truth row " + std::to_string(g));
      }
      out.warnings.push_back("duplicate ground-truth key at row " + std::to_string(g));
    }
  }

  std::vector<bool> gt_claimed(gt.row_count(), false);
  for (std::size_t p = 0; p < pred.row_count(); ++p) {
    auto it = gt_by_key.find(key_tuple(pred.rows[p], pred_cols));
    if (it != gt_by_key.end() && !gt_claimed[it->second]) {
      gt_claimed[it->second] = true;
      out.matched.emplace_back(p, it->second);
    } else {
      out.unmatched_pred.push_back(p);
    }
  }
  for (std::size_t g = 0; g < gt.row_count(); ++g) {
    if (!gt_claimed[g]) out.unmatched_gt.push_back(g);
  }
  return out;
}

ScoreTriple item_f1(const Table& pred, const Table& gt, const UniqueKey& key) {
  RowAlignment alignment = align_rows(pred, gt, key);
  CellCounts counts = count_correct(pred, gt, alignment);
  return ScoreTriple::from_counts(counts.correct_cells, pred.row_count() * pred.column_count(),
                                  gt.row_count() * gt.column_count());
}

ScoreTriple row_f1(const Table& pred, const Table& gt, const UniqueKey& key) {
  RowAlignment alignment = align_rows(pred, gt, key);
  CellCounts counts = count_correct(pred, gt, alignment);
  return ScoreTriple::from_counts(counts.correct_rows, pred.row_count(), gt.row_count());
}

bool success(const Table& pred, const Table& gt, const UniqueKey& key) {
  if (!key.present_in(gt)) return false;
  RowAlignment alignment = align_rows(pred, gt, key);
  if (!alignment.extra_pred_columns.empty()) return false;
  CellCounts counts = count_correct(pred, gt, alignment);
  return ScoreTriple::from_counts(counts.correct_rows, pred.row_count(), gt.row_count()).f1 == 1.0;
}

double consistency(const Table& a, const Table& b, const UniqueKey& key) {
  return item_f1(a, b, key).f1;
}

CorpusScore aggregate_scores(const std::vector<std::vector<SampleScore>>& per_query) {
  CorpusScore out;
  for (const auto& samples : per_query) {
    if (samples.empty()) continue;
    ++out.queries;
    out.samples += samples.size();
    double item_sum = 0, row_sum = 0, success_sum = 0;
    double item_max = 0, row_max = 0;
    bool any_success = false;
    for (const auto& s : samples) {
      item_sum += s.item_f1;
      row_sum += s.row_f1;
      success_sum += s.success ? 1.0 : 0.0;
      item_max = std::max(item_max, s.item_f1);
      row_max = std::max(row_max, s.row_f1);
      any_success = any_success || s.success;
    }
    const auto k = static_cast<double>(samples.size());
    out.item_f1_avg += item_sum / k;
    out.item_f1_max += item_max;
    out.row_f1_avg += row_sum / k;
    out.row_f1_max += row_max;
    out.success_avg += success_sum / k;
    out.success_pass += any_success ? 1.0 : 0.0;
  }
  if (out.queries > 0) {
    const auto q = static_cast<double>(out.queries);
    out.item_f1_avg /= q;
    out.item_f1_max /= q;
    out.row_f1_avg /= q;
    out.row_f1_max /= q;
    out.success_avg /= q;
    out.success_pass /= q;
  }
  return out;
}

}  // namespace wideseek
