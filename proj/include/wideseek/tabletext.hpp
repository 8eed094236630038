#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wideseek {

// Exact decimal in canonical form: optional '-', integer digits without
// leading zeros, optional '.' plus fraction digits without trailing zeros.
// "-0" canonicalizes to "0". Two decimals are equal iff their canonical
// strings are equal.
class Decimal {
 public:
  // Returns nullopt unless `text` matches [+-]?(digits[.digits*] | .digits).
  static std::optional<Decimal> parse(std::string_view text);

  [[nodiscard]] const std::string& canonical() const noexcept { return canonical_; }
  [[nodiscard]] double to_double() const;

  friend bool operator==(const Decimal&, const Decimal&) = default;

 private:
  explicit Decimal(std::string canonical) : canonical_(std::move(canonical)) {}
  std::string canonical_;
};

struct NormCell {
  std::string raw;
  std::string norm;
  std::optional<Decimal> numeric;

  friend bool operator==(const NormCell&, const NormCell&) = default;
};

// Normalizes a cell for comparison: NFKC, lowercase, trim, collapse internal
// whitespace, strip one level of surrounding quotes/brackets, strip trailing
// periods, drop thousands separators. Steps repeat until the string stops
// changing, so the result is a fixed point of normalization.
[[nodiscard]] NormCell normalize_cell(std::string_view raw);

// Header normalization is the cell normalization's `norm`.
[[nodiscard]] std::string normalize_header(std::string_view raw);

// Cells compare by exact decimal value when both are numeric, by norm otherwise.
[[nodiscard]] bool cells_equal(const NormCell& a, const NormCell& b) noexcept;

// Comparison key consistent with cells_equal; usable in maps.
[[nodiscard]] std::string cell_key(const NormCell& cell);

struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

struct Table {
  std::vector<std::string> headers;      // normalized
  std::vector<std::string> raw_headers;  // as written, cell-trimmed
  std::vector<std::vector<NormCell>> rows;
  std::optional<SourceSpan> source_span;
  std::vector<std::string> warnings;  // lenient-mode repairs

  [[nodiscard]] std::size_t column_count() const noexcept { return headers.size(); }
  [[nodiscard]] std::size_t row_count() const noexcept { return rows.size(); }
  [[nodiscard]] std::optional<std::size_t> column_index(std::string_view normalized) const;

  // Equality ignores source_span and warnings.
  friend bool operator==(const Table& a, const Table& b) {
    return a.headers == b.headers && a.raw_headers == b.raw_headers && a.rows == b.rows;
  }
};

enum class ParseMode {
  Strict,   // ragged rows throw RowWidthMismatch
  Lenient,  // ragged rows are padded or truncated, with a warning
};

struct AnswerBlock {
  std::string content;
  SourceSpan span;  // byte range of the whole fenced block, fences included
};

inline constexpr std::string_view kAnswerFence = "```markdown";

// Content of the last ```markdown fenced block, fences removed.
[[nodiscard]] std::optional<std::string> extract_answer_block(std::string_view text);
[[nodiscard]] std::optional<AnswerBlock> find_answer_block(std::string_view text);

// Parses a pipe table: header row, separator row, zero or more data rows.
// Throws MalformedTable or (strict mode) RowWidthMismatch.
[[nodiscard]] Table parse_table(std::string_view md, ParseMode mode = ParseMode::Strict);

// Renders raw headers and raw cells back to a pipe table.
[[nodiscard]] std::string render_table(const Table& table);

}  // namespace wideseek
