#include "wideseek/tabletext.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>
#include <utility>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "wideseek/errors.hpp"

namespace wideseek {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string nfkc_lower(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString normalized = U_SUCCESS(status) ? nfkc->normalize(text, status) : text;
  if (U_FAILURE(status)) normalized = text;
  normalized.toLower(icu::Locale::getRoot());
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : trim(s)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

constexpr std::array<std::pair<std::string_view, std::string_view>, 12> kEnclosers = {{
    {"\"", "\""},
    {"'", "'"},
    {"`", "`"},
    {"(", ")"},
    {"[", "]"},
    {"{", "}"},
    {"<", ">"},
    {"“", "”"},  // curly double quotes
    {"‘", "’"},  // curly single quotes
    {"«", "»"},  // guillemets
    {"「", "」"},  // corner brackets
    {"《", "》"},  // double angle brackets
}};

std::string strip_enclosers(std::string s) {
  for (const auto& [open, close] : kEnclosers) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
      return s.substr(open.size(), s.size() - open.size() - close.size());
    }
  }
  return s;
}

std::string strip_trailing_periods(std::string s) {
  while (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

// Removes commas of the form digit ',' ddd (followed by a non-digit or end).
std::string drop_thousands_separators(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ',' && i > 0 && is_digit(s[i - 1]) && i + 3 < s.size() && is_digit(s[i + 1]) &&
        is_digit(s[i + 2]) && is_digit(s[i + 3]) && (i + 4 == s.size() || !is_digit(s[i + 4]))) {
      continue;
    }
    out.push_back(s[i]);
  }
  return out;
}

std::string normalize_once(std::string_view raw) {
  std::string s = nfkc_lower(raw);
  s = collapse_whitespace(s);
  s = strip_enclosers(std::move(s));
  s = std::string(trim(s));
  s = strip_trailing_periods(std::move(s));
  s = std::string(trim(s));
  return drop_thousands_separators(s);
}

std::vector<std::string> split_row(std::string_view line) {
  line = trim(line);
  if (line.starts_with('|')) line.remove_prefix(1);
  if (line.ends_with('|') && !(line.size() >= 2 && line[line.size() - 2] == '\\')) {
    line.remove_suffix(1);
  }
  std::vector<std::string> cells;
  std::string current;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '\\' && i + 1 < line.size() && line[i + 1] == '|') {
      current.push_back('|');
      ++i;
    } else if (c == '|') {
      cells.emplace_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  cells.emplace_back(trim(current));
  return cells;
}

bool is_separator_cell(std::string_view cell) {
  cell = trim(cell);
  if (cell.starts_with(':')) cell.remove_prefix(1);
  if (cell.ends_with(':')) cell.remove_suffix(1);
  return !cell.empty() && std::all_of(cell.begin(), cell.end(), [](char c) { return c == '-'; });
}

bool is_separator_row(const std::vector<std::string>& cells) {
  return !cells.empty() && std::all_of(cells.begin(), cells.end(), is_separator_cell);
}

std::vector<std::string_view> nonblank_lines(std::string_view md) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= md.size()) {
    std::size_t nl = md.find('\n', pos);
    std::string_view line = md.substr(pos, nl == std::string_view::npos ? md.size() - pos : nl - pos);
    if (!trim(line).empty()) lines.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

std::string escape_cell(std::string_view raw) {
  std::string out;
  for (char c : raw) {
    if (c == '|') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::optional<Decimal> Decimal::parse(std::string_view text) {
  std::string_view s = text;
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  std::size_t dot = s.find('.');
  std::string_view int_part = s.substr(0, dot);
  std::string_view frac_part = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  auto all_digits = [](std::string_view v) { return std::all_of(v.begin(), v.end(), is_digit); };
  if (!all_digits(int_part) || !all_digits(frac_part)) return std::nullopt;
  if (int_part.empty() && frac_part.empty()) return std::nullopt;

  while (int_part.size() > 1 && int_part.front() == '0') int_part.remove_prefix(1);
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.remove_suffix(1);
  std::string canonical(int_part.empty() ? "0" : std::string(int_part));
  if (!frac_part.empty()) {
    canonical += '.';
    canonical += frac_part;
  }
  if (negative && canonical != "0") canonical.insert(canonical.begin(), '-');
  return Decimal(std::move(canonical));
}

double Decimal::to_double() const { return std::stod(canonical_); }

NormCell normalize_cell(std::string_view raw) {
  std::string current = normalize_once(raw);
  for (int i = 0; i < 16; ++i) {
    std::string next = normalize_once(current);
    if (next == current) break;
    current = std::move(next);
  }
  NormCell cell{std::string(raw), current, Decimal::parse(current)};
  return cell;
}

std::string normalize_header(std::string_view raw) { return normalize_cell(raw).norm; }

bool cells_equal(const NormCell& a, const NormCell& b) noexcept {
  if (a.numeric && b.numeric) return *a.numeric == *b.numeric;
  return a.norm == b.norm;
}

std::string cell_key(const NormCell& cell) {
  if (cell.numeric) return "#" + cell.numeric->canonical();
  return "$" + cell.norm;
}

std::optional<std::size_t> Table::column_index(std::string_view normalized) const {
  auto it = std::find(headers.begin(), headers.end(), normalized);
  if (it == headers.end()) return std::nullopt;
  return static_cast<std::size_t>(it - headers.begin());
}

std::optional<AnswerBlock> find_answer_block(std::string_view text) {
  std::optional<AnswerBlock> last;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = text.find(kAnswerFence, pos);
    if (open == std::string_view::npos) break;
    std::size_t line_end = text.find('\n', open + kAnswerFence.size());
    if (line_end == std::string_view::npos) break;
    // Only whitespace may follow the info string on the opening line.
    if (!trim(text.substr(open + kAnswerFence.size(), line_end - open - kAnswerFence.size())).empty()) {
      pos = open + kAnswerFence.size();
      continue;
    }
    std::size_t content_begin = line_end + 1;
    std::size_t close = text.find("```", content_begin);
    if (close == std::string_view::npos) break;
    std::string_view content = text.substr(content_begin, close - content_begin);
    while (!content.empty() && (content.back() == '\n' || content.back() == '\r')) {
      content.remove_suffix(1);
    }
    last = AnswerBlock{std::string(content), SourceSpan{open, close + 3}};
    pos = close + 3;
  }
  return last;
}

std::optional<std::string> extract_answer_block(std::string_view text) {
  auto block = find_answer_block(text);
  if (!block) return std::nullopt;
  return std::move(block->content);
}

Table parse_table(std::string_view md, ParseMode mode) {
  auto lines = nonblank_lines(md);
  if (lines.empty()) throw MalformedTable("empty table text");
  if (lines.size() < 2) throw MalformedTable("missing separator row");

  Table table;
  table.raw_headers = split_row(lines[0]);
  if (table.raw_headers.empty()) throw MalformedTable("zero columns");

  std::vector<std::string> separator = split_row(lines[1]);
  if (!is_separator_row(separator)) throw MalformedTable("missing separator row");
  if (separator.size() != table.raw_headers.size()) {
    if (mode == ParseMode::Strict) {
      throw MalformedTable("separator row has " + std::to_string(separator.size()) +
                           " cells, header has " + std::to_string(table.raw_headers.size()));
    }
    table.warnings.push_back("separator width differs from header width");
  }

  std::unordered_set<std::string> seen;
  for (const auto& raw : table.raw_headers) {
    std::string norm = normalize_header(raw);
    if (norm.empty()) throw MalformedTable("empty column name");
    if (!seen.insert(norm).second) throw MalformedTable("duplicate column name '" + norm + "'");
    table.headers.push_back(std::move(norm));
  }

  const std::size_t width = table.headers.size();
  for (std::size_t i = 2; i < lines.size(); ++i) {
    std::vector<std::string> raw_cells = split_row(lines[i]);
    if (raw_cells.size() != width) {
      if (mode == ParseMode::Strict) {
        throw RowWidthMismatch("row " + std::to_string(i - 1) + " has " +
                               std::to_string(raw_cells.size()) + " cells, expected " +
                               std::to_string(width));
      }
      table.warnings.push_back("row " + std::to_string(i - 1) + " resized from " +
                               std::to_string(raw_cells.size()) + " to " + std::to_string(width) +
                               " cells");
      raw_cells.resize(width);
    }
    std::vector<NormCell> row;
    row.reserve(width);
    for (const auto& raw : raw_cells) row.push_back(normalize_cell(raw));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string render_table(const Table& table) {
  std::string out = "|";
  for (const auto& h : table.raw_headers) out += " " + escape_cell(h) + " |";
  out += "\n|";
  for (std::size_t i = 0; i < table.raw_headers.size(); ++i) out += " --- |";
  for (const auto& row : table.rows) {
    out += "\n|";
    for (const auto& cell : row) out += " " + escape_cell(cell.raw) + " |";
  }
  return out;
}

}  // namespace wideseek
