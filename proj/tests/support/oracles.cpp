#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

namespace oracle {

using wideseek::Table;

double Counts::precision() const { return predicted == 0 ? (expected == 0 ? 1.0 : 0.0) : double(correct) / predicted; }
double Counts::recall() const { return expected == 0 ? (predicted == 0 ? 1.0 : 0.0) : double(correct) / expected; }
double Counts::f1() const {
  if (predicted + expected == 0) return 1.0;
  return 2.0 * double(correct) / double(predicted + expected);
}

namespace {

std::optional<std::size_t> col(const Table& t, const std::string& raw) {
  const std::string h = wideseek::normalize_header(raw);
  for (std::size_t i = 0; i < t.headers.size(); ++i)
    if (t.headers[i] == h) return i;
  return std::nullopt;
}

bool keys_equal(const Table& pred, std::size_t pr, const Table& gt, std::size_t gr,
                const std::vector<std::string>& key) {
  for (const auto& k : key) {
    auto pc = col(pred, k);
    auto gc = col(gt, k);
    if (!pc || !gc) return false;
    if (!wideseek::cells_equal(pred.rows[pr][*pc], gt.rows[gr][*gc])) return false;
  }
  return true;
}

std::size_t cells_right(const Table& pred, std::size_t pr, const Table& gt, std::size_t gr) {
  std::size_t n = 0;
  for (std::size_t c = 0; c < pred.headers.size(); ++c) {
    auto gc = col(gt, pred.raw_headers[c]);
    if (gc && wideseek::cells_equal(pred.rows[pr][c], gt.rows[gr][*gc])) ++n;
  }
  return n;
}

bool row_right(const Table& pred, std::size_t pr, const Table& gt, std::size_t gr) {
  for (std::size_t c = 0; c < gt.headers.size(); ++c) {
    auto pc = col(pred, gt.raw_headers[c]);
    if (!pc || !wideseek::cells_equal(pred.rows[pr][*pc], gt.rows[gr][c])) return false;
  }
  return true;
}

// Max of score(pr, gr) summed over partial injections respecting keys.
std::size_t best(const Table& pred, const Table& gt, const std::vector<std::string>& key,
                 const std::function<std::size_t(std::size_t, std::size_t)>& score) {
  std::vector<bool> used(gt.rows.size(), false);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t pr) -> std::size_t {
    if (pr == pred.rows.size()) return 0;
    std::size_t top = go(pr + 1);  // leave pr unmatched
    for (std::size_t gr = 0; gr < gt.rows.size(); ++gr) {
      if (used[gr] || !keys_equal(pred, pr, gt, gr, key)) continue;
      used[gr] = true;
      top = std::max(top, score(pr, gr) + go(pr + 1));
      used[gr] = false;
    }
    return top;
  };
  return go(0);
}

}  // namespace

Counts brute_item(const Table& pred, const Table& gt, const std::vector<std::string>& key) {
  Counts c;
  c.predicted = pred.rows.size() * pred.headers.size();
  c.expected = gt.rows.size() * gt.headers.size();
  c.correct = best(pred, gt, key, [&](std::size_t p, std::size_t g) { return cells_right(pred, p, gt, g); });
  return c;
}

Counts brute_row(const Table& pred, const Table& gt, const std::vector<std::string>& key) {
  Counts c;
  c.predicted = pred.rows.size();
  c.expected = gt.rows.size();
  c.correct = best(pred, gt, key, [&](std::size_t p, std::size_t g) { return row_right(pred, p, gt, g) ? 1u : 0u; });
  return c;
}

double mean(const std::vector<double>& v) {
  long double s = 0;
  for (double x : v) s += x;
  return double(s / v.size());
}

double population_std(const std::vector<double>& v) {
  const double m = mean(v);
  long double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(double(s / v.size()));
}

double surrogate(double r, double adv, double lo, double hi) {
  double clipped = r;
  if (clipped < 1 - lo) clipped = 1 - lo;
  if (clipped > 1 + hi) clipped = 1 + hi;
  const double a = r * adv;
  const double b = clipped * adv;
  return a < b ? a : b;
}

bool repeats(const std::vector<long long>& tokens, std::size_t window, double p, std::size_t max_n) {
  const std::size_t len = std::min(window, tokens.size());
  const std::size_t off = tokens.size() - len;
  for (std::size_t n = 1; n <= max_n; ++n) {
    for (std::size_t s = 0; s + n < len; ++s) {
      std::size_t e = s;
      while (e + n < len && tokens[off + e] == tokens[off + e + n]) ++e;
      const std::size_t span = (e - s) + n;  // tokens s .. e+n-1 are n-periodic
      if (e > s && span >= 2 * n && double(span) >= p * double(len)) return true;
    }
  }
  return false;
}

}  // namespace oracle
