#include "wideseek/tools.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "wideseek/errors.hpp"
#include "wideseek/hash.hpp"

namespace wideseek {

using nlohmann::json;

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::set<std::string> query_terms(std::string_view query) {
  std::set<std::string> out;
  for (auto& t : tokenize_terms(query)) out.insert(std::move(t.term));
  return out;
}

// Start of the `width`-term window with the most query-term hits; earliest wins ties.
std::size_t best_window(const std::vector<TermSpan>& spans, const std::set<std::string>& terms,
                        std::size_t width) {
  if (spans.size() <= width || terms.empty()) return 0;
  std::vector<std::size_t> prefix(spans.size() + 1, 0);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    prefix[i + 1] = prefix[i] + (terms.count(spans[i].term) ? 1 : 0);
  }
  std::size_t best = 0, best_hits = 0;
  for (std::size_t s = 0; s + width <= spans.size(); ++s) {
    std::size_t hits = prefix[s + width] - prefix[s];
    if (hits > best_hits) {
      best = s;
      best_hits = hits;
    }
  }
  return best;
}

std::string_view window_text(std::string_view text, const std::vector<TermSpan>& spans,
                             std::size_t start, std::size_t width) {
  if (spans.empty()) return text.substr(0, 0);
  std::size_t end = std::min(spans.size(), start + width);
  return text.substr(spans[start].begin, spans[end - 1].end - spans[start].begin);
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      space = !out.empty();
    } else {
      if (space) out += ' ';
      space = false;
      out += c;
    }
  }
  return out;
}

std::string utf8_prefix(std::string s, std::size_t max_bytes) {
  if (s.size() <= max_bytes) return s;
  std::size_t cut = max_bytes;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  s.resize(cut);
  return s;
}

}  // namespace

std::vector<TermSpan> tokenize_terms(std::string_view text) {
  std::vector<TermSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    std::string term;
    while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
      char c = text[i];
      term += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
      ++i;
    }
    out.push_back({std::move(term), start, i});
  }
  return out;
}

std::vector<CorpusDoc> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::vector<CorpusDoc> docs;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    auto where = path.string() + ":" + std::to_string(lineno);
    if (j.is_discarded() || !j.is_object()) throw CorpusFormatError("invalid JSON at " + where);
    if (!j.contains("id") || !j.contains("text") || !j["id"].is_string() || !j["text"].is_string()) {
      throw CorpusFormatError("missing string field id/text at " + where);
    }
    CorpusDoc doc{j["id"].get<std::string>(), j.value("title", std::string{}), j["text"].get<std::string>()};
    if (doc.doc_id.empty()) throw CorpusFormatError("empty id at " + where);
    if (doc.text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw CorpusFormatError("empty text for '" + doc.doc_id + "' at " + where);
    }
    if (!seen.insert(doc.doc_id).second) throw CorpusFormatError("duplicate id '" + doc.doc_id + "' at " + where);
    docs.push_back(std::move(doc));
  }
  if (docs.empty()) throw CorpusFormatError("corpus " + path.string() + " has no documents");
  return docs;
}

Index Index::build(std::vector<CorpusDoc> docs) {
  if (docs.empty()) throw CorpusFormatError("cannot index an empty corpus");
  std::sort(docs.begin(), docs.end(), [](const CorpusDoc& a, const CorpusDoc& b) { return a.doc_id < b.doc_id; });
  for (std::size_t i = 1; i < docs.size(); ++i) {
    if (docs[i].doc_id == docs[i - 1].doc_id) throw CorpusFormatError("duplicate id '" + docs[i].doc_id + "'");
  }
  Index idx;
  idx.docs_ = std::move(docs);
  idx.doc_len_.resize(idx.docs_.size());
  for (std::size_t d = 0; d < idx.docs_.size(); ++d) {
    std::map<std::string, std::uint32_t> tf;
    std::uint32_t len = 0;
    for (const auto* field : {&idx.docs_[d].title, &idx.docs_[d].text}) {
      for (auto& t : tokenize_terms(*field)) {
        ++tf[t.term];
        ++len;
      }
    }
    idx.doc_len_[d] = len;
    for (auto& [term, n] : tf) idx.postings_[term].push_back({static_cast<std::uint32_t>(d), n});
  }
  idx.finalize();
  idx.fingerprint_ = hash_hex(idx.serialize());
  return idx;
}

Index Index::build_from_file(const std::filesystem::path& corpus) { return build(read_corpus(corpus)); }

void Index::finalize() {
  by_id_.clear();
  for (std::size_t d = 0; d < docs_.size(); ++d) by_id_.emplace(docs_[d].doc_id, d);
  double total = 0;
  for (auto l : doc_len_) total += l;
  avgdl_ = total > 0 ? total / static_cast<double>(docs_.size()) : 1.0;
}

std::string Index::serialize() const {
  json docs = json::array();
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    docs.push_back({docs_[d].doc_id, docs_[d].title, docs_[d].text, doc_len_[d]});
  }
  json postings = json::object();
  for (const auto& [term, list] : postings_) {
    json arr = json::array();
    for (const auto& p : list) arr.push_back({p.doc, p.tf});
    postings[term] = std::move(arr);
  }
  json j = {{"format", kFormat}, {"k1", kK1}, {"b", kB}, {"docs", std::move(docs)}, {"postings", std::move(postings)}};
  return dump_json(j);
}

void Index::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write index " + path.string());
  out << serialize();
  if (!out) throw IoError("write failed for index " + path.string());
}

Index Index::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open index " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

Index Index::deserialize(std::string_view bytes) {
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded() || j.value("format", std::string{}) != kFormat) {
    throw CorpusFormatError("not a wideseek index artifact");
  }
  Index idx;
  try {
    for (const auto& d : j.at("docs")) {
      idx.docs_.push_back({d.at(0).get<std::string>(), d.at(1).get<std::string>(), d.at(2).get<std::string>()});
      idx.doc_len_.push_back(d.at(3).get<std::uint32_t>());
    }
    for (const auto& [term, list] : j.at("postings").items()) {
      auto& vec = idx.postings_[term];
      for (const auto& p : list) vec.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()});
    }
  } catch (const json::exception& e) {
    throw CorpusFormatError(std::string("corrupt index artifact: ") + e.what());
  }
  if (idx.docs_.empty()) throw CorpusFormatError("index artifact has no documents");
  idx.finalize();
  // Over the canonical form, so extra top-level keys (provenance) don't change it.
  idx.fingerprint_ = hash_hex(idx.serialize());
  return idx;
}

const CorpusDoc* Index::find(std::string_view doc_id) const {
  auto it = by_id_.find(std::string(doc_id));
  return it == by_id_.end() ? nullptr : &docs_[it->second];
}

SearchResults Index::search(std::string_view query, std::size_t k, const ToolParams& params) const {
  if (k == 0) throw PreconditionError("search k must be at least 1");
  SearchResults out;
  out.k = k;
  const auto terms = query_terms(query);
  const double n = static_cast<double>(docs_.size());
  std::map<std::uint32_t, double> scores;
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double df = static_cast<double>(it->second.size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const auto& p : it->second) {
      const double tf = p.tf;
      const double norm = kK1 * (1.0 - kB + kB * doc_len_[p.doc] / avgdl_);
      scores[p.doc] += idf * tf * (kK1 + 1.0) / (tf + norm);
    }
  }
  std::vector<std::pair<std::uint32_t, double>> ranked(scores.begin(), scores.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > k) ranked.resize(k);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const CorpusDoc& doc = docs_[ranked[r].first];
    auto spans = tokenize_terms(doc.text);
    auto start = best_window(spans, terms, params.snippet_window);
    std::string snippet = collapse_ws(window_text(doc.text, spans, start, params.snippet_window));
    out.hits.push_back({r + 1, doc.doc_id, doc.title, utf8_prefix(std::move(snippet), params.snippet_len),
                        ranked[r].second});
  }
  return out;
}

std::string Index::access(std::string_view url, std::string_view query, const ToolParams& params) const {
  const CorpusDoc* doc = find(url);
  if (doc == nullptr) {
    throw UnknownUrl("unknown URL '" + std::string(url) +
                     "'; only URLs returned by search can be accessed");
  }
  auto spans = tokenize_terms(doc->text);
  auto start = best_window(spans, query_terms(query), params.access_len);
  return std::string(window_text(doc->text, spans, start, params.access_len));
}

std::string format_search_results(const SearchResults& results) {
  if (results.hits.empty()) return "No results found.";
  std::string out;
  for (const auto& h : results.hits) {
    if (!out.empty()) out += '\n';
    out += std::to_string(h.rank) + ". [" + h.doc_id + "] " + h.title + " \xE2\x80\x94 " + h.snippet;
  }
  return out;
}

LocalToolService::LocalToolService(std::shared_ptr<const Index> index, ToolParams params)
    : index_(std::move(index)), params_(params) {
  if (!index_) throw PreconditionError("tool service needs an index");
}

std::string LocalToolService::search(const std::string& query) {
  return format_search_results(index_->search(query, params_.search_k, params_));
}

std::string LocalToolService::access(const std::string& url, const std::string& query) {
  return index_->access(url, query, params_);
}

std::vector<std::string> LocalToolService::versions() const {
  return {"search:bm25-v1", "access:extract-v1", "index:" + index_->fingerprint()};
}

SummarizingToolService::SummarizingToolService(std::shared_ptr<const Index> index, ToolParams params,
                                               PolicyBackend& backend, std::string summarizer_prompt,
                                               SamplingParams sampling)
    : LocalToolService(std::move(index), params),
      backend_(backend),
      prompt_(std::move(summarizer_prompt)),
      sampling_(sampling) {}

std::string SummarizingToolService::access(const std::string& url, const std::string& query) {
  std::string extract = LocalToolService::access(url, query);
  GenerationRequest req;
  req.messages = {{"system", prompt_}, {"user", "Query: " + query + "\n\nDocument (" + url + "):\n" + extract}};
  req.sampling = sampling_;
  req.role = std::string(kSummarizerRole);
  req.query_id = url;
  req.seed = fnv1a64(url + '\n' + query);
  return with_retry(RetryPolicy{}, [&] { return backend_.generate(req); }).text;
}

std::vector<std::string> SummarizingToolService::versions() const {
  auto v = LocalToolService::versions();
  v[1] = "access:summarize-v1:" + backend_.tokenizer_id();
  return v;
}

}  // namespace wideseek
