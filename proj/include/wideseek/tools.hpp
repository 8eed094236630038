#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "wideseek/policy.hpp"

namespace wideseek {

struct CorpusDoc {
  std::string doc_id;  // doubles as the URL
  std::string title;
  std::string text;
  friend bool operator==(const CorpusDoc&, const CorpusDoc&) = default;
};

// Reads corpus JSONL: {"id", "title", "text"} per line. Blank lines are
// skipped. Throws CorpusFormatError (bad line, duplicate id, empty text, empty
// corpus) or IoError.
[[nodiscard]] std::vector<CorpusDoc> read_corpus(const std::filesystem::path& path);

// Lowercased ASCII alphanumeric runs; bytes >= 0x80 count as word characters
// so UTF-8 words stay whole.
struct TermSpan {
  std::string term;
  std::size_t begin = 0;  // byte offsets into the source text
  std::size_t end = 0;
};
[[nodiscard]] std::vector<TermSpan> tokenize_terms(std::string_view text);

struct SearchHit {
  std::size_t rank = 1;
  std::string doc_id;
  std::string title;
  std::string snippet;
  double score = 0.0;
};

struct SearchResults {
  std::size_t k = 0;
  std::vector<SearchHit> hits;
};

struct ToolParams {
  std::size_t search_k = 5;
  std::size_t snippet_window = 30;  // terms
  std::size_t snippet_len = 200;    // bytes, cut back to a UTF-8 boundary
  std::size_t access_len = 200;     // terms
};

// BM25 inverted index over title + text. Immutable once built.
class Index {
 public:
  static constexpr double kK1 = 1.2;
  static constexpr double kB = 0.75;
  static constexpr std::string_view kFormat = "wideseek-bm25-v1";

  static Index build(std::vector<CorpusDoc> docs);
  static Index build_from_file(const std::filesystem::path& corpus);

  // Deterministic JSON artifact; identical corpora give identical bytes.
  [[nodiscard]] std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  static Index load(const std::filesystem::path& path);
  static Index deserialize(std::string_view bytes);

  [[nodiscard]] SearchResults search(std::string_view query, std::size_t k,
                                     const ToolParams& params = {}) const;

  // Query-conditioned extract of up to params.access_len terms. Throws UnknownUrl.
  [[nodiscard]] std::string access(std::string_view url, std::string_view query,
                                   const ToolParams& params = {}) const;

  [[nodiscard]] const CorpusDoc* find(std::string_view doc_id) const;
  [[nodiscard]] std::size_t doc_count() const noexcept { return docs_.size(); }
  [[nodiscard]] const std::vector<CorpusDoc>& docs() const noexcept { return docs_; }
  [[nodiscard]] const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
  };

  Index() = default;
  void finalize();

  std::vector<CorpusDoc> docs_;  // sorted by doc_id
  std::vector<std::uint32_t> doc_len_;
  std::map<std::string, std::vector<Posting>> postings_;
  std::unordered_map<std::string, std::size_t> by_id_;
  double avgdl_ = 0.0;
  std::string fingerprint_;
};

// One hit per line: rank, [doc_id], title, then the snippet after a dash.
[[nodiscard]] std::string format_search_results(const SearchResults& results);

// What agents call. Implementations must accept concurrent calls. Failures a
// retry can fix raise ToolUnavailable; anything else raises another Error,
// which the orchestrator turns into error text for the agent.
class ToolService {
 public:
  virtual ~ToolService() = default;
  virtual std::string search(const std::string& query) = 0;
  virtual std::string access(const std::string& url, const std::string& query) = 0;
  [[nodiscard]] virtual std::vector<std::string> versions() const = 0;
};

class LocalToolService : public ToolService {
 public:
  LocalToolService(std::shared_ptr<const Index> index, ToolParams params = {});

  std::string search(const std::string& query) override;
  std::string access(const std::string& url, const std::string& query) override;
  [[nodiscard]] std::vector<std::string> versions() const override;

  [[nodiscard]] const Index& index() const noexcept { return *index_; }
  [[nodiscard]] const ToolParams& params() const noexcept { return params_; }

 private:
  std::shared_ptr<const Index> index_;
  ToolParams params_;
};

// access hands the extract to the policy backend for a query-conditioned
// summary. Off by default; nondeterministic with a remote backend.
class SummarizingToolService final : public LocalToolService {
 public:
  SummarizingToolService(std::shared_ptr<const Index> index, ToolParams params,
                         PolicyBackend& backend, std::string summarizer_prompt,
                         SamplingParams sampling = {});

  std::string access(const std::string& url, const std::string& query) override;
  [[nodiscard]] std::vector<std::string> versions() const override;

 private:
  PolicyBackend& backend_;
  std::string prompt_;
  SamplingParams sampling_;
};

// HTTP tool service: POST {base}/search {"query"} and POST {base}/access
// {"url","query"}, each answering {"result": "<text>"}.
struct RemoteToolConfig {
  std::string base_url = "http://127.0.0.1:8001";
  std::string api_key_env = "WIDESEEK_TOOL_API_KEY";
  std::chrono::seconds timeout{60};
  RetryPolicy retry;
};

class RemoteToolService final : public ToolService {
 public:
  explicit RemoteToolService(RemoteToolConfig config);

  std::string search(const std::string& query) override;
  std::string access(const std::string& url, const std::string& query) override;
  [[nodiscard]] std::vector<std::string> versions() const override;

 private:
  std::string call(const std::string& path, const nlohmann::json& body);

  RemoteToolConfig config_;
  std::string api_key_;
};

}  // namespace wideseek
