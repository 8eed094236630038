#include "wideseek/policy.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "wideseek/errors.hpp"
#include "wideseek/hash.hpp"

namespace wideseek {

using nlohmann::json;

namespace detail {

void sleep_for_retry(std::chrono::milliseconds delay) {
  if (delay.count() > 0) std::this_thread::sleep_for(delay);
}

bool is_retryable(const std::exception& e) noexcept {
  return dynamic_cast<const BackendUnavailable*>(&e) != nullptr ||
         dynamic_cast<const ToolUnavailable*>(&e) != nullptr;
}

}  // namespace detail

void GenerationRequest::validate() const {
  if (messages.empty()) throw PreconditionError("generation request has no messages");
  if (sampling.max_tokens == 0) throw PreconditionError("max_tokens must be at least 1");
}

std::chrono::milliseconds RetryPolicy::delay_for(std::size_t attempt) const {
  auto delay = base_delay;
  for (std::size_t i = 1; i < attempt && delay < max_delay; ++i) delay *= 2;
  return std::min(delay, max_delay);
}

std::vector<ScriptedTokenizer::Piece> ScriptedTokenizer::tokenize(std::string_view text) {
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  std::vector<Piece> pieces;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    while (i < text.size() && is_ws(text[i])) ++i;
    while (i < text.size() && !is_ws(text[i])) ++i;
    std::string_view piece = text.substr(start, i - start);
    pieces.push_back({piece, static_cast<std::int64_t>(fnv1a64(piece) & 0x7fffffffULL)});
  }
  return pieces;
}

std::size_t ScriptedTokenizer::count(std::string_view text) { return tokenize(text).size(); }

namespace {

std::optional<std::vector<double>> optional_doubles(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::vector<double>>();
}

ScriptedBackend::Variant variant_from_json(const json& j) {
  ScriptedBackend::Variant v;
  v.text = j.at("text").get<std::string>();
  v.logprobs = optional_doubles(j, "logprobs");
  v.rescore_logprobs = optional_doubles(j, "rescore_logprobs");
  v.finish = finish_reason_from_string(j.value("finish_reason", std::string("stop")));
  if (v.logprobs && v.logprobs->size() != ScriptedTokenizer::count(v.text)) {
    throw ConfigError("script logprobs length does not match token count of '" + v.text.substr(0, 40) + "'");
  }
  return v;
}

std::vector<double> variant_logprobs(const ScriptedBackend::Variant& v, std::size_t n) {
  if (v.logprobs) return *v.logprobs;
  return std::vector<double>(n, ScriptedBackend::kDefaultLogprob);
}

}  // namespace

ScriptedBackend::ScriptedBackend(std::vector<Entry> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.variants.empty()) throw ConfigError("script entry for role '" + e.role + "' has no text");
  }
}

ScriptedBackend ScriptedBackend::from_json(const json& script) {
  const json& list = script.is_array() ? script : script.at("entries");
  std::vector<Entry> entries;
  try {
    for (const auto& e : list) {
      Entry entry;
      entry.role = e.at("role").get<std::string>();
      entry.turn = e.at("turn").get<std::size_t>();
      if (e.contains("query_id")) entry.query_id = e.at("query_id").get<std::string>();
      if (e.contains("task")) entry.task = e.at("task").get<std::string>();
      if (e.contains("state_hash")) entry.state_hash = e.at("state_hash").get<std::string>();
      if (e.contains("variants")) {
        for (const auto& v : e.at("variants")) entry.variants.push_back(variant_from_json(v));
      } else {
        entry.variants.push_back(variant_from_json(e));
      }
      entries.push_back(std::move(entry));
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed script: ") + ex.what());
  }
  return ScriptedBackend(std::move(entries));
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open script file " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("script file is not valid JSON: " + path.string());
  return from_json(j);
}

const ScriptedBackend::Variant& ScriptedBackend::lookup(std::string_view role, std::size_t turn,
                                                        std::string_view query_id,
                                                        const std::vector<Message>& messages,
                                                        std::string_view state_hash,
                                                        std::uint64_t seed) const {
  const std::string_view task = messages.size() > 1 ? std::string_view(messages[1].content) : std::string_view{};
  const Entry* best = nullptr;
  int best_specificity = -1;
  for (const auto& e : entries_) {
    if (e.role != role || e.turn != turn) continue;
    if (e.query_id && *e.query_id != query_id) continue;
    if (e.task && *e.task != task) continue;
    if (e.state_hash && *e.state_hash != state_hash) continue;
    int specificity = int(e.query_id.has_value()) + int(e.task.has_value()) + int(e.state_hash.has_value());
    if (specificity > best_specificity) {
      best = &e;
      best_specificity = specificity;
    }
  }
  if (best == nullptr) {
    throw ScriptMiss("no script entry for role=" + std::string(role) + " turn=" + std::to_string(turn) +
                     " query_id=" + std::string(query_id) + " state_hash=" + std::string(state_hash));
  }
  if (best->variants.size() == 1) return best->variants.front();
  return best->variants[splitmix64(seed) % best->variants.size()];
}

Generation ScriptedBackend::generate(const GenerationRequest& request) {
  request.validate();
  const Variant& v = lookup(request.role, request.turn, request.query_id, request.messages,
                            request.state_hash, request.seed);
  auto pieces = ScriptedTokenizer::tokenize(v.text);
  auto logprobs = variant_logprobs(v, pieces.size());

  Generation gen;
  gen.finish = v.finish;
  std::size_t n = pieces.size();
  if (n > request.sampling.max_tokens) {
    n = request.sampling.max_tokens;
    gen.finish = FinishReason::Length;
  }
  for (std::size_t i = 0; i < n; ++i) {
    gen.text += pieces[i].text;
    gen.tokens.push_back({pieces[i].id, logprobs[i], std::nullopt});
  }
  return gen;
}

std::vector<double> ScriptedBackend::rescore(const RescoreRequest& request) {
  const Variant& v = lookup(request.role, request.turn, request.query_id, request.messages,
                            request.state_hash, request.seed);
  auto pieces = ScriptedTokenizer::tokenize(v.text);
  const std::size_t n = request.tokens.size();
  if (n > pieces.size()) {
    throw LengthMismatch("rescore of " + std::to_string(n) + " tokens against a " +
                         std::to_string(pieces.size()) + "-token script continuation");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (pieces[i].id != request.tokens[i].token_id) {
      throw LengthMismatch("token " + std::to_string(i) + " differs from the script tokenization");
    }
  }
  std::vector<double> out = v.rescore_logprobs ? *v.rescore_logprobs : variant_logprobs(v, pieces.size());
  if (out.size() < n) {
    throw LengthMismatch("rescore override has " + std::to_string(out.size()) + " values for " +
                         std::to_string(n) + " tokens");
  }
  out.resize(n);
  return out;
}

std::size_t ScriptedBackend::count_tokens(std::string_view text) const {
  return ScriptedTokenizer::count(text);
}

}  // namespace wideseek
