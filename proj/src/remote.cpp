// HTTP clients: the chat-completions policy backend and the remote tool service.
#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "wideseek/errors.hpp"
#include "wideseek/hash.hpp"
#include "wideseek/policy.hpp"
#include "wideseek/tools.hpp"

namespace wideseek {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ConfigError("invalid base URL '" + url + "'");
  std::string prefix = m[2].matched ? m[2].str() : std::string{};
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

std::string env_or_empty(const std::string& name) {
  if (name.empty()) return {};
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : std::string{};
}

json post_json(const Endpoint& ep, const std::string& path, const json& body, const std::string& api_key,
               std::chrono::seconds timeout, const httplib::Headers& extra, const char* what) {
  httplib::Client client(ep.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (!api_key.empty()) client.set_bearer_token_auth(api_key);
  auto res = client.Post(ep.prefix + path, extra, body.dump(), "application/json");
  if (!res) {
    std::string msg = std::string(what) + " unreachable: " + httplib::to_string(res.error());
    if (std::string_view(what) == "tool service") throw ToolUnavailable(msg);
    throw BackendUnavailable(msg);
  }
  if (res->status == 429 || res->status >= 500) {
    std::string msg = std::string(what) + " returned HTTP " + std::to_string(res->status);
    if (std::string_view(what) == "tool service") throw ToolUnavailable(msg);
    throw BackendUnavailable(msg);
  }
  if (res->status < 200 || res->status >= 300) {
    throw FormatError(std::string(what) + " rejected request with HTTP " + std::to_string(res->status) + ": " +
                      res->body.substr(0, 300));
  }
  json parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) throw FormatError(std::string(what) + " returned non-JSON body");
  if (auto it = res->headers.find("X-Request-Id"); it != res->headers.end()) {
    auto sent = extra.find("X-Request-Id");
    if (sent != extra.end() && sent->second != it->second) {
      throw BackendUnavailable("response correlation id " + it->second + " does not match " + sent->second);
    }
  }
  return parsed;
}

std::int64_t token_id_of(const json& entry) {
  for (const char* key : {"token_id", "id"}) {
    if (auto it = entry.find(key); it != entry.end() && it->is_number_integer()) return it->get<std::int64_t>();
  }
  std::string token = entry.value("token", std::string{});
  // vLLM with return_tokens_as_token_ids renders tokens as "token_id:<n>".
  if (token.rfind("token_id:", 0) == 0) return std::stoll(token.substr(9));
  return static_cast<std::int64_t>(fnv1a64(token) & 0x7fffffffULL);
}

json chat_messages(const std::vector<Message>& messages) {
  json out = json::array();
  for (const auto& m : messages) {
    // Tool results travel as user turns wrapped the way Qwen-style chat
    // templates render them; plain "tool" messages would need a tool_call_id.
    if (m.role == "tool") {
      out.push_back({{"role", "user"}, {"content", "<tool_response>\n" + m.content + "\n</tool_response>"}});
    } else {
      out.push_back({{"role", m.role}, {"content", m.content}});
    }
  }
  return out;
}

}  // namespace

RemoteBackend::RemoteBackend(RemoteBackendConfig config)
    : config_(std::move(config)),
      api_key_(env_or_empty(config_.api_key_env)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))) {
  split_url(config_.base_url);
  if (config_.model.empty()) throw ConfigError("remote backend needs a model name");
}

RemoteBackend::~RemoteBackend() = default;

std::string RemoteBackend::next_correlation_id() {
  return "ws-" + std::to_string(request_counter_.fetch_add(1) + 1);
}

json RemoteBackend::build_request_body(const GenerationRequest& request, std::string_view correlation_id) const {
  json messages = chat_messages(request.messages);
  return json{
      {"model", config_.model},
      {"messages", std::move(messages)},
      {"temperature", request.sampling.temperature},
      {"top_p", request.sampling.top_p},
      {"max_tokens", request.sampling.max_tokens},
      {"logprobs", true},
      {"seed", request.seed & 0x7fffffffffffffffULL},
      {"user", std::string(correlation_id)},
  };
}

Generation RemoteBackend::parse_response(const json& body) {
  try {
    const json& choice = body.at("choices").at(0);
    Generation gen;
    const json& content = choice.at("message").at("content");
    gen.text = content.is_null() ? std::string{} : content.get<std::string>();
    gen.finish = choice.value("finish_reason", std::string("stop")) == "length" ? FinishReason::Length
                                                                                : FinishReason::Stop;
    auto lp = choice.find("logprobs");
    if (lp == choice.end() || lp->is_null() || !lp->contains("content")) {
      throw FormatError("backend response carries no token logprobs");
    }
    for (const auto& entry : lp->at("content")) {
      gen.tokens.push_back({token_id_of(entry), entry.at("logprob").get<double>(), std::nullopt});
    }
    return gen;
  } catch (const json::exception& e) {
    throw FormatError(std::string("unexpected chat-completions response: ") + e.what());
  }
}

json RemoteBackend::post(const std::string& path, const json& body, const std::string& correlation_id) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{in_flight_};
  httplib::Headers headers{{"X-Request-Id", correlation_id}};
  return post_json(split_url(config_.base_url), path, body, api_key_, config_.timeout, headers, "policy backend");
}

Generation RemoteBackend::generate(const GenerationRequest& request) {
  request.validate();
  return with_retry(config_.retry, [&] {
    auto id = next_correlation_id();
    return parse_response(post("/v1/chat/completions", build_request_body(request, id), id));
  });
}

std::vector<double> RemoteBackend::rescore(const RescoreRequest& request) {
  json messages = chat_messages(request.messages);
  json ids = json::array();
  for (const auto& t : request.tokens) ids.push_back(t.token_id);
  json body = {{"model", config_.model}, {"messages", std::move(messages)}, {"token_ids", std::move(ids)}};
  json res = with_retry(config_.retry, [&] {
    auto id = next_correlation_id();
    return post("/v1/rescore", body, id);
  });
  std::vector<double> out;
  try {
    out = res.at("logprobs").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("unexpected rescore response: ") + e.what());
  }
  if (out.size() != request.tokens.size()) {
    throw LengthMismatch("rescore returned " + std::to_string(out.size()) + " logprobs for " +
                         std::to_string(request.tokens.size()) + " tokens");
  }
  return out;
}

std::size_t RemoteBackend::count_tokens(std::string_view text) const { return (text.size() + 3) / 4; }

RemoteToolService::RemoteToolService(RemoteToolConfig config)
    : config_(std::move(config)), api_key_(env_or_empty(config_.api_key_env)) {
  split_url(config_.base_url);
}

std::string RemoteToolService::call(const std::string& path, const json& body) {
  json res = with_retry(config_.retry, [&] {
    return post_json(split_url(config_.base_url), path, body, api_key_, config_.timeout, {}, "tool service");
  });
  if (!res.contains("result") || !res["result"].is_string()) {
    throw FormatError("tool service response lacks a string 'result'");
  }
  return res["result"].get<std::string>();
}

std::string RemoteToolService::search(const std::string& query) {
  return call("/search", {{"query", query}});
}

std::string RemoteToolService::access(const std::string& url, const std::string& query) {
  return call("/access", {{"url", url}, {"query", query}});
}

std::vector<std::string> RemoteToolService::versions() const {
  return {"search:remote:" + config_.base_url, "access:remote:" + config_.base_url};
}

}  // namespace wideseek
