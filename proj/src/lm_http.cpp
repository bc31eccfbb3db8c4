#include <chrono>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include "dqlore/lm.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dqlore {

namespace {

struct SplitUrl {
  std::string base;    // scheme://host:port
  std::string prefix;  // path prefix, "" or "/something"
};

SplitUrl split_url(const std::string& endpoint) {
  std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos)
    throw ValidationError("endpoint must include a scheme: " + endpoint);
  std::size_t slash = endpoint.find('/', scheme + 3);
  SplitUrl out;
  if (slash == std::string::npos) {
    out.base = endpoint;
  } else {
    out.base = endpoint.substr(0, slash);
    out.prefix = endpoint.substr(slash);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

bool looks_like_context_overflow(const std::string& body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  std::string code, message;
  if (j.is_object() && j.contains("error") && j["error"].is_object()) {
    const auto& err = j["error"];
    if (err.contains("code") && err["code"].is_string())
      code = err["code"].get<std::string>();
    if (err.contains("message") && err["message"].is_string())
      message = err["message"].get<std::string>();
  }
  if (code == "context_length_exceeded") return true;
  for (auto* needle : {"context length", "context_length", "maximum context"})
    if (message.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

struct HttpLm::Impl {
  SplitUrl url;
  LmOptions opts;
  std::string api_key;
  std::counting_semaphore<> slots;

  Impl(std::string endpoint, LmOptions options)
      : url(split_url(endpoint)),
        opts(std::move(options)),
        slots(opts.max_in_flight) {
    if (opts.max_in_flight < 1)
      throw ValidationError("max_in_flight must be at least 1");
    if (opts.max_retries < 0)
      throw ValidationError("max_retries must be non-negative");
    if (const char* key = std::getenv("DQLORE_API_KEY")) api_key = key;
  }

  // POSTs with retry/backoff; returns the parsed success body.
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body) {
    slots.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots};

    std::string payload = body.dump();
    int backoff_ms = opts.base_backoff_ms;
    std::string last_error;
    for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms *= 2;
      }
      httplib::Client client(url.base);
      client.set_connection_timeout(0, opts.timeout_ms * 1000LL);
      client.set_read_timeout(opts.timeout_ms / 1000, (opts.timeout_ms % 1000) * 1000);
      httplib::Headers headers;
      if (!api_key.empty())
        headers.emplace("Authorization", "Bearer " + api_key);
      auto res = client.Post(url.prefix + path, headers, payload,
                             "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 200 && res->status < 300) {
        nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_discarded())
          throw ProtocolError("lm endpoint returned non-JSON body");
        return parsed;
      }
      if (res->status >= 400 && res->status < 500 && res->status != 429) {
        if (looks_like_context_overflow(res->body))
          throw ContextLengthError("lm endpoint: prompt exceeds context window");
        throw Error("lm endpoint returned HTTP " + std::to_string(res->status) +
                    ": " + res->body);
      }
      last_error = "HTTP " + std::to_string(res->status);
    }
    throw Error("lm request failed after " + std::to_string(opts.max_retries + 1) +
                " attempts (" + last_error + ")");
  }
};

HttpLm::HttpLm(std::string endpoint, LmOptions opts)
    : impl_(std::make_unique<Impl>(std::move(endpoint), std::move(opts))) {}

HttpLm::~HttpLm() = default;

double HttpLm::score_completion(const std::string& context,
                                const std::string& continuation) {
  if (continuation.empty())
    throw ValidationError("score_completion: empty continuation");
  nlohmann::json body = {
      {"model", impl_->opts.model_name},
      {"prompt", context + continuation},
      {"echo", true},
      {"logprobs", 1},
      {"max_tokens", 0},
      {"temperature", 0.0},
  };
  nlohmann::json res = impl_->post_json("/v1/completions", body);
  if (!res.contains("choices") || !res["choices"].is_array() ||
      res["choices"].empty())
    throw ProtocolError("completions response has no choices");
  const auto& choice = res["choices"][0];
  if (!choice.contains("logprobs") || choice["logprobs"].is_null())
    throw ProtocolError("completions response missing logprobs");
  const auto& lp = choice["logprobs"];
  if (!lp.contains("token_logprobs") || !lp.contains("text_offset"))
    throw ProtocolError("completions logprobs missing token_logprobs/text_offset");
  const auto& probs = lp["token_logprobs"];
  const auto& offsets = lp["text_offset"];
  if (probs.size() != offsets.size())
    throw ProtocolError("completions logprobs arrays disagree in length");

  double total = 0.0;
  std::size_t counted = 0;
  auto boundary = static_cast<long long>(context.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (offsets[i].get<long long>() < boundary) continue;
    if (probs[i].is_null()) continue;  // first prompt token has no logprob
    total += probs[i].get<double>();
    ++counted;
  }
  if (impl_->opts.length_normalize && counted > 0)
    total /= static_cast<double>(counted);
  return total;
}

std::string HttpLm::generate(const std::string& prompt,
                             const std::vector<std::string>& stop) {
  if (prompt.empty()) throw ValidationError("generate: empty prompt");
  nlohmann::json body = {
      {"model", impl_->opts.model_name},
      {"messages",
       nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", impl_->opts.temperature},
      {"max_tokens", impl_->opts.max_tokens},
  };
  if (!stop.empty()) body["stop"] = stop;
  nlohmann::json res = impl_->post_json("/v1/chat/completions", body);
  if (!res.contains("choices") || !res["choices"].is_array() ||
      res["choices"].empty())
    throw ProtocolError("chat response has no choices");
  const auto& choice = res["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string())
    throw ProtocolError("chat response missing message content");
  // trim again locally in case the server ignored the stop list
  return truncate_at_stop(choice["message"]["content"].get<std::string>(), stop);
}

}  // namespace dqlore
