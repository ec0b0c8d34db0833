#include "metaloop/http_backend.hpp"

#include <cctype>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "metaloop/errors.hpp"
#include "metaloop/lexicon.hpp"

namespace metaloop {
namespace {

using nlohmann::json;

struct Endpoint {
  std::string origin;      // scheme://host[:port]
  std::string path_prefix; // e.g. "/v1"
};

Endpoint split_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("backend base_url '" + base_url + "' has no scheme");
  }
  auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint endpoint;
  if (path_start == std::string::npos) {
    endpoint.origin = base_url;
    endpoint.path_prefix = "/v1";
  } else {
    endpoint.origin = base_url.substr(0, path_start);
    endpoint.path_prefix = base_url.substr(path_start);
    while (!endpoint.path_prefix.empty() && endpoint.path_prefix.back() == '/') {
      endpoint.path_prefix.pop_back();
    }
  }
  return endpoint;
}

std::unique_ptr<httplib::Client> make_client(const HttpBackendOptions& options,
                                             const Endpoint& endpoint) {
  auto client = std::make_unique<httplib::Client>(endpoint.origin);
  auto seconds = options.timeout_ms / 1000;
  auto microseconds = (options.timeout_ms % 1000) * 1000;
  client->set_connection_timeout(seconds, microseconds);
  client->set_read_timeout(seconds, microseconds);
  client->set_write_timeout(seconds, microseconds);
  if (!options.api_key.empty()) {
    client->set_bearer_token_auth(options.api_key);
  }
  return client;
}

bool is_timeout(httplib::Error error) {
  return error == httplib::Error::ConnectionTimeout || error == httplib::Error::Read ||
         error == httplib::Error::Write;
}

[[noreturn]] void raise_http_error(httplib::Error error, const std::string& what) {
  std::string message = what + ": " + httplib::to_string(error);
  if (is_timeout(error)) {
    throw TimeoutError(message);
  }
  throw TransportError(message);
}

json sampling_body(const std::string& model, const std::string& prompt,
                   const SamplingParams& params) {
  json body{{"model", model}, {"prompt", prompt}, {"temperature", params.temperature},
            {"top_p", params.top_p}};
  if (params.max_tokens > 0) {
    body["max_tokens"] = params.max_tokens;
  }
  return body;
}

/// Byte offset where the n-th step's content ends (the start of its trailing
/// blank-line run), or npos when fewer than n steps are complete.
std::size_t nth_step_end(const std::string& text, std::size_t n) {
  std::size_t steps = 0;
  bool content = false;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '\n') {
      std::size_t run_start = i;
      std::size_t newlines = 0;
      while (i < text.size() && (text[i] == '\n' || text[i] == '\r')) {
        if (text[i] == '\n') ++newlines;
        ++i;
      }
      if (newlines >= 2 && content) {
        ++steps;
        if (steps == n) return run_start;
        content = false;
      }
      continue;
    }
    if (!std::isspace(static_cast<unsigned char>(c))) content = true;
    ++i;
  }
  return std::string::npos;
}

// Incremental server-sent-events line parser for completion deltas.
class SseAccumulator {
 public:
  // Returns false once the server signalled the end of the stream.
  bool feed(const char* data, std::size_t length) {
    buffer_.append(data, length);
    std::size_t start = 0;
    while (true) {
      auto nl = buffer_.find('\n', start);
      if (nl == std::string::npos) break;
      std::string line = buffer_.substr(start, nl - start);
      start = nl + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!handle_line(line)) {
        buffer_.clear();
        return false;
      }
    }
    buffer_.erase(0, start);
    return true;
  }

  const std::string& text() const { return text_; }
  bool finished() const { return finished_; }

 private:
  bool handle_line(const std::string& line) {
    constexpr std::string_view kPrefix = "data: ";
    if (line.rfind(kPrefix, 0) != 0) return true;
    std::string payload = line.substr(kPrefix.size());
    if (payload == "[DONE]") {
      finished_ = true;
      return false;
    }
    json delta;
    try {
      delta = json::parse(payload);
    } catch (const json::exception&) {
      return true; // tolerate keep-alive noise
    }
    if (delta.contains("choices") && !delta["choices"].empty()) {
      const auto& choice = delta["choices"][0];
      if (choice.contains("text")) {
        text_ += choice["text"].get<std::string>();
      }
      if (choice.contains("finish_reason") && !choice["finish_reason"].is_null()) {
        finished_ = true;
      }
    }
    return true;
  }

  std::string buffer_;
  std::string text_;
  bool finished_ = false;
};

class HttpSession : public SessionBase {
 public:
  HttpSession(std::string prompt, HttpBackendOptions options, SamplingParams params)
      : SessionBase(std::move(prompt)),
        options_(std::move(options)),
        endpoint_(split_base_url(options_.base_url)),
        params_(params) {}

  StreamResult stream_until(const StopCondition& stop) override {
    StreamResult result;
    if (closed()) {
      result.reason = StopReason::EndOfGeneration;
      return result;
    }
    if (stop.kind == StopCondition::Kind::Steps && stop.steps == 0) {
      result.reason = StopReason::StepsCompleted;
      return result;
    }

    int attempts_left = options_.max_retries;
    while (true) {
      SseAccumulator sse;
      std::size_t cut = std::string::npos;
      bool target_reached = false;

      json body = sampling_body(options_.model, context(), params_);
      body["stream"] = true;

      auto client = make_client(options_, endpoint_);
      httplib::Request request;
      request.method = "POST";
      request.path = endpoint_.path_prefix + "/completions";
      request.set_header("Accept", "text/event-stream");
      request.set_header("Content-Type", "application/json");
      if (!options_.api_key.empty()) {
        request.set_header("Authorization", "Bearer " + options_.api_key);
      }
      request.body = body.dump();
      request.content_receiver = [&](const char* data, std::size_t length, std::uint64_t,
                                     std::uint64_t) {
        if (!sse.feed(data, length)) return false;
        if (stop.kind == StopCondition::Kind::Steps) {
          auto end = nth_step_end(sse.text(), stop.steps);
          if (end != std::string::npos) {
            cut = end;
            target_reached = true;
            return false; // enough steps, drop the connection
          }
        }
        return true;
      };
      auto response = client->send(request);

      if (target_reached) {
        std::string kept = sse.text().substr(0, cut);
        append_result(result, kept);
        result.reason = StopReason::StepsCompleted;
        return result;
      }
      if (sse.finished() || (response && response->status / 100 == 2)) {
        append_result(result, sse.text());
        close_generation();
        result.reason = StopReason::EndOfGeneration;
        return result;
      }

      // Failed attempt: keep whatever was generated, then resume from the
      // grown context or give up.
      append_result(result, sse.text());
      if (response && response->status / 100 == 4) {
        throw TransportError("object stream rejected: HTTP " + std::to_string(response->status) +
                             " " + response->body);
      }
      if (attempts_left-- <= 0) {
        if (response) {
          throw TransportError("object stream failed: HTTP " + std::to_string(response->status));
        }
        raise_http_error(response.error(), "object stream failed");
      }
    }
  }

 private:
  void append_result(StreamResult& result, const std::string& text) {
    if (text.empty()) return;
    std::size_t tokens = whitespace_token_count(text);
    append_text(text, tokens);
    result.text += text;
    result.token_count += tokens;
  }

  HttpBackendOptions options_;
  Endpoint endpoint_;
  SamplingParams params_;
};

}  // namespace

HttpObjectBackend::HttpObjectBackend(HttpBackendOptions options) : options_(std::move(options)) {
  split_base_url(options_.base_url); // validate eagerly
}

std::unique_ptr<GenSession> HttpObjectBackend::start(const std::string& prompt,
                                                     const SamplingParams& params) {
  if (prompt.empty()) {
    throw SessionError("prompt is empty");
  }
  return std::make_unique<HttpSession>(prompt, options_, params);
}

HttpMetaBackend::HttpMetaBackend(HttpBackendOptions options) : options_(std::move(options)) {
  split_base_url(options_.base_url);
}

MetaResult HttpMetaBackend::complete(const std::string& prompt, const SamplingParams& params) {
  if (prompt.empty()) {
    throw SessionError("prompt is empty");
  }
  Endpoint endpoint = split_base_url(options_.base_url);
  json body = sampling_body(options_.model, prompt, params);

  int attempts_left = options_.max_retries;
  while (true) {
    auto client = make_client(options_, endpoint);
    auto response =
        client->Post(endpoint.path_prefix + "/completions", body.dump(), "application/json");
    if (response && response->status / 100 == 2) {
      try {
        json doc = json::parse(response->body);
        MetaResult result;
        result.text = doc.at("choices").at(0).at("text").get<std::string>();
        if (doc.contains("usage") && doc["usage"].contains("completion_tokens")) {
          result.token_count = doc["usage"]["completion_tokens"].get<std::size_t>();
        } else {
          result.token_count = whitespace_token_count(result.text);
        }
        return result;
      } catch (const json::exception& ex) {
        throw ParseError(std::string("meta reply is not a completion: ") + ex.what());
      }
    }
    if (response && response->status / 100 == 4) {
      throw TransportError("meta call rejected: HTTP " + std::to_string(response->status) + " " +
                           response->body);
    }
    if (attempts_left-- <= 0) {
      if (response) {
        throw TransportError("meta call failed: HTTP " + std::to_string(response->status));
      }
      raise_http_error(response.error(), "meta call failed");
    }
  }
}

}  // namespace metaloop
