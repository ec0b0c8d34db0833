#pragma once

#include <memory>
#include <string>

#include "metaloop/backend.hpp"

namespace metaloop {

struct HttpBackendOptions {
  std::string base_url; // e.g. "http://127.0.0.1:8000/v1"
  std::string model;
  std::string api_key;  // sent as a bearer token when non-empty
  long timeout_ms = 60000;
  int max_retries = 2;
};

/// Completions-shaped wire client with server-sent-event streaming.
/// Injection is realized as splice-and-continue: the payload is appended to
/// the session context and the next request conditions on the full spliced
/// prompt, which is observationally the same as forcing the payload tokens
/// one by one.
class HttpObjectBackend : public ObjectBackend {
 public:
  explicit HttpObjectBackend(HttpBackendOptions options);
  std::unique_ptr<GenSession> start(const std::string& prompt,
                                    const SamplingParams& params) override;

 private:
  HttpBackendOptions options_;
};

class HttpMetaBackend : public MetaBackend {
 public:
  explicit HttpMetaBackend(HttpBackendOptions options);
  MetaResult complete(const std::string& prompt, const SamplingParams& params) override;

 private:
  HttpBackendOptions options_;
};

}  // namespace metaloop
