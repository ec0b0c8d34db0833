#include "metaloop/backend.hpp"

#include <atomic>
#include <cstdint>

#include "metaloop/errors.hpp"
#include "metaloop/lexicon.hpp"

namespace metaloop {

namespace {

std::string next_session_id() {
  static std::atomic<std::uint64_t> counter{0};
  return "session-" + std::to_string(counter.fetch_add(1) + 1);
}

}  // namespace

SessionBase::SessionBase(std::string prompt)
    : id_(next_session_id()), prompt_(prompt), context_(std::move(prompt)) {}

void SessionBase::inject(const InjectionRequest& request) {
  if (closed_) {
    throw SessionError("session terminated");
  }
  if (request.payload.empty()) {
    throw SessionError("injection payload is empty");
  }
  context_ += request.payload;
  events_.push_back(TokenEvent{EventKind::Injected, request.origin, request.payload});
}

void SessionBase::append_text(const std::string& content, std::size_t token_count) {
  if (content.empty()) return;
  context_ += content;
  generated_tokens_ += token_count;
  events_.push_back(TokenEvent{EventKind::Text, EventOrigin::ObjectModel, content});
}

void SessionBase::close_generation() {
  if (closed_) return;
  closed_ = true;
  events_.push_back(TokenEvent{EventKind::EndOfGeneration, EventOrigin::ObjectModel, ""});
}

}  // namespace metaloop
