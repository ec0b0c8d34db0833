#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace metaloop {

struct SamplingParams {
  double temperature = 0.6;
  double top_p = 0.95;
  long max_tokens = 0; // 0 = backend default
};

enum class EventKind { Text, Injected, EndOfGeneration };
enum class EventOrigin { ObjectModel, MetaAdvice, Terminator };

/// One entry of a session's append-only event log. The log is the source
/// of truth for reconstruction: the session context always equals the
/// initial prompt followed by every event's content in emission order.
struct TokenEvent {
  EventKind kind;
  EventOrigin origin;
  std::string content;
};

/// A byte sequence to splice into the stream head, as if the model had
/// generated it with probability one. Continuation then conditions on
/// prefix ++ payload.
struct InjectionRequest {
  std::string payload;
  EventOrigin origin = EventOrigin::MetaAdvice;
};

struct StopCondition {
  enum class Kind { Steps, EndOfGeneration };
  Kind kind = Kind::EndOfGeneration;
  std::size_t steps = 0;

  static StopCondition after_steps(std::size_t n) { return {Kind::Steps, n}; }
  static StopCondition end_of_generation() { return {Kind::EndOfGeneration, 0}; }
};

enum class StopReason { StepsCompleted, EndOfGeneration };

struct StreamResult {
  std::string text;           // bytes appended to the context by this call
  StopReason reason = StopReason::StepsCompleted;
  std::size_t token_count = 0; // generated tokens for this call (backend-reported or estimated)
};

struct MetaResult {
  std::string text;
  std::size_t token_count = 0; // completion tokens (backend-reported or estimated)
};

/// One live generation. Owned by a single pipeline; never shared across
/// threads. Context is append-only: streaming and injection both extend it.
class GenSession {
 public:
  virtual ~GenSession() = default;

  virtual const std::string& id() const = 0;
  std::size_t byte_length() const { return context().size(); }

  /// Streams token events until the stop condition. A step completes at a
  /// blank-line boundary. Emitted text is appended to the context and
  /// returned. Throws TransportError if the stream dies after the
  /// configured retries (partial text is preserved in the context).
  virtual StreamResult stream_until(const StopCondition& stop) = 0;

  /// Splices the payload onto the current stream head, byte-exact.
  /// Throws SessionError("session terminated") if generation has ended.
  virtual void inject(const InjectionRequest& request) = 0;

  virtual const std::string& context() const = 0;
  virtual const std::vector<TokenEvent>& events() const = 0;
  virtual bool closed() const = 0;

  /// Total generated (not injected) tokens so far.
  virtual std::size_t generated_tokens() const = 0;
};

/// Factory for object-level sessions. Handles are shareable across
/// pipelines; sessions are not.
class ObjectBackend {
 public:
  virtual ~ObjectBackend() = default;
  virtual std::unique_ptr<GenSession> start(const std::string& prompt,
                                            const SamplingParams& params) = 0;
};

/// Plain request/response completer for the supervising model.
class MetaBackend {
 public:
  virtual ~MetaBackend() = default;
  virtual MetaResult complete(const std::string& prompt, const SamplingParams& params) = 0;
};

/// Common bookkeeping for session implementations: context, event log,
/// lifecycle. Subclasses produce text; this class records it.
class SessionBase : public GenSession {
 public:
  const std::string& id() const override { return id_; }
  void inject(const InjectionRequest& request) override;
  const std::string& context() const override { return context_; }
  const std::vector<TokenEvent>& events() const override { return events_; }
  bool closed() const override { return closed_; }
  std::size_t generated_tokens() const override { return generated_tokens_; }

 protected:
  explicit SessionBase(std::string prompt);

  void append_text(const std::string& content, std::size_t token_count);
  void close_generation();
  const std::string& prompt() const { return prompt_; }

 private:
  std::string id_;
  std::string prompt_;
  std::string context_;
  std::vector<TokenEvent> events_;
  bool closed_ = false;
  std::size_t generated_tokens_ = 0;
};

}  // namespace metaloop
