#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "metaloop/lexicon.hpp"
#include "metaloop/monitor.hpp"
#include "metaloop/planner.hpp"
#include "metaloop/regulator.hpp"

#include <nlohmann/json.hpp>

namespace metaloop {

inline constexpr int kTraceSchemaVersion = 1;

enum class TerminatedBy { ModelStop, BudgetForced, Aborted };

const char* to_string(TerminatedBy t);

struct FormalizedEvent {
  FormalProblem formal;
};

struct DifficultyAssessedEvent {
  Difficulty difficulty = Difficulty::Medium;
};

struct StrategySelectedEvent {
  Strategy strategy;
  std::size_t budget_chunks = 0;
};

struct ChunkGeneratedEvent {
  Chunk chunk;
  std::string raw_text; // exact bytes streamed for this chunk region
};

/// Trailing bytes that segmented into no steps (whitespace-only tail before
/// end of generation). Kept so the context stays reconstructible.
struct TailTextEvent {
  std::string raw_text;
};

struct TriggerFiredEvent {
  std::size_t chunk_index = 0;
  TriggerAction action = TriggerAction::None;
};

struct CheckRunEvent {
  std::size_t chunk_index = 0;
  ErrorType error_type = ErrorType::Factual;
  CheckVerdict verdict;
  bool parse_degraded = false;
};

struct AdviceInjectedEvent {
  std::size_t chunk_index = 0;
  MetaAdvice advice;
  std::string payload; // exact bytes spliced into the stream
};

struct TerminationEvent {
  bool forced = true;
  std::string payload; // the terminator byte sequence
};

struct FinalAnswerEvent {
  std::string answer;
  std::string raw_text; // bytes streamed during the answer phase ("" when extracted)
};

using TraceEventBody =
    std::variant<FormalizedEvent, DifficultyAssessedEvent, StrategySelectedEvent,
                 ChunkGeneratedEvent, TailTextEvent, TriggerFiredEvent, CheckRunEvent,
                 AdviceInjectedEvent, TerminationEvent, FinalAnswerEvent>;

/// One entry of the append-only run log. `seq` is a deterministic logical
/// timestamp (emission order); token costs are the object/meta tokens this
/// event accounts for.
struct TraceEvent {
  std::size_t seq = 0;
  std::size_t object_tokens = 0;
  std::size_t meta_tokens = 0;
  TraceEventBody body;
};

struct RunOutcome {
  std::string final_answer;
  std::size_t total_object_tokens = 0;
  std::size_t total_meta_tokens = 0;
  std::size_t chunks_used = 0;
  TerminatedBy terminated_by = TerminatedBy::ModelStop;
};

/// The single source of truth for one run: every generated chunk, trigger
/// firing, meta check, injection and the termination, in emission order.
/// Serializes to one JSON document; metrics and replay read only this.
struct ReasoningTrace {
  std::string query;
  Plan plan;
  bool degraded_planning = false;
  bool aborted = false;
  std::string abort_reason;
  std::vector<TraceEvent> events;
  RunOutcome outcome;
  std::string final_context;
};

nlohmann::json trace_to_json(const ReasoningTrace& trace);
ReasoningTrace trace_from_json(const nlohmann::json& doc);

/// Initial prompt plus every streamed/injected byte, in order; equals
/// final_context on any well-formed trace.
std::string reconstruct_context(const ReasoningTrace& trace);

/// Structural checks: schema version, contiguous chunk indices, causal
/// ordering (advice after a failed check in the same chunk epoch), at most
/// one termination, token totals, context reconstruction. Returns the list
/// of violations; empty means valid.
std::vector<std::string> validate_trace(const nlohmann::json& doc);

struct ReplayEntry {
  std::size_t chunk_index = 0;
  double fact_freq = 0.0;
  double think_freq = 0.0;
  TriggerAction replay_action = TriggerAction::None;
  TriggerAction live_action = TriggerAction::None; // what the recorded run fired
};

/// Re-runs the trigger policy over a recorded trace's chunk statistics
/// under a possibly different monitor configuration. Throws ParseError on
/// a schema version mismatch.
std::vector<ReplayEntry> replay_monitor(const nlohmann::json& trace_doc,
                                        const MonitorConfig& config);

}  // namespace metaloop
