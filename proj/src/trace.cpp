#include "metaloop/trace.hpp"

#include <sstream>

#include "metaloop/errors.hpp"

namespace metaloop {
namespace {

using nlohmann::json;

const char* kind_name(const TraceEventBody& body) {
  struct Visitor {
    const char* operator()(const FormalizedEvent&) { return "formalized"; }
    const char* operator()(const DifficultyAssessedEvent&) { return "difficulty_assessed"; }
    const char* operator()(const StrategySelectedEvent&) { return "strategy_selected"; }
    const char* operator()(const ChunkGeneratedEvent&) { return "chunk_generated"; }
    const char* operator()(const TailTextEvent&) { return "tail_text"; }
    const char* operator()(const TriggerFiredEvent&) { return "trigger_fired"; }
    const char* operator()(const CheckRunEvent&) { return "check_run"; }
    const char* operator()(const AdviceInjectedEvent&) { return "advice_injected"; }
    const char* operator()(const TerminationEvent&) { return "termination"; }
    const char* operator()(const FinalAnswerEvent&) { return "final_answer"; }
  };
  return std::visit(Visitor{}, body);
}

TriggerAction trigger_action_from_string(const std::string& name) {
  if (name == "none") return TriggerAction::None;
  if (name == "fact") return TriggerAction::Fact;
  if (name == "think") return TriggerAction::Think;
  if (name == "all") return TriggerAction::All;
  throw ParseError("unknown trigger action '" + name + "'");
}

ErrorType error_type_from_string(const std::string& name) {
  if (name == "factual") return ErrorType::Factual;
  if (name == "thinking") return ErrorType::Thinking;
  if (name == "both") return ErrorType::Both;
  throw ParseError("unknown error type '" + name + "'");
}

TerminatedBy terminated_by_from_string(const std::string& name) {
  if (name == "model_stop") return TerminatedBy::ModelStop;
  if (name == "budget_forced") return TerminatedBy::BudgetForced;
  if (name == "aborted") return TerminatedBy::Aborted;
  throw ParseError("unknown termination mode '" + name + "'");
}

json formal_to_json(const FormalProblem& formal) {
  return json{{"knowns", formal.knowns}, {"goal", formal.goal}, {"constraints", formal.constraints}};
}

FormalProblem formal_from_json(const json& doc) {
  FormalProblem formal;
  formal.knowns = doc.at("knowns").get<std::vector<std::string>>();
  formal.goal = doc.at("goal").get<std::string>();
  formal.constraints = doc.at("constraints").get<std::vector<std::string>>();
  return formal;
}

json strategy_to_json(const Strategy& strategy) {
  return json{{"kind", to_string(strategy.kind)}, {"template", strategy.prompt_template}};
}

Strategy strategy_from_json(const json& doc) {
  return Strategy{strategy_kind_from_string(doc.at("kind").get<std::string>()),
                  doc.at("template").get<std::string>()};
}

json chunk_to_json(const Chunk& chunk) {
  json steps = json::array();
  for (const auto& step : chunk.steps) {
    steps.push_back(json{{"text", step.text}, {"token_count", step.token_count}});
  }
  return json{{"index", chunk.index},
              {"steps", std::move(steps)},
              {"stats",
               json{{"total_tokens", chunk.stats.total_tokens},
                    {"fact_hits", chunk.stats.fact_hits},
                    {"fact_freq", chunk.stats.fact_freq},
                    {"think_hits", chunk.stats.think_hits},
                    {"think_freq", chunk.stats.think_freq}}}};
}

Chunk chunk_from_json(const json& doc) {
  Chunk chunk;
  chunk.index = doc.at("index").get<std::size_t>();
  for (const auto& step : doc.at("steps")) {
    chunk.steps.push_back(
        Step{step.at("text").get<std::string>(), step.at("token_count").get<std::size_t>()});
  }
  const auto& stats = doc.at("stats");
  chunk.stats.total_tokens = stats.at("total_tokens").get<std::size_t>();
  chunk.stats.fact_hits = stats.at("fact_hits").get<std::size_t>();
  chunk.stats.fact_freq = stats.at("fact_freq").get<double>();
  chunk.stats.think_hits = stats.at("think_hits").get<std::size_t>();
  chunk.stats.think_freq = stats.at("think_freq").get<double>();
  return chunk;
}

json event_to_json(const TraceEvent& event) {
  json doc{{"seq", event.seq},
           {"kind", kind_name(event.body)},
           {"object_tokens", event.object_tokens},
           {"meta_tokens", event.meta_tokens}};
  struct Visitor {
    json& doc;
    void operator()(const FormalizedEvent& e) { doc["formal"] = formal_to_json(e.formal); }
    void operator()(const DifficultyAssessedEvent& e) { doc["difficulty"] = to_string(e.difficulty); }
    void operator()(const StrategySelectedEvent& e) {
      doc["strategy"] = strategy_to_json(e.strategy);
      doc["budget_chunks"] = e.budget_chunks;
    }
    void operator()(const ChunkGeneratedEvent& e) {
      doc["chunk_index"] = e.chunk.index;
      doc["raw_text"] = e.raw_text;
      doc["chunk"] = chunk_to_json(e.chunk);
    }
    void operator()(const TailTextEvent& e) { doc["raw_text"] = e.raw_text; }
    void operator()(const TriggerFiredEvent& e) {
      doc["chunk_index"] = e.chunk_index;
      doc["action"] = to_string(e.action);
    }
    void operator()(const CheckRunEvent& e) {
      doc["chunk_index"] = e.chunk_index;
      doc["error_type"] = to_string(e.error_type);
      doc["error_found"] = e.verdict.error_found;
      doc["failed_aspects"] = e.verdict.failed_aspects;
      doc["parse_degraded"] = e.parse_degraded;
    }
    void operator()(const AdviceInjectedEvent& e) {
      doc["chunk_index"] = e.chunk_index;
      doc["error_type"] = to_string(e.advice.error_type);
      doc["manifestation"] = e.advice.manifestation;
      doc["suggestion"] = e.advice.suggestion;
      doc["suggestion_synthesized"] = e.advice.suggestion_synthesized;
      doc["payload"] = e.payload;
    }
    void operator()(const TerminationEvent& e) {
      doc["forced"] = e.forced;
      doc["payload"] = e.payload;
    }
    void operator()(const FinalAnswerEvent& e) {
      doc["answer"] = e.answer;
      doc["raw_text"] = e.raw_text;
    }
  };
  std::visit(Visitor{doc}, event.body);
  return doc;
}

TraceEventBody event_body_from_json(const json& doc) {
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "formalized") {
    return FormalizedEvent{formal_from_json(doc.at("formal"))};
  }
  if (kind == "difficulty_assessed") {
    return DifficultyAssessedEvent{difficulty_from_string(doc.at("difficulty").get<std::string>())};
  }
  if (kind == "strategy_selected") {
    return StrategySelectedEvent{strategy_from_json(doc.at("strategy")),
                                 doc.at("budget_chunks").get<std::size_t>()};
  }
  if (kind == "chunk_generated") {
    return ChunkGeneratedEvent{chunk_from_json(doc.at("chunk")),
                               doc.at("raw_text").get<std::string>()};
  }
  if (kind == "tail_text") {
    return TailTextEvent{doc.at("raw_text").get<std::string>()};
  }
  if (kind == "trigger_fired") {
    return TriggerFiredEvent{doc.at("chunk_index").get<std::size_t>(),
                             trigger_action_from_string(doc.at("action").get<std::string>())};
  }
  if (kind == "check_run") {
    CheckRunEvent event;
    event.chunk_index = doc.at("chunk_index").get<std::size_t>();
    event.error_type = error_type_from_string(doc.at("error_type").get<std::string>());
    event.verdict.error_found = doc.at("error_found").get<bool>();
    event.verdict.failed_aspects = doc.at("failed_aspects").get<std::vector<std::string>>();
    event.parse_degraded = doc.at("parse_degraded").get<bool>();
    return event;
  }
  if (kind == "advice_injected") {
    AdviceInjectedEvent event;
    event.chunk_index = doc.at("chunk_index").get<std::size_t>();
    event.advice.error_type = error_type_from_string(doc.at("error_type").get<std::string>());
    event.advice.manifestation = doc.at("manifestation").get<std::string>();
    event.advice.suggestion = doc.at("suggestion").get<std::string>();
    event.advice.suggestion_synthesized = doc.at("suggestion_synthesized").get<bool>();
    event.payload = doc.at("payload").get<std::string>();
    return event;
  }
  if (kind == "termination") {
    return TerminationEvent{doc.at("forced").get<bool>(), doc.at("payload").get<std::string>()};
  }
  if (kind == "final_answer") {
    return FinalAnswerEvent{doc.at("answer").get<std::string>(),
                            doc.at("raw_text").get<std::string>()};
  }
  throw ParseError("unknown trace event kind '" + kind + "'");
}

}  // namespace

const char* to_string(TerminatedBy t) {
  switch (t) {
    case TerminatedBy::ModelStop: return "model_stop";
    case TerminatedBy::BudgetForced: return "budget_forced";
    case TerminatedBy::Aborted: return "aborted";
  }
  return "model_stop";
}

json trace_to_json(const ReasoningTrace& trace) {
  json events = json::array();
  for (const auto& event : trace.events) {
    events.push_back(event_to_json(event));
  }
  return json{{"schema_version", kTraceSchemaVersion},
              {"query", trace.query},
              {"degraded_planning", trace.degraded_planning},
              {"aborted", trace.aborted},
              {"abort_reason", trace.abort_reason},
              {"plan",
               json{{"formal", formal_to_json(trace.plan.formal)},
                    {"difficulty", to_string(trace.plan.difficulty)},
                    {"strategy", strategy_to_json(trace.plan.strategy)},
                    {"budget_chunks", trace.plan.budget_chunks},
                    {"initial_prompt", trace.plan.initial_prompt}}},
              {"events", std::move(events)},
              {"outcome",
               json{{"final_answer", trace.outcome.final_answer},
                    {"total_object_tokens", trace.outcome.total_object_tokens},
                    {"total_meta_tokens", trace.outcome.total_meta_tokens},
                    {"chunks_used", trace.outcome.chunks_used},
                    {"terminated_by", to_string(trace.outcome.terminated_by)}}},
              {"final_context", trace.final_context}};
}

ReasoningTrace trace_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("schema_version")) {
    throw ParseError("trace: not a trace document");
  }
  int version = doc.at("schema_version").get<int>();
  if (version != kTraceSchemaVersion) {
    throw ParseError("trace: unsupported schema version " + std::to_string(version) +
                     " (expected " + std::to_string(kTraceSchemaVersion) + ")");
  }
  ReasoningTrace trace;
  trace.query = doc.at("query").get<std::string>();
  trace.degraded_planning = doc.at("degraded_planning").get<bool>();
  trace.aborted = doc.at("aborted").get<bool>();
  trace.abort_reason = doc.at("abort_reason").get<std::string>();
  const auto& plan = doc.at("plan");
  trace.plan.formal = formal_from_json(plan.at("formal"));
  trace.plan.difficulty = difficulty_from_string(plan.at("difficulty").get<std::string>());
  trace.plan.strategy = strategy_from_json(plan.at("strategy"));
  trace.plan.budget_chunks = plan.at("budget_chunks").get<std::size_t>();
  trace.plan.initial_prompt = plan.at("initial_prompt").get<std::string>();
  for (const auto& event_json : doc.at("events")) {
    TraceEvent event;
    event.seq = event_json.at("seq").get<std::size_t>();
    event.object_tokens = event_json.at("object_tokens").get<std::size_t>();
    event.meta_tokens = event_json.at("meta_tokens").get<std::size_t>();
    event.body = event_body_from_json(event_json);
    trace.events.push_back(std::move(event));
  }
  const auto& outcome = doc.at("outcome");
  trace.outcome.final_answer = outcome.at("final_answer").get<std::string>();
  trace.outcome.total_object_tokens = outcome.at("total_object_tokens").get<std::size_t>();
  trace.outcome.total_meta_tokens = outcome.at("total_meta_tokens").get<std::size_t>();
  trace.outcome.chunks_used = outcome.at("chunks_used").get<std::size_t>();
  trace.outcome.terminated_by =
      terminated_by_from_string(outcome.at("terminated_by").get<std::string>());
  trace.final_context = doc.at("final_context").get<std::string>();
  return trace;
}

std::string reconstruct_context(const ReasoningTrace& trace) {
  std::string context = trace.plan.initial_prompt;
  struct Visitor {
    std::string& context;
    void operator()(const ChunkGeneratedEvent& e) { context += e.raw_text; }
    void operator()(const TailTextEvent& e) { context += e.raw_text; }
    void operator()(const AdviceInjectedEvent& e) { context += e.payload; }
    void operator()(const TerminationEvent& e) { context += e.payload; }
    void operator()(const FinalAnswerEvent& e) { context += e.raw_text; }
    void operator()(const FormalizedEvent&) {}
    void operator()(const DifficultyAssessedEvent&) {}
    void operator()(const StrategySelectedEvent&) {}
    void operator()(const TriggerFiredEvent&) {}
    void operator()(const CheckRunEvent&) {}
  };
  for (const auto& event : trace.events) {
    std::visit(Visitor{context}, event.body);
  }
  return context;
}

std::vector<std::string> validate_trace(const json& doc) {
  std::vector<std::string> problems;
  ReasoningTrace trace;
  try {
    trace = trace_from_json(doc);
  } catch (const std::exception& ex) {
    problems.push_back(ex.what());
    return problems;
  }

  std::size_t expected_seq = 0;
  std::size_t expected_chunk = 0;
  std::size_t terminations = 0;
  std::size_t object_total = 0;
  std::size_t meta_total = 0;
  // Per chunk epoch: what has been seen so far.
  bool trigger_open = false;
  bool failed_check_open = false;
  std::size_t epoch_chunk = 0;

  for (const auto& event : trace.events) {
    if (event.seq != expected_seq) {
      problems.push_back("event seq " + std::to_string(event.seq) + " out of order (expected " +
                         std::to_string(expected_seq) + ")");
    }
    ++expected_seq;
    object_total += event.object_tokens;
    meta_total += event.meta_tokens;

    if (const auto* chunk = std::get_if<ChunkGeneratedEvent>(&event.body)) {
      if (chunk->chunk.index != expected_chunk) {
        problems.push_back("chunk index " + std::to_string(chunk->chunk.index) +
                           " not contiguous (expected " + std::to_string(expected_chunk) + ")");
      }
      ++expected_chunk;
      trigger_open = false;
      failed_check_open = false;
      epoch_chunk = chunk->chunk.index;
    } else if (const auto* trigger = std::get_if<TriggerFiredEvent>(&event.body)) {
      if (trigger->chunk_index != epoch_chunk) {
        problems.push_back("trigger_fired outside its chunk epoch");
      }
      trigger_open = true;
    } else if (const auto* check = std::get_if<CheckRunEvent>(&event.body)) {
      if (!trigger_open || check->chunk_index != epoch_chunk) {
        problems.push_back("check_run without a preceding trigger in the same epoch");
      }
      failed_check_open = check->verdict.error_found;
      if (check->verdict.error_found == check->verdict.failed_aspects.empty()) {
        problems.push_back("check_run verdict inconsistent: failed_aspects must be non-empty iff "
                           "error_found");
      }
    } else if (const auto* advice = std::get_if<AdviceInjectedEvent>(&event.body)) {
      if (!failed_check_open || advice->chunk_index != epoch_chunk) {
        problems.push_back("advice_injected without a preceding failed check in the same epoch");
      }
    } else if (std::get_if<TerminationEvent>(&event.body) != nullptr) {
      ++terminations;
    }
  }

  if (terminations > 1) {
    problems.push_back("more than one termination event");
  }
  if (!trace.aborted) {
    if (trace.outcome.terminated_by == TerminatedBy::BudgetForced && terminations != 1) {
      problems.push_back("budget-forced outcome without a termination event");
    }
    if (trace.outcome.terminated_by == TerminatedBy::BudgetForced &&
        expected_chunk != trace.plan.budget_chunks) {
      problems.push_back("budget-forced run used " + std::to_string(expected_chunk) +
                         " chunks, budget is " + std::to_string(trace.plan.budget_chunks));
    }
  }
  if (trace.outcome.chunks_used != expected_chunk) {
    problems.push_back("outcome.chunks_used disagrees with chunk event count");
  }
  if (trace.plan.budget_chunks == 0) {
    problems.push_back("plan.budget_chunks must be >= 1");
  }
  if (trace.outcome.chunks_used > trace.plan.budget_chunks &&
      trace.outcome.terminated_by == TerminatedBy::BudgetForced) {
    problems.push_back("chunks_used exceeds the budget");
  }
  if (trace.outcome.total_object_tokens != object_total) {
    problems.push_back("outcome.total_object_tokens disagrees with event sum");
  }
  if (trace.outcome.total_meta_tokens != meta_total) {
    problems.push_back("outcome.total_meta_tokens disagrees with event sum");
  }
  if (reconstruct_context(trace) != trace.final_context) {
    problems.push_back("final_context is not reconstructible from the event log");
  }
  return problems;
}

std::vector<ReplayEntry> replay_monitor(const json& trace_doc, const MonitorConfig& config) {
  if (!trace_doc.is_object() || !trace_doc.contains("schema_version")) {
    throw ParseError("replay: not a trace document");
  }
  int version = trace_doc.at("schema_version").get<int>();
  if (version != kTraceSchemaVersion) {
    throw ParseError("replay: unsupported schema version " + std::to_string(version));
  }
  std::vector<ReplayEntry> timeline;
  MonitorState state;
  for (const auto& event_json : trace_doc.at("events")) {
    const std::string kind = event_json.at("kind").get<std::string>();
    if (kind == "chunk_generated") {
      const auto& stats_json = event_json.at("chunk").at("stats");
      ChunkStats stats;
      stats.total_tokens = stats_json.at("total_tokens").get<std::size_t>();
      stats.fact_hits = stats_json.at("fact_hits").get<std::size_t>();
      stats.fact_freq = stats_json.at("fact_freq").get<double>();
      stats.think_hits = stats_json.at("think_hits").get<std::size_t>();
      stats.think_freq = stats_json.at("think_freq").get<double>();
      ReplayEntry entry;
      entry.chunk_index = event_json.at("chunk_index").get<std::size_t>();
      entry.fact_freq = stats.fact_freq;
      entry.think_freq = stats.think_freq;
      entry.replay_action = evaluate_trigger(stats, state, config);
      state = advance_monitor(state, entry.replay_action);
      timeline.push_back(entry);
    } else if (kind == "trigger_fired" && !timeline.empty()) {
      timeline.back().live_action =
          trigger_action_from_string(event_json.at("action").get<std::string>());
    }
  }
  return timeline;
}

}  // namespace metaloop
