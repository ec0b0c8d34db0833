#include "metaloop/orchestrator.hpp"

#include <utility>

#include "metaloop/errors.hpp"

namespace metaloop {
namespace {

// Counts meta-side tokens so each trace event can carry the cost of the
// calls made on its behalf.
class MeteredMeta : public MetaBackend {
 public:
  explicit MeteredMeta(MetaBackend& inner) : inner_(inner) {}

  MetaResult complete(const std::string& prompt, const SamplingParams& params) override {
    MetaResult result = inner_.complete(prompt, params);
    used_ += result.token_count;
    return result;
  }

  std::size_t take() {
    std::size_t used = used_;
    used_ = 0;
    return used;
  }

 private:
  MetaBackend& inner_;
  std::size_t used_ = 0;
};

ErrorType error_type_for(TriggerAction action) {
  switch (action) {
    case TriggerAction::Fact: return ErrorType::Factual;
    case TriggerAction::Think: return ErrorType::Thinking;
    case TriggerAction::All: return ErrorType::Both;
    case TriggerAction::None: break;
  }
  throw Error("no error type for a non-firing action");
}

std::string trim_copy(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string raw_query_prompt(const std::string& preamble, const std::string& query) {
  return preamble + "\n\n" + query + "\n";
}

}  // namespace

std::string extract_answer_region(std::string_view generated_text) {
  static constexpr std::string_view kCloseTag = "</think>";
  auto pos = generated_text.rfind(kCloseTag);
  if (pos != std::string_view::npos) {
    return trim_copy(generated_text.substr(pos + kCloseTag.size()));
  }
  auto steps = segment_steps(generated_text);
  if (!steps.empty()) {
    return steps.back().text;
  }
  return trim_copy(generated_text);
}

TerminationResult enforce_termination(GenSession& session) {
  TerminationResult result;
  if (session.closed()) {
    result.session_was_closed = true;
    return result;
  }
  session.inject(InjectionRequest{std::string(kTerminatorSequence), EventOrigin::Terminator});
  StreamResult stream = session.stream_until(StopCondition::end_of_generation());
  result.streamed_text = stream.text;
  result.token_count = stream.token_count;
  // The terminator ends inside the answer region, so everything streamed
  // after it is the answer.
  result.answer = trim_copy(stream.text);
  return result;
}

ReasoningTrace run_pipeline(const std::string& query, const RunSettings& settings,
                            ObjectBackend& object_backend, MetaBackend& meta_backend) {
  if (query.empty()) {
    throw Error("run: query is empty");
  }

  ReasoningTrace trace;
  trace.query = query;

  const std::string preamble =
      settings.protocol_preamble.empty()
          ? interaction_protocol_preamble(settings.markers.open, settings.markers.close)
          : settings.protocol_preamble;

  std::size_t seq = 0;
  auto push_event = [&](TraceEventBody body, std::size_t object_tokens, std::size_t meta_tokens) {
    trace.events.push_back(TraceEvent{seq++, object_tokens, meta_tokens, std::move(body)});
  };

  MeteredMeta meta(meta_backend);

  // Stage 1: formalize, assess difficulty, pick strategy and budget.
  FormalProblem formal{{}, query, {}};
  Difficulty difficulty = Difficulty::Medium;
  bool have_formal = false;
  if (settings.ablation.disable_planning) {
    trace.degraded_planning = false;
  } else {
    try {
      formal = formalize(query, meta, settings.formalize_exemplars, settings.meta_sampling);
      have_formal = true;
    } catch (const Error&) {
      trace.degraded_planning = true;
      formal = FormalProblem{{}, query, {}};
    }
    push_event(FormalizedEvent{formal}, 0, meta.take());
    try {
      difficulty =
          assess_difficulty(query, meta, settings.difficulty_exemplars, settings.meta_sampling);
    } catch (const Error&) {
      trace.degraded_planning = true;
      difficulty = Difficulty::Medium;
    }
    push_event(DifficultyAssessedEvent{difficulty}, 0, meta.take());
  }

  auto [strategy, budget] = select_strategy(difficulty, settings.pool);
  if (!settings.ablation.disable_planning) {
    push_event(StrategySelectedEvent{strategy, budget}, 0, 0);
  }

  Plan plan;
  plan.formal = formal;
  plan.difficulty = difficulty;
  plan.strategy = strategy;
  plan.budget_chunks = budget;
  plan.initial_prompt = (have_formal && !settings.ablation.disable_planning)
                            ? build_initial_prompt(formal, strategy, preamble)
                            : raw_query_prompt(preamble, query);
  trace.plan = plan;

  auto finish = [&](TerminatedBy terminated_by, const std::string& final_answer,
                    const std::string& final_context) {
    trace.outcome.final_answer = final_answer;
    trace.outcome.terminated_by = terminated_by;
    trace.outcome.chunks_used = 0;
    trace.outcome.total_object_tokens = 0;
    trace.outcome.total_meta_tokens = 0;
    for (const auto& event : trace.events) {
      trace.outcome.total_object_tokens += event.object_tokens;
      trace.outcome.total_meta_tokens += event.meta_tokens;
      if (std::holds_alternative<ChunkGeneratedEvent>(event.body)) ++trace.outcome.chunks_used;
    }
    trace.final_context = final_context;
  };

  auto abort_run = [&](std::unique_ptr<GenSession>& session, const std::string& reason) {
    trace.aborted = true;
    trace.abort_reason = reason;
    std::string context = session ? session->context() : plan.initial_prompt;
    // Keep aborted traces reconstructible: bytes that reached the context
    // without an owning event (e.g. a partial region cut off by a transport
    // failure) are preserved as a tail.
    std::string expected = reconstruct_context(trace);
    if (context.size() > expected.size() && context.compare(0, expected.size(), expected) == 0) {
      push_event(TailTextEvent{context.substr(expected.size())}, 0, 0);
    }
    finish(TerminatedBy::Aborted, "", context);
    return trace;
  };

  std::unique_ptr<GenSession> session;
  try {
    session = object_backend.start(plan.initial_prompt, settings.object_sampling);
  } catch (const Error& ex) {
    return abort_run(session, std::string("failed to start object session: ") + ex.what());
  }

  // Stage 2: chunked generation with monitoring and control.
  MonitorState monitor_state;
  std::size_t chunk_index = 0;
  bool natural_stop = false;

  try {
    while (settings.ablation.disable_termination || chunk_index < plan.budget_chunks) {
      StreamResult region = session->stream_until(StopCondition::after_steps(settings.steps_per_chunk));
      bool final_region = region.reason == StopReason::EndOfGeneration;
      if (!region.text.empty()) {
        auto steps = segment_steps(region.text);
        bool recorded_chunk = false;
        Chunk chunk;
        if (!steps.empty()) {
          try {
            chunk = assemble_chunk(steps, chunk_index, steps.size(), settings.lexicon);
            recorded_chunk = true;
          } catch (const ParseError&) {
            // No countable words in the whole region: the stream has
            // degenerated, stop generating.
            final_region = true;
          }
        }
        if (recorded_chunk) {
          push_event(ChunkGeneratedEvent{chunk, region.text}, region.token_count, 0);
          ++chunk_index;
          if (!settings.ablation.disable_regulation && !final_region) {
            TriggerAction action = evaluate_trigger(chunk.stats, monitor_state, settings.monitor);
            monitor_state = advance_monitor(monitor_state, action);
            if (action != TriggerAction::None) {
              push_event(TriggerFiredEvent{chunk.index, action}, 0, 0);
              ErrorType error_type = error_type_for(action);
              CheckOutcome check = run_check(chunk, error_type, formal, meta,
                                             settings.check_exemplars, settings.meta_sampling);
              push_event(CheckRunEvent{chunk.index, error_type, check.verdict, check.parse_degraded},
                         0, meta.take());
              auto advice = compose_advice(check.verdict, error_type, check.meta_reply);
              if (advice.has_value()) {
                // A single leading newline attaches the advice to the current
                // paragraph without opening a step boundary.
                std::string payload = "\n" + render_advice(*advice, settings.markers);
                session->inject(InjectionRequest{payload, EventOrigin::MetaAdvice});
                push_event(AdviceInjectedEvent{chunk.index, *advice, payload}, 0, 0);
              }
            }
          }
        } else {
          push_event(TailTextEvent{region.text}, region.token_count, 0);
        }
      }
      if (final_region) {
        natural_stop = true;
        break;
      }
    }

    // Stage 3: termination and answer.
    if (natural_stop || session->closed()) {
      std::string generated = session->context().substr(plan.initial_prompt.size());
      std::string answer = extract_answer_region(generated);
      push_event(FinalAnswerEvent{answer, ""}, 0, 0);
      finish(TerminatedBy::ModelStop, answer, session->context());
    } else {
      TerminationResult termination = enforce_termination(*session);
      push_event(TerminationEvent{true, std::string(kTerminatorSequence)}, 0, 0);
      push_event(FinalAnswerEvent{termination.answer, termination.streamed_text},
                 termination.token_count, 0);
      finish(TerminatedBy::BudgetForced, termination.answer, session->context());
    }
  } catch (const Error& ex) {
    return abort_run(session, ex.what());
  }

  return trace;
}

}  // namespace metaloop
