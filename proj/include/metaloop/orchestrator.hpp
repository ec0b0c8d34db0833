#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "metaloop/backend.hpp"
#include "metaloop/lexicon.hpp"
#include "metaloop/monitor.hpp"
#include "metaloop/planner.hpp"
#include "metaloop/regulator.hpp"
#include "metaloop/trace.hpp"

namespace metaloop {

/// Byte sequence spliced into the stream when the chunk budget runs out.
/// Must stay byte-exact: downstream answer extraction and trace validation
/// both key on it.
inline constexpr std::string_view kTerminatorSequence =
    "\n\nOkay I have finished thinking.\nFinal Answer: \n</think>\n";

/// Stage switches mirroring the planning / regulation / termination split.
struct AblationToggles {
  bool disable_planning = false;    // raw-query prompt, Medium defaults
  bool disable_regulation = false;  // no monitoring, no checks, no advice
  bool disable_termination = false; // no budget enforcement, run to natural stop
};

/// Everything a pipeline needs besides the two backend handles.
struct RunSettings {
  TokenLexicon lexicon = TokenLexicon::defaults();
  MonitorConfig monitor;
  StrategyPool pool = StrategyPool::defaults();
  std::size_t steps_per_chunk = 4;
  SamplingParams object_sampling{0.6, 0.95, 0};
  SamplingParams meta_sampling{0.0, 1.0, 0};
  std::string formalize_exemplars = default_formalize_exemplars();
  std::string difficulty_exemplars = default_difficulty_exemplars();
  std::string check_exemplars = default_check_exemplars();
  AdviceMarkers markers;
  std::string protocol_preamble; // empty = generated from markers
  AblationToggles ablation;
};

/// Answer region of a finished generation: text after the last "</think>"
/// when present, else the last paragraph.
std::string extract_answer_region(std::string_view generated_text);

struct TerminationResult {
  std::string answer;
  std::string streamed_text;
  std::size_t token_count = 0;
  bool session_was_closed = false;
};

/// Splices the terminator into a live session and streams the remaining
/// answer. On an already-closed session, returns the answer extracted from
/// the accumulated context instead.
TerminationResult enforce_termination(GenSession& session);

/// Runs one query end to end: planning, the chunked monitor/control loop,
/// and termination. Planning failures degrade to a raw-query prompt;
/// backend failures mid-run abort the trace with partial events preserved.
ReasoningTrace run_pipeline(const std::string& query, const RunSettings& settings,
                            ObjectBackend& object_backend, MetaBackend& meta_backend);

}  // namespace metaloop
