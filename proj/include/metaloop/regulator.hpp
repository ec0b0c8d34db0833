#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "metaloop/backend.hpp"
#include "metaloop/lexicon.hpp"
#include "metaloop/planner.hpp"

namespace metaloop {

enum class ErrorType { Factual, Thinking, Both };

const char* to_string(ErrorType type);

struct AspectSpec {
  std::string id;          // e.g. "factual.computation"
  std::string description; // what the meta level is asked to inspect
};

/// The four factual aspects: internal contradictions, constraint
/// violations, theorem misapplication, computational errors.
const std::array<AspectSpec, 4>& factual_aspects();

/// The four thinking conditions: lack of progress, reasoning loops,
/// stalled progress, strategic instability.
const std::array<AspectSpec, 4>& thinking_aspects();

struct CheckVerdict {
  bool error_found = false;
  std::vector<std::string> failed_aspects; // non-empty iff error_found
};

/// Verdict plus the raw reply it was parsed from (the same reply carries
/// the manifestation/suggestion sections for advice composition).
struct CheckOutcome {
  CheckVerdict verdict;
  std::string meta_reply;
  bool parse_degraded = false; // reply stayed unparseable after the retry
};

struct MetaAdvice {
  ErrorType error_type = ErrorType::Factual;
  std::string manifestation;
  std::string suggestion;
  bool suggestion_synthesized = false; // fallback text used, reply had no Suggestion section
};

struct AdviceMarkers {
  std::string open = "[META ADVICE]";
  std::string close = "[/META ADVICE]";
};

const std::string& default_check_exemplars();

/// Check prompt enumerating exactly the aspects for the error type
/// (all eight for Both) and demanding a per-aspect PASS/FAIL verdict.
std::string build_check_prompt(const Chunk& chunk, ErrorType type, const FormalProblem& formal,
                               const std::string& exemplars);

/// Parses a per-aspect verdict. Aspects are recognized by id or by
/// keyword alias; "PASS all" clears everything. Throws ParseError when no
/// verdict line is recognizable.
CheckVerdict parse_verdict(const std::string& reply, ErrorType type);

/// Runs the targeted checklist on a flagged chunk. A malformed reply is
/// retried once; if it stays unparseable the verdict is clean
/// (non-intervention) and parse_degraded is set. Transport errors propagate.
CheckOutcome run_check(const Chunk& chunk, ErrorType type, const FormalProblem& formal,
                       MetaBackend& meta, const std::string& exemplars,
                       const SamplingParams& params);

/// Builds advice from a confirmed verdict, or nothing when no error was
/// found. Manifestation and suggestion are lifted from the reply's labeled
/// sections; a missing suggestion is synthesized and flagged.
std::optional<MetaAdvice> compose_advice(const CheckVerdict& verdict, ErrorType type,
                                         const std::string& meta_reply);

/// Single bracketed block, internal newlines collapsed to spaces so the
/// rendered advice can never introduce a step boundary.
std::string render_advice(const MetaAdvice& advice, const AdviceMarkers& markers);

}  // namespace metaloop
