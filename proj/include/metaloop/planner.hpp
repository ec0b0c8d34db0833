#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "metaloop/backend.hpp"

namespace metaloop {

/// Structured problem definition produced by the planning stage.
/// Knowns and constraints may be empty; the goal never is.
struct FormalProblem {
  std::vector<std::string> knowns;
  std::string goal;
  std::vector<std::string> constraints;
};

enum class Difficulty { Easy, Medium, Hard };

enum class StrategyKind { ChainOfThought, ChainOfDraft, NoThinking };

struct Strategy {
  StrategyKind kind = StrategyKind::ChainOfThought;
  std::string prompt_template;
};

/// Difficulty -> (strategy, chunk budget) table. Complete by construction:
/// config validation rejects pools with missing levels.
struct StrategyPool {
  std::map<Difficulty, Strategy> strategies;
  std::map<Difficulty, std::size_t> budgets;

  static StrategyPool defaults();
};

struct Plan {
  FormalProblem formal;
  Difficulty difficulty = Difficulty::Medium;
  Strategy strategy;
  std::size_t budget_chunks = 1;
  std::string initial_prompt;
};

const char* to_string(Difficulty level);
const char* to_string(StrategyKind kind);
Difficulty difficulty_from_string(const std::string& text);
StrategyKind strategy_kind_from_string(const std::string& text);

/// Built-in few-shot exemplar blocks, used when no exemplar file is configured.
const std::string& default_formalize_exemplars();
const std::string& default_difficulty_exemplars();

std::string build_formalize_prompt(const std::string& query, const std::string& exemplars);
std::string build_difficulty_prompt(const std::string& query, const std::string& exemplars);

/// Parses a labeled-section reply (Knowns:/Goal:/Constraints:). Throws
/// ParseError when any of the three labels is missing or the goal is empty.
FormalProblem parse_formal_reply(const std::string& reply);

/// Asks the meta level to decompose the query. The reply must carry all
/// three labeled sections; one retry is attempted on a malformed reply,
/// then ParseError("formalization failed") is thrown. Transport errors
/// propagate.
FormalProblem formalize(const std::string& query, MetaBackend& meta,
                        const std::string& exemplars, const SamplingParams& params);

/// Asks the meta level to rate the query. The label match is
/// case-insensitive and ignores surrounding punctuation; an unrecognized
/// reply is retried once and then falls back to Medium.
Difficulty assess_difficulty(const std::string& query, MetaBackend& meta,
                             const std::string& exemplars, const SamplingParams& params);

/// Pure table lookup into the pool.
std::pair<Strategy, std::size_t> select_strategy(Difficulty level, const StrategyPool& pool);

/// Deterministic concatenation: protocol preamble, then the
/// Knowns/Goal/Constraints sections, then the strategy template. Empty
/// lists render their header with no body.
std::string build_initial_prompt(const FormalProblem& formal, const Strategy& strategy,
                                 const std::string& protocol_preamble);

/// Stock preamble explaining the advice protocol to the object model,
/// with the configured bracket markers inlined verbatim.
std::string interaction_protocol_preamble(const std::string& open_marker,
                                          const std::string& close_marker);

}  // namespace metaloop
