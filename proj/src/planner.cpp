#include "metaloop/planner.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "metaloop/errors.hpp"

namespace metaloop {
namespace {

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Label at line start, case-insensitive: returns the rest of the line.
bool match_label(const std::string& line, const char* label, std::string* rest) {
  std::string lowered = to_lower(line);
  std::string want = to_lower(label);
  auto pos = lowered.find_first_not_of(" \t");
  if (pos == std::string::npos) return false;
  if (lowered.compare(pos, want.size(), want) != 0) return false;
  if (rest) *rest = trim(line.substr(pos + want.size()));
  return true;
}

std::string strip_list_marker(const std::string& line) {
  std::string t = trim(line);
  if (!t.empty() && (t.front() == '-' || t.front() == '*')) {
    t = trim(t.substr(1));
  }
  return t;
}

constexpr const char* kFormalizeInstruction =
    "You are the planning half of a two-level reasoning system.\n"
    "Decompose the problem into its formal structure. Reply in exactly this labeled format:\n"
    "Knowns:\n"
    "- <one known per line>\n"
    "Goal: <the target outcome>\n"
    "Constraints:\n"
    "- <one constraint per line; leave the section body empty when there are none>\n";

constexpr const char* kDifficultyInstruction =
    "You are the planning half of a two-level reasoning system.\n"
    "Rate the difficulty of the problem. Reply with exactly one line:\n"
    "Difficulty: <Easy|Medium|Hard>\n";

}  // namespace

const char* to_string(Difficulty level) {
  switch (level) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  return "medium";
}

const char* to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::ChainOfThought: return "chain_of_thought";
    case StrategyKind::ChainOfDraft: return "chain_of_draft";
    case StrategyKind::NoThinking: return "no_thinking";
  }
  return "chain_of_thought";
}

Difficulty difficulty_from_string(const std::string& text) {
  std::string lowered = to_lower(trim(text));
  if (lowered == "easy") return Difficulty::Easy;
  if (lowered == "medium") return Difficulty::Medium;
  if (lowered == "hard") return Difficulty::Hard;
  throw ParseError("unknown difficulty '" + text + "'");
}

StrategyKind strategy_kind_from_string(const std::string& text) {
  std::string lowered = to_lower(trim(text));
  if (lowered == "chain_of_thought") return StrategyKind::ChainOfThought;
  if (lowered == "chain_of_draft") return StrategyKind::ChainOfDraft;
  if (lowered == "no_thinking") return StrategyKind::NoThinking;
  throw ParseError("unknown strategy kind '" + text + "'");
}

StrategyPool StrategyPool::defaults() {
  StrategyPool pool;
  pool.strategies[Difficulty::Easy] =
      Strategy{StrategyKind::NoThinking,
               "Answer directly. Do not deliberate; state the result with a one-line "
               "justification."};
  pool.strategies[Difficulty::Medium] =
      Strategy{StrategyKind::ChainOfDraft,
               "Work in terse drafts: one short note per step, a few words each, then give the "
               "final answer."};
  pool.strategies[Difficulty::Hard] =
      Strategy{StrategyKind::ChainOfThought,
               "Reason step by step in full sentences, checking each derivation before moving "
               "on, then give the final answer."};
  pool.budgets[Difficulty::Easy] = 8;
  pool.budgets[Difficulty::Medium] = 16;
  pool.budgets[Difficulty::Hard] = 32;
  return pool;
}

// One exemplar block serves both planning calls; each worked example shows
// the decomposition and the difficulty rating side by side.
const std::string& default_planner_exemplars() {
  static const std::string exemplars =
      "Problem: A rectangle is 3 units wide and 5 units long. What is its area?\n"
      "Knowns:\n"
      "- the rectangle is 3 units wide\n"
      "- the rectangle is 5 units long\n"
      "Goal: find the area of the rectangle\n"
      "Constraints:\n"
      "- dimensions are positive\n"
      "Difficulty: Easy\n"
      "\n"
      "Problem: A train leaves at 40 km/h and another at 60 km/h in the opposite direction; "
      "when are they 250 km apart?\n"
      "Knowns:\n"
      "- one train travels at 40 km/h\n"
      "- the other travels at 60 km/h in the opposite direction\n"
      "Goal: find when the trains are 250 km apart\n"
      "Constraints:\n"
      "- both trains depart at the same time\n"
      "Difficulty: Medium\n"
      "\n"
      "Problem: Prove that there are infinitely many primes p with p = 3 mod 4.\n"
      "Knowns:\n"
      "- p ranges over the primes\n"
      "Goal: prove there are infinitely many primes congruent to 3 mod 4\n"
      "Constraints:\n"
      "- the argument must be a proof, not a heuristic\n"
      "Difficulty: Hard\n";
  return exemplars;
}

const std::string& default_formalize_exemplars() { return default_planner_exemplars(); }

const std::string& default_difficulty_exemplars() { return default_planner_exemplars(); }

std::string build_formalize_prompt(const std::string& query, const std::string& exemplars) {
  std::string prompt = kFormalizeInstruction;
  prompt += "\n";
  prompt += exemplars;
  prompt += "\nProblem: ";
  prompt += query;
  prompt += "\n";
  return prompt;
}

std::string build_difficulty_prompt(const std::string& query, const std::string& exemplars) {
  std::string prompt = kDifficultyInstruction;
  prompt += "\n";
  prompt += exemplars;
  prompt += "\nProblem: ";
  prompt += query;
  prompt += "\n";
  return prompt;
}

FormalProblem parse_formal_reply(const std::string& reply) {
  enum class Section { None, Knowns, Goal, Constraints };
  FormalProblem formal;
  bool saw_knowns = false;
  bool saw_goal = false;
  bool saw_constraints = false;
  Section section = Section::None;

  for (const auto& line : split_lines(reply)) {
    std::string rest;
    if (match_label(line, "knowns:", &rest)) {
      saw_knowns = true;
      section = Section::Knowns;
      if (!rest.empty()) formal.knowns.push_back(strip_list_marker(rest));
      continue;
    }
    if (match_label(line, "goal:", &rest)) {
      saw_goal = true;
      section = Section::Goal;
      if (!rest.empty()) formal.goal = rest;
      continue;
    }
    if (match_label(line, "constraints:", &rest)) {
      saw_constraints = true;
      section = Section::Constraints;
      if (!rest.empty()) formal.constraints.push_back(strip_list_marker(rest));
      continue;
    }
    std::string item = strip_list_marker(line);
    if (item.empty()) continue;
    switch (section) {
      case Section::Knowns: formal.knowns.push_back(item); break;
      case Section::Constraints: formal.constraints.push_back(item); break;
      case Section::Goal:
        if (formal.goal.empty()) formal.goal = item;
        break;
      case Section::None: break;
    }
  }

  if (!saw_knowns || !saw_goal || !saw_constraints) {
    throw ParseError("formal reply is missing a labeled section");
  }
  if (formal.goal.empty()) {
    throw ParseError("formal reply has an empty goal");
  }
  return formal;
}

FormalProblem formalize(const std::string& query, MetaBackend& meta,
                        const std::string& exemplars, const SamplingParams& params) {
  if (query.empty()) {
    throw Error("formalize: query is empty");
  }
  if (exemplars.empty()) {
    throw ConfigError("formalize: exemplar set is empty");
  }
  std::string prompt = build_formalize_prompt(query, exemplars);
  for (int attempt = 0; attempt < 2; ++attempt) {
    MetaResult reply = meta.complete(prompt, params);
    try {
      return parse_formal_reply(reply.text);
    } catch (const ParseError&) {
      if (attempt == 1) throw ParseError("formalization failed");
    }
  }
  throw ParseError("formalization failed");
}

Difficulty assess_difficulty(const std::string& query, MetaBackend& meta,
                             const std::string& exemplars, const SamplingParams& params) {
  if (query.empty()) {
    throw Error("assess_difficulty: query is empty");
  }
  std::string prompt = build_difficulty_prompt(query, exemplars);
  for (int attempt = 0; attempt < 2; ++attempt) {
    MetaResult reply = meta.complete(prompt, params);
    // Accept "Difficulty: X" anywhere, or a bare label; punctuation and
    // case are ignored.
    std::string candidate;
    for (const auto& line : split_lines(reply.text)) {
      std::string rest;
      if (match_label(line, "difficulty:", &rest)) {
        candidate = rest;
        break;
      }
    }
    if (candidate.empty()) candidate = reply.text;
    std::string lowered;
    for (unsigned char c : candidate) {
      if (std::isalpha(c)) lowered.push_back(static_cast<char>(std::tolower(c)));
    }
    if (lowered == "easy") return Difficulty::Easy;
    if (lowered == "medium") return Difficulty::Medium;
    if (lowered == "hard" || lowered == "difficult") return Difficulty::Hard;
  }
  return Difficulty::Medium;  // safe middle after the retry
}

std::pair<Strategy, std::size_t> select_strategy(Difficulty level, const StrategyPool& pool) {
  auto strategy_it = pool.strategies.find(level);
  auto budget_it = pool.budgets.find(level);
  if (strategy_it == pool.strategies.end() || budget_it == pool.budgets.end()) {
    throw ConfigError(std::string("strategy pool has no entry for difficulty '") +
                      to_string(level) + "'");
  }
  return {strategy_it->second, budget_it->second};
}

std::string build_initial_prompt(const FormalProblem& formal, const Strategy& strategy,
                                 const std::string& protocol_preamble) {
  std::string prompt = protocol_preamble;
  prompt += "\n\n";
  prompt += "Knowns:\n";
  for (const auto& known : formal.knowns) {
    prompt += "- " + known + "\n";
  }
  prompt += "Goal: " + formal.goal + "\n";
  prompt += "Constraints:\n";
  for (const auto& constraint : formal.constraints) {
    prompt += "- " + constraint + "\n";
  }
  prompt += "\n";
  prompt += strategy.prompt_template;
  prompt += "\n";
  return prompt;
}

std::string interaction_protocol_preamble(const std::string& open_marker,
                                          const std::string& close_marker) {
  std::string preamble = "INTERACTION PROTOCOL: while you reason, a supervising process may "
                         "splice a message of the form \"";
  preamble += open_marker;
  preamble += " ... ";
  preamble += close_marker;
  preamble += "\" directly into your output. Such a message is trusted guidance about an error "
              "in your reasoning so far. When one appears, take the suggestion into account and "
              "continue from the corrected state.";
  return preamble;
}

}  // namespace metaloop
