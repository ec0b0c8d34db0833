#include "metaloop/regulator.hpp"

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

// Whole-word search in a lowercased line.
bool contains_word(const std::string& lowered, const char* word) {
  std::size_t len = std::string_view(word).size();
  std::size_t pos = 0;
  while ((pos = lowered.find(word, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || std::isalnum(static_cast<unsigned char>(lowered[pos - 1])) == 0;
    std::size_t after = pos + len;
    bool right_ok =
        after >= lowered.size() || std::isalnum(static_cast<unsigned char>(lowered[after])) == 0;
    if (left_ok && right_ok) return true;
    pos += 1;
  }
  return false;
}

struct AspectAlias {
  const char* id;
  std::vector<const char*> words;
};

const std::vector<AspectAlias>& aspect_aliases() {
  static const std::vector<AspectAlias> aliases = {
      {"factual.contradiction", {"contradiction", "contradictions", "contradictory"}},
      {"factual.constraint", {"constraint", "constraints"}},
      {"factual.theorem", {"theorem", "theorems", "precondition", "preconditions"}},
      {"factual.computation",
       {"computation", "computational", "calculation", "arithmetic", "miscalculation"}},
      {"thinking.progress", {"progress"}},
      {"thinking.loop", {"loop", "loops", "repetitive", "circular"}},
      {"thinking.stall", {"stall", "stalled", "stuck"}},
      {"thinking.instability",
       {"instability", "unstable", "switching", "abandoning", "abandonment"}},
  };
  return aliases;
}

bool aspect_belongs(const std::string& id, ErrorType type) {
  bool factual = id.rfind("factual.", 0) == 0;
  switch (type) {
    case ErrorType::Factual: return factual;
    case ErrorType::Thinking: return !factual;
    case ErrorType::Both: return true;
  }
  return false;
}

// Identifies the aspect a verdict line talks about: explicit id first,
// keyword alias second. Returns "" when nothing is recognizable.
std::string identify_aspect(const std::string& lowered, ErrorType type) {
  for (const auto& alias : aspect_aliases()) {
    if (!aspect_belongs(alias.id, type)) continue;
    if (lowered.find(alias.id) != std::string::npos) return alias.id;
  }
  for (const auto& alias : aspect_aliases()) {
    if (!aspect_belongs(alias.id, type)) continue;
    for (const char* word : alias.words) {
      if (contains_word(lowered, word)) return alias.id;
    }
  }
  return "";
}

std::string section_text(const std::string& reply, const char* label) {
  auto lines = split_lines(reply);
  std::string lowered_label = to_lower(label);
  std::string collected;
  bool in_section = false;
  for (const auto& line : lines) {
    std::string lowered = to_lower(line);
    auto start = lowered.find_first_not_of(" \t");
    bool is_label_line =
        start != std::string::npos && lowered.compare(start, lowered_label.size(), lowered_label) == 0;
    if (is_label_line) {
      in_section = true;
      collected = trim(line.substr(start + lowered_label.size()));
      continue;
    }
    if (!in_section) continue;
    // Section runs until the next labeled line or a blank line.
    if (trim(line).empty()) break;
    if (lowered.find("manifestation:") != std::string::npos ||
        lowered.find("suggestion:") != std::string::npos ||
        lowered.find(": pass") != std::string::npos || lowered.find(": fail") != std::string::npos) {
      break;
    }
    if (!collected.empty()) collected += "\n";
    collected += trim(line);
  }
  return collected;
}

std::string collapse_newlines(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == '\n' || c == '\r') {
      if (!out.empty() && out.back() != ' ') out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
  return trim(out);
}

void append_aspect_list(std::string& prompt, const std::array<AspectSpec, 4>& aspects) {
  for (const auto& aspect : aspects) {
    prompt += aspect.id;
    prompt += " — ";
    prompt += aspect.description;
    prompt += "\n";
  }
}

}  // namespace

const char* to_string(ErrorType type) {
  switch (type) {
    case ErrorType::Factual: return "factual";
    case ErrorType::Thinking: return "thinking";
    case ErrorType::Both: return "both";
  }
  return "factual";
}

const std::array<AspectSpec, 4>& factual_aspects() {
  static const std::array<AspectSpec, 4> aspects = {{
      {"factual.contradiction", "internal logical contradictions within the chunk"},
      {"factual.constraint", "violations of the problem constraints"},
      {"factual.theorem", "incorrect theorem application, preconditions not met"},
      {"factual.computation", "computational errors"},
  }};
  return aspects;
}

const std::array<AspectSpec, 4>& thinking_aspects() {
  static const std::array<AspectSpec, 4> aspects = {{
      {"thinking.progress", "lack of progress toward the goal"},
      {"thinking.loop", "reasoning loops: the current line of thought is stagnating or repetitive"},
      {"thinking.stall", "stalled progress: the reasoning is stuck"},
      {"thinking.instability",
       "strategic instability: prematurely abandoning a chain or frequently switching approaches"},
  }};
  return aspects;
}

const std::string& default_check_exemplars() {
  static const std::string exemplars =
      "Example verdict for a chunk that multiplies 6 by 7 and writes 41:\n"
      "factual.contradiction: PASS\n"
      "factual.constraint: PASS\n"
      "factual.theorem: PASS\n"
      "factual.computation: FAIL — 6 × 7 is 42, the chunk wrote 41\n"
      "Manifestation: the product 6 × 7 is carried forward as 41\n"
      "Suggestion: redo the multiplication and propagate 42 through the following steps\n"
      "\n"
      "Example verdict for a clean chunk:\n"
      "PASS all\n";
  return exemplars;
}

std::string build_check_prompt(const Chunk& chunk, ErrorType type, const FormalProblem& formal,
                               const std::string& exemplars) {
  std::string prompt = "You are the supervising half of a two-level reasoning system.\n";
  prompt += "Inspect the reasoning chunk below";
  switch (type) {
    case ErrorType::Factual: prompt += " for factual errors"; break;
    case ErrorType::Thinking: prompt += " for thinking errors"; break;
    case ErrorType::Both: prompt += " for factual and thinking errors"; break;
  }
  prompt += ". Evaluate every aspect listed and reply with one line per aspect, either\n"
            "\"<aspect>: PASS\" or \"<aspect>: FAIL — <what is wrong>\". Reply \"PASS all\" when "
            "everything holds.\n"
            "If any aspect fails, add two further lines:\n"
            "Manifestation: <the specific manifestation of the error>\n"
            "Suggestion: <an actionable correction>\n"
            "\nAspects:\n";
  if (type == ErrorType::Factual || type == ErrorType::Both) {
    append_aspect_list(prompt, factual_aspects());
  }
  if (type == ErrorType::Thinking || type == ErrorType::Both) {
    append_aspect_list(prompt, thinking_aspects());
  }
  prompt += "\n";
  prompt += exemplars;
  prompt += "\nProblem goal: ";
  prompt += formal.goal;
  prompt += "\nConstraints:\n";
  for (const auto& constraint : formal.constraints) {
    prompt += "- " + constraint + "\n";
  }
  prompt += "Chunk:\n";
  prompt += chunk.text();
  prompt += "\n";
  return prompt;
}

CheckVerdict parse_verdict(const std::string& reply, ErrorType type) {
  CheckVerdict verdict;
  bool any_parsed = false;
  for (const auto& line : split_lines(reply)) {
    std::string lowered = to_lower(line);
    bool has_pass = contains_word(lowered, "pass");
    bool has_fail = contains_word(lowered, "fail") || contains_word(lowered, "fails") ||
                    contains_word(lowered, "failed");
    if (!has_pass && !has_fail) continue;
    if (has_pass && !has_fail) {
      // "PASS all", "all PASS" or a per-aspect pass line.
      if (contains_word(lowered, "all") || !identify_aspect(lowered, type).empty()) {
        any_parsed = true;
      }
      continue;
    }
    std::string aspect = identify_aspect(lowered, type);
    if (aspect.empty()) continue;  // a FAIL we cannot attribute is not actionable
    any_parsed = true;
    if (std::find(verdict.failed_aspects.begin(), verdict.failed_aspects.end(), aspect) ==
        verdict.failed_aspects.end()) {
      verdict.failed_aspects.push_back(aspect);
    }
  }
  if (!any_parsed) {
    throw ParseError("check verdict is unparseable");
  }
  verdict.error_found = !verdict.failed_aspects.empty();
  return verdict;
}

CheckOutcome run_check(const Chunk& chunk, ErrorType type, const FormalProblem& formal,
                       MetaBackend& meta, const std::string& exemplars,
                       const SamplingParams& params) {
  if (chunk.steps.empty()) {
    throw Error("run_check: chunk is empty");
  }
  std::string prompt = build_check_prompt(chunk, type, formal, exemplars);
  CheckOutcome outcome;
  for (int attempt = 0; attempt < 2; ++attempt) {
    MetaResult reply = meta.complete(prompt, params);
    outcome.meta_reply = reply.text;
    try {
      outcome.verdict = parse_verdict(reply.text, type);
      return outcome;
    } catch (const ParseError&) {
      if (attempt == 1) {
        // Non-intervention is the fallback: a garbled verdict must not
        // corrupt the reasoning stream.
        outcome.verdict = CheckVerdict{};
        outcome.parse_degraded = true;
        return outcome;
      }
    }
  }
  return outcome;
}

std::optional<MetaAdvice> compose_advice(const CheckVerdict& verdict, ErrorType type,
                                         const std::string& meta_reply) {
  if (!verdict.error_found) {
    return std::nullopt;
  }
  MetaAdvice advice;
  advice.error_type = type;
  advice.manifestation = collapse_newlines(section_text(meta_reply, "manifestation:"));
  if (advice.manifestation.empty()) {
    // Fall back to the first FAIL line's note, then to the aspect list.
    for (const auto& line : split_lines(meta_reply)) {
      std::string lowered = to_lower(line);
      if (!contains_word(lowered, "fail") && !contains_word(lowered, "failed")) continue;
      std::string note = trim(line);
      auto colon = note.find(':');
      if (colon != std::string::npos && colon + 1 < note.size()) {
        note = trim(note.substr(colon + 1));
      }
      advice.manifestation = collapse_newlines(note);
      break;
    }
  }
  if (advice.manifestation.empty()) {
    std::string joined;
    for (const auto& aspect : verdict.failed_aspects) {
      if (!joined.empty()) joined += ", ";
      joined += aspect;
    }
    advice.manifestation = "check failed on: " + joined;
  }
  advice.suggestion = collapse_newlines(section_text(meta_reply, "suggestion:"));
  if (advice.suggestion.empty()) {
    advice.suggestion = "Re-derive the flagged step carefully.";
    advice.suggestion_synthesized = true;
  }
  return advice;
}

std::string render_advice(const MetaAdvice& advice, const AdviceMarkers& markers) {
  std::string out = markers.open;
  out += " ";
  out += collapse_newlines(advice.manifestation);
  out += " Suggestion: ";
  out += collapse_newlines(advice.suggestion);
  out += " ";
  out += markers.close;
  return out;
}

}  // namespace metaloop
