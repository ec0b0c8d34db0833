#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace metaloop {

/// Keyword sets used to classify reasoning anomalies. Fact tokens signal
/// derivation-heavy passages, think tokens signal strategy churn. The two
/// sets are disjoint and hold lowercase, whitespace-free words.
struct TokenLexicon {
  std::set<std::string> fact_tokens;
  std::set<std::string> think_tokens;

  /// Built-in keyword sets; overrideable via from_file.
  static TokenLexicon defaults();

  /// Validating constructor. Throws ConfigError on empty, overlapping,
  /// or malformed (uppercase / whitespace) entries.
  static TokenLexicon make(std::set<std::string> fact, std::set<std::string> think);

  /// Loads both sets from a plain-text file: one keyword per line, a line
  /// "[fact]" or "[think]" switches the target section, "#" starts a comment.
  static TokenLexicon from_file(const std::string& path);

  bool is_fact(std::string_view token) const;
  bool is_think(std::string_view token) const;
};

/// One paragraph of model output.
struct Step {
  std::string text;
  std::size_t token_count = 0;
};

/// Word-level counting statistics for one chunk.
struct ChunkStats {
  std::size_t total_tokens = 0;
  std::size_t fact_hits = 0;
  double fact_freq = 0.0;
  std::size_t think_hits = 0;
  double think_freq = 0.0;
};

/// A bounded run of consecutive steps, the monitoring granule.
struct Chunk {
  std::size_t index = 0;
  std::vector<Step> steps;
  ChunkStats stats;

  /// Steps joined with blank lines.
  std::string text() const;
};

/// Splits text into lowercase word tokens. A token is a maximal run of
/// alphanumeric characters, apostrophes and hyphens; leading/trailing
/// punctuation is trimmed. Keyword matching and chunk length share this
/// tokenization so numerator and denominator of the frequency ratio use
/// the same units.
std::vector<std::string> tokenize_words(std::string_view text);

/// Word count used for token accounting of raw backend text (whitespace
/// splitting; distinct from tokenize_words, which strips punctuation).
std::size_t whitespace_token_count(std::string_view text);

/// Splits raw text into steps: maximal blocks separated by blank lines
/// (two or more consecutive newlines). Single newlines do not split.
/// Empty input yields an empty list. Total function.
std::vector<Step> segment_steps(std::string_view raw_text);

/// Computes hit counts and frequencies over a token sequence.
/// Matching is case-insensitive and whole-token. Throws ParseError
/// ("zero-length chunk") on an empty token sequence.
ChunkStats count_frequencies(const std::vector<std::string>& tokens, const TokenLexicon& lexicon);

/// Builds a chunk from the first min(steps_per_chunk, steps.size()) steps.
/// Throws ParseError("empty chunk") when steps is empty and ConfigError
/// when steps_per_chunk is zero.
Chunk assemble_chunk(const std::vector<Step>& steps, std::size_t index, std::size_t steps_per_chunk,
                     const TokenLexicon& lexicon);

}  // namespace metaloop
