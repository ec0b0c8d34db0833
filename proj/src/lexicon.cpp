#include "metaloop/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "metaloop/errors.hpp"

namespace metaloop {
namespace {

bool is_token_char(unsigned char c) {
  return std::isalnum(c) != 0 || c == '\'' || c == '-';
}

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

void validate_set(const std::set<std::string>& tokens, const char* name) {
  if (tokens.empty()) {
    throw ConfigError(std::string("lexicon: ") + name + " set is empty");
  }
  for (const auto& token : tokens) {
    if (token.empty()) {
      throw ConfigError(std::string("lexicon: empty keyword in ") + name + " set");
    }
    for (unsigned char c : token) {
      if (std::isspace(c)) {
        throw ConfigError(std::string("lexicon: keyword '") + token + "' in " + name +
                          " set contains whitespace");
      }
      if (std::isupper(c)) {
        throw ConfigError(std::string("lexicon: keyword '") + token + "' in " + name +
                          " set is not lowercase");
      }
    }
  }
}

}  // namespace

TokenLexicon TokenLexicon::defaults() {
  return make({"let", "assume", "suppose", "substituting", "compute", "therefore", "equals"},
              {"wait", "alternatively", "hmm", "actually", "instead", "re-examine", "abandon"});
}

TokenLexicon TokenLexicon::make(std::set<std::string> fact, std::set<std::string> think) {
  validate_set(fact, "fact");
  validate_set(think, "think");
  for (const auto& token : fact) {
    if (think.count(token) != 0) {
      throw ConfigError("lexicon: keyword '" + token + "' appears in both sets");
    }
  }
  TokenLexicon lexicon;
  lexicon.fact_tokens = std::move(fact);
  lexicon.think_tokens = std::move(think);
  return lexicon;
}

TokenLexicon TokenLexicon::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("lexicon: cannot open '" + path + "'");
  }
  std::set<std::string> fact;
  std::set<std::string> think;
  std::set<std::string>* target = &fact;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string word = trim(line);
    if (word.empty()) continue;
    if (word == "[fact]") {
      target = &fact;
      continue;
    }
    if (word == "[think]") {
      target = &think;
      continue;
    }
    target->insert(to_lower(word));
  }
  return make(std::move(fact), std::move(think));
}

bool TokenLexicon::is_fact(std::string_view token) const {
  return fact_tokens.count(to_lower(token)) != 0;
}

bool TokenLexicon::is_think(std::string_view token) const {
  return think_tokens.count(to_lower(token)) != 0;
}

std::string Chunk::text() const {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += steps[i].text;
  }
  return out;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_token_char(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t begin = i;
    while (i < text.size() && is_token_char(static_cast<unsigned char>(text[i]))) ++i;
    if (i == begin) continue;
    std::string_view run = text.substr(begin, i - begin);
    // Trim punctuation-only edges so "-x-" and "'quoted'" count as words.
    std::size_t lo = 0;
    std::size_t hi = run.size();
    while (lo < hi && std::isalnum(static_cast<unsigned char>(run[lo])) == 0) ++lo;
    while (hi > lo && std::isalnum(static_cast<unsigned char>(run[hi - 1])) == 0) --hi;
    if (lo < hi) tokens.push_back(to_lower(run.substr(lo, hi - lo)));
  }
  return tokens;
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

std::vector<Step> segment_steps(std::string_view raw_text) {
  std::vector<Step> steps;
  std::string block;
  std::size_t i = 0;
  auto flush = [&] {
    std::string text = trim(block);
    block.clear();
    if (!text.empty()) {
      std::size_t count = tokenize_words(text).size();
      steps.push_back(Step{std::move(text), count});
    }
  };
  while (i < raw_text.size()) {
    char c = raw_text[i];
    if (c == '\r') {
      ++i;
      continue;
    }
    if (c == '\n') {
      std::size_t run = 0;
      while (i < raw_text.size() && (raw_text[i] == '\n' || raw_text[i] == '\r')) {
        if (raw_text[i] == '\n') ++run;
        ++i;
      }
      if (run >= 2) {
        flush();
      } else {
        block.push_back('\n');
      }
      continue;
    }
    block.push_back(c);
    ++i;
  }
  flush();
  return steps;
}

ChunkStats count_frequencies(const std::vector<std::string>& tokens, const TokenLexicon& lexicon) {
  if (tokens.empty()) {
    throw ParseError("zero-length chunk");
  }
  ChunkStats stats;
  stats.total_tokens = tokens.size();
  for (const auto& token : tokens) {
    if (lexicon.is_fact(token)) ++stats.fact_hits;
    if (lexicon.is_think(token)) ++stats.think_hits;
  }
  stats.fact_freq = static_cast<double>(stats.fact_hits) / static_cast<double>(stats.total_tokens);
  stats.think_freq =
      static_cast<double>(stats.think_hits) / static_cast<double>(stats.total_tokens);
  return stats;
}

Chunk assemble_chunk(const std::vector<Step>& steps, std::size_t index,
                     std::size_t steps_per_chunk, const TokenLexicon& lexicon) {
  if (steps.empty()) {
    throw ParseError("empty chunk");
  }
  if (steps_per_chunk == 0) {
    throw ConfigError("steps_per_chunk must be >= 1");
  }
  Chunk chunk;
  chunk.index = index;
  std::size_t take = std::min(steps_per_chunk, steps.size());
  chunk.steps.assign(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(take));
  std::vector<std::string> tokens;
  for (const auto& step : chunk.steps) {
    auto step_tokens = tokenize_words(step.text);
    tokens.insert(tokens.end(), step_tokens.begin(), step_tokens.end());
  }
  chunk.stats = count_frequencies(tokens, lexicon);
  return chunk;
}

}  // namespace metaloop
