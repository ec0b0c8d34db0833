#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "metaloop/backend.hpp"

namespace metaloop {

/// Deterministic simulator script. JSON layout:
///
///   {
///     "max_steps": 256,
///     "rules": [
///       {"match": "", "paragraphs": ["p1", "p2"], "stop_after": false, "cycle": false},
///       {"match": "", "error": "transport"}
///     ],
///     "meta_rules": [
///       {"match": "Rate the difficulty", "replies": ["Difficulty: Medium"]},
///       {"match": "slow prompt", "error": "timeout"}
///     ]
///   }
///
/// Object rules are checked in order; the first rule whose "match" substring
/// occurs in the current session context and that still has paragraphs to
/// give supplies the next paragraph (an empty "match" matches everything).
/// "cycle" repeats the paragraph list forever; "stop_after" ends generation
/// once the list is exhausted; "error" raises a transport/timeout failure
/// when the rule is selected. Generation also ends after "max_steps" total
/// paragraphs (the simulated max output length) or when no rule applies.
///
/// Meta rules: first match on the request prompt wins; "replies" are handed
/// out per call in sequence (the last entry repeats), which scripts
/// retry-once behaviours.
struct Script {
  struct Rule {
    std::string match;
    std::vector<std::string> paragraphs;
    bool stop_after = false;
    bool cycle = false;
    std::string error; // "", "transport" or "timeout"
  };
  struct MetaRule {
    std::string match;
    std::vector<std::string> replies;
    std::string error;
  };

  std::vector<Rule> rules;
  std::vector<MetaRule> meta_rules;
  std::size_t max_steps = 256;

  static Script from_file(const std::string& path);
  static Script from_json_text(const std::string& text);
};

class ScriptedObjectBackend : public ObjectBackend {
 public:
  explicit ScriptedObjectBackend(Script script);
  std::unique_ptr<GenSession> start(const std::string& prompt,
                                    const SamplingParams& params) override;

 private:
  std::shared_ptr<const Script> script_;
};

class ScriptedMetaBackend : public MetaBackend {
 public:
  explicit ScriptedMetaBackend(Script script);
  MetaResult complete(const std::string& prompt, const SamplingParams& params) override;

  /// Prompts seen so far, for assertions in tests.
  std::vector<std::string> seen_prompts() const;

 private:
  std::shared_ptr<const Script> script_;
  mutable std::mutex mutex_;
  std::vector<std::size_t> call_counts_;
  std::vector<std::string> seen_prompts_;
};

}  // namespace metaloop
