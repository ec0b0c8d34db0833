#include "metaloop/scripted_backend.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metaloop/errors.hpp"
#include "metaloop/lexicon.hpp"

namespace metaloop {
namespace {

using nlohmann::json;

Script parse_script(const json& doc) {
  Script script;
  script.max_steps = doc.value("max_steps", std::size_t{256});
  if (doc.contains("rules")) {
    for (const auto& rule_json : doc.at("rules")) {
      Script::Rule rule;
      rule.match = rule_json.value("match", "");
      if (rule_json.contains("paragraphs")) {
        for (const auto& p : rule_json.at("paragraphs")) {
          rule.paragraphs.push_back(p.get<std::string>());
        }
      }
      rule.stop_after = rule_json.value("stop_after", false);
      rule.cycle = rule_json.value("cycle", false);
      rule.error = rule_json.value("error", "");
      script.rules.push_back(std::move(rule));
    }
  }
  if (doc.contains("meta_rules")) {
    for (const auto& rule_json : doc.at("meta_rules")) {
      Script::MetaRule rule;
      rule.match = rule_json.value("match", "");
      if (rule_json.contains("reply")) {
        rule.replies.push_back(rule_json.at("reply").get<std::string>());
      }
      if (rule_json.contains("replies")) {
        for (const auto& r : rule_json.at("replies")) {
          rule.replies.push_back(r.get<std::string>());
        }
      }
      rule.error = rule_json.value("error", "");
      script.meta_rules.push_back(std::move(rule));
    }
  }
  return script;
}

[[noreturn]] void raise_scripted_error(const std::string& kind, const std::string& what) {
  if (kind == "timeout") {
    throw TimeoutError("scripted " + what + ": timeout");
  }
  throw TransportError("scripted " + what + ": connection lost");
}

class ScriptedSession : public SessionBase {
 public:
  ScriptedSession(std::string prompt, std::shared_ptr<const Script> script)
      : SessionBase(std::move(prompt)),
        script_(std::move(script)),
        consumed_(script_->rules.size(), 0) {}

  StreamResult stream_until(const StopCondition& stop) override {
    StreamResult result;
    if (closed()) {
      result.reason = StopReason::EndOfGeneration;
      return result;
    }
    std::size_t steps_done = 0;
    while (true) {
      if (stop.kind == StopCondition::Kind::Steps && steps_done >= stop.steps) {
        result.reason = StopReason::StepsCompleted;
        return result;
      }
      std::string paragraph;
      if (!next_paragraph(paragraph)) {
        close_generation();
        result.reason = StopReason::EndOfGeneration;
        return result;
      }
      std::string emission;
      // Paragraph separator, unless this is the very first output or the
      // stream head already ends on a newline (e.g. right after the
      // terminator splice).
      if (context() != prompt() && !context().empty() && context().back() != '\n') {
        emission = "\n\n";
      }
      emission += paragraph;
      std::size_t tokens = whitespace_token_count(emission);
      append_text(emission, tokens);
      result.text += emission;
      result.token_count += tokens;
      ++steps_done;
      ++total_steps_;
    }
  }

 private:
  // Picks the next paragraph: first rule (script order) whose match
  // substring occurs in the current context and that can still produce.
  bool next_paragraph(std::string& out) {
    if (total_steps_ >= script_->max_steps) return false;  // simulated max length
    for (std::size_t r = 0; r < script_->rules.size(); ++r) {
      const auto& rule = script_->rules[r];
      if (!rule.match.empty() && context().find(rule.match) == std::string::npos) continue;
      if (!rule.error.empty()) raise_scripted_error(rule.error, "object stream");
      if (rule.paragraphs.empty()) continue;
      if (consumed_[r] < rule.paragraphs.size()) {
        out = rule.paragraphs[consumed_[r]++];
        return true;
      }
      if (rule.cycle) {
        out = rule.paragraphs[consumed_[r] % rule.paragraphs.size()];
        ++consumed_[r];
        return true;
      }
      if (rule.stop_after) return false;  // this rule completes the generation
    }
    return false;
  }

  std::shared_ptr<const Script> script_;
  std::vector<std::size_t> consumed_;
  std::size_t total_steps_ = 0;
};

}  // namespace

Script Script::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("script: invalid JSON: ") + ex.what());
  }
  return parse_script(doc);
}

Script Script::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("script: cannot open '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

ScriptedObjectBackend::ScriptedObjectBackend(Script script)
    : script_(std::make_shared<const Script>(std::move(script))) {}

std::unique_ptr<GenSession> ScriptedObjectBackend::start(const std::string& prompt,
                                                         const SamplingParams&) {
  if (prompt.empty()) {
    throw SessionError("prompt is empty");
  }
  return std::make_unique<ScriptedSession>(prompt, script_);
}

ScriptedMetaBackend::ScriptedMetaBackend(Script script)
    : script_(std::make_shared<const Script>(std::move(script))),
      call_counts_(script_->meta_rules.size(), 0) {}

MetaResult ScriptedMetaBackend::complete(const std::string& prompt, const SamplingParams&) {
  if (prompt.empty()) {
    throw SessionError("prompt is empty");
  }
  std::lock_guard<std::mutex> lock(mutex_);
  seen_prompts_.push_back(prompt);
  for (std::size_t r = 0; r < script_->meta_rules.size(); ++r) {
    const auto& rule = script_->meta_rules[r];
    if (!rule.match.empty() && prompt.find(rule.match) == std::string::npos) continue;
    if (!rule.error.empty()) raise_scripted_error(rule.error, "meta call");
    if (rule.replies.empty()) continue;
    std::size_t pick = std::min(call_counts_[r], rule.replies.size() - 1);
    ++call_counts_[r];
    const std::string& reply = rule.replies[pick];
    return MetaResult{reply, whitespace_token_count(reply)};
  }
  throw Error("scripted meta: no rule matches the prompt");
}

std::vector<std::string> ScriptedMetaBackend::seen_prompts() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return seen_prompts_;
}

}  // namespace metaloop
