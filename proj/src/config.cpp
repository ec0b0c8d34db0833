#include "metaloop/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "metaloop/errors.hpp"
#include "metaloop/http_backend.hpp"
#include "metaloop/scripted_backend.hpp"

namespace metaloop {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json default_backend_doc() {
  return json{{"kind", "scripted"}, {"script", ""},           {"base_url", ""},
              {"model", ""},        {"api_key_env", "OPENAI_API_KEY"},
              {"timeout_ms", 60000}, {"max_retries", 2}};
}

void merge_into(json& base, const json& overlay, const std::string& path,
                std::vector<std::string>& unknown) {
  for (const auto& item : overlay.items()) {
    std::string key_path = path.empty() ? item.key() : path + "." + item.key();
    if (!base.contains(item.key())) {
      unknown.push_back(key_path);
      continue;
    }
    if (base[item.key()].is_object() && item.value().is_object()) {
      merge_into(base[item.key()], item.value(), key_path, unknown);
    } else {
      base[item.key()] = item.value();
    }
  }
}

void resolve_path_field(json& doc, const std::string& pointer, const fs::path& base_dir) {
  json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) return;
  std::string value = doc.at(ptr).get<std::string>();
  if (value.empty()) return;
  fs::path p(value);
  if (p.is_relative()) {
    doc[ptr] = (base_dir / p).lexically_normal().string();
  }
}

class Checker {
 public:
  explicit Checker(const json& doc) : doc_(doc) {}

  const std::vector<std::string>& problems() const { return problems_; }

  void note(const std::string& field, const std::string& message) {
    problems_.push_back(field + ": " + message);
  }

  template <typename T>
  T get(const std::string& pointer, const T& fallback) {
    try {
      return doc_.at(json::json_pointer(pointer)).get<T>();
    } catch (const json::exception& ex) {
      note(pointer, std::string("unreadable value (") + ex.what() + ")");
      return fallback;
    }
  }

  void require_file(const std::string& field, const std::string& path) {
    if (path.empty()) return;
    if (!fs::exists(path)) {
      note(field, "file does not exist: '" + path + "'");
    }
  }

 private:
  const json& doc_;
  std::vector<std::string> problems_;
};

BackendConfig parse_backend(Checker& checker, const std::string& prefix) {
  BackendConfig backend;
  backend.kind = checker.get<std::string>(prefix + "/kind", "scripted");
  backend.script_path = checker.get<std::string>(prefix + "/script", "");
  backend.base_url = checker.get<std::string>(prefix + "/base_url", "");
  backend.model = checker.get<std::string>(prefix + "/model", "");
  backend.api_key_env = checker.get<std::string>(prefix + "/api_key_env", "OPENAI_API_KEY");
  backend.timeout_ms = checker.get<long>(prefix + "/timeout_ms", 60000);
  backend.max_retries = checker.get<int>(prefix + "/max_retries", 2);

  std::string field = prefix;
  field.erase(0, 1); // drop leading '/'
  for (auto& c : field) {
    if (c == '/') c = '.';
  }
  if (backend.kind == "scripted") {
    if (backend.script_path.empty()) {
      checker.note(field + ".script", "scripted backend needs a script file");
    } else {
      checker.require_file(field + ".script", backend.script_path);
    }
  } else if (backend.kind == "openai") {
    if (backend.base_url.empty()) checker.note(field + ".base_url", "must not be empty");
    if (backend.model.empty()) checker.note(field + ".model", "must not be empty");
  } else {
    checker.note(field + ".kind", "unknown backend kind '" + backend.kind +
                                      "' (expected scripted or openai)");
  }
  if (backend.timeout_ms <= 0) checker.note(field + ".timeout_ms", "must be > 0");
  if (backend.max_retries < 0) checker.note(field + ".max_retries", "must be >= 0");
  return backend;
}

SamplingParams parse_sampling(Checker& checker, const std::string& prefix) {
  SamplingParams params;
  params.temperature = checker.get<double>(prefix + "/temperature", 0.6);
  params.top_p = checker.get<double>(prefix + "/top_p", 0.95);
  params.max_tokens = checker.get<long>(prefix + "/max_tokens", 0);

  std::string field = prefix.substr(1);
  for (auto& c : field) {
    if (c == '/') c = '.';
  }
  if (params.temperature < 0.0) checker.note(field + ".temperature", "must be >= 0");
  if (params.top_p <= 0.0 || params.top_p > 1.0) checker.note(field + ".top_p", "must be in (0, 1]");
  if (params.max_tokens < 0) checker.note(field + ".max_tokens", "must be >= 0");
  return params;
}

std::string read_text_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) {
    throw IoError(std::string(what) + ": cannot open '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

json default_config_doc() {
  StrategyPool pool = StrategyPool::defaults();
  return json{
      {"object_backend", default_backend_doc()},
      {"meta_backend", default_backend_doc()},
      {"lexicon_path", ""},
      {"monitor", json{{"tau_fact", 0.08}, {"tau_think", 0.06}, {"safety_interval", 3}}},
      {"steps_per_chunk", 4},
      {"strategy_pool",
       json{{"easy", "no_thinking"},
            {"medium", "chain_of_draft"},
            {"hard", "chain_of_thought"},
            {"templates",
             json{{"chain_of_thought", pool.strategies[Difficulty::Hard].prompt_template},
                  {"chain_of_draft", pool.strategies[Difficulty::Medium].prompt_template},
                  {"no_thinking", pool.strategies[Difficulty::Easy].prompt_template}}}}},
      {"budgets", json{{"easy", 8}, {"medium", 16}, {"hard", 32}}},
      {"sampling",
       json{{"object", json{{"temperature", 0.6}, {"top_p", 0.95}, {"max_tokens", 0}}},
            {"meta", json{{"temperature", 0.0}, {"top_p", 1.0}, {"max_tokens", 0}}}}},
      {"l_max", 16384.0},
      {"ablation",
       json{{"disable_planning", false},
            {"disable_regulation", false},
            {"disable_termination", false}}},
      {"parallelism", 1},
      {"few_shot", json{{"formalize", ""}, {"difficulty", ""}, {"check", ""}}},
      {"advice_markers", json{{"open", "[META ADVICE]"}, {"close", "[/META ADVICE]"}}},
      {"protocol_preamble", ""},
  };
}

json load_config_doc(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("config: cannot open '" + path + "'");
  }
  json overlay;
  try {
    in >> overlay;
  } catch (const json::exception& ex) {
    throw ParseError("config '" + path + "': invalid JSON: " + ex.what());
  }
  if (!overlay.is_object()) {
    throw ParseError("config '" + path + "': top level must be an object");
  }
  json doc = default_config_doc();
  std::vector<std::string> unknown;
  merge_into(doc, overlay, "", unknown);
  if (!unknown.empty()) {
    std::string joined;
    for (const auto& key : unknown) {
      if (!joined.empty()) joined += ", ";
      joined += key;
    }
    throw ConfigError("config '" + path + "': unknown keys: " + joined);
  }
  fs::path base_dir = fs::absolute(fs::path(path)).parent_path();
  for (const char* pointer :
       {"/object_backend/script", "/meta_backend/script", "/lexicon_path", "/few_shot/formalize",
        "/few_shot/difficulty", "/few_shot/check"}) {
    resolve_path_field(doc, pointer, base_dir);
  }
  return doc;
}

void apply_config_override(json& doc, const std::string& dotted_key, const std::string& value) {
  if (dotted_key.empty()) {
    throw ConfigError("override: empty key");
  }
  std::string pointer = "/";
  for (char c : dotted_key) {
    pointer += (c == '.') ? '/' : c;
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value; // plain string
  }
  try {
    doc[json::json_pointer(pointer)] = parsed;
  } catch (const json::exception& ex) {
    throw ConfigError("override '" + dotted_key + "': " + ex.what());
  }
}

RunConfig parse_config(const json& doc) {
  Checker checker(doc);
  RunConfig config;

  config.object_backend = parse_backend(checker, "/object_backend");
  config.meta_backend = parse_backend(checker, "/meta_backend");
  config.lexicon_path = checker.get<std::string>("/lexicon_path", "");
  checker.require_file("lexicon_path", config.lexicon_path);

  config.monitor.tau_fact = checker.get<double>("/monitor/tau_fact", 0.08);
  config.monitor.tau_think = checker.get<double>("/monitor/tau_think", 0.06);
  config.monitor.safety_interval = checker.get<std::size_t>("/monitor/safety_interval", 3);
  if (config.monitor.tau_fact <= 0.0 || config.monitor.tau_fact >= 1.0) {
    checker.note("monitor.tau_fact", "must be in (0, 1)");
  }
  if (config.monitor.tau_think <= 0.0 || config.monitor.tau_think >= 1.0) {
    checker.note("monitor.tau_think", "must be in (0, 1)");
  }
  if (config.monitor.safety_interval < 1) {
    checker.note("monitor.safety_interval", "must be >= 1");
  }

  config.steps_per_chunk = checker.get<std::size_t>("/steps_per_chunk", 4);
  if (config.steps_per_chunk < 1) checker.note("steps_per_chunk", "must be >= 1");

  const struct {
    Difficulty level;
    const char* name;
  } kLevels[] = {{Difficulty::Easy, "easy"},
                 {Difficulty::Medium, "medium"},
                 {Difficulty::Hard, "hard"}};
  for (const auto& entry : kLevels) {
    std::string kind_name =
        checker.get<std::string>(std::string("/strategy_pool/") + entry.name, "");
    StrategyKind kind = StrategyKind::ChainOfThought;
    bool kind_ok = true;
    try {
      kind = strategy_kind_from_string(kind_name);
    } catch (const ParseError& ex) {
      checker.note(std::string("strategy_pool.") + entry.name, ex.what());
      kind_ok = false;
    }
    std::string template_text = checker.get<std::string>(
        std::string("/strategy_pool/templates/") + (kind_ok ? to_string(kind) : "chain_of_thought"),
        "");
    if (kind_ok && template_text.empty()) {
      checker.note(std::string("strategy_pool.templates.") + to_string(kind),
                   "template must not be empty");
    }
    config.pool.strategies[entry.level] = Strategy{kind, template_text};
    std::size_t budget =
        checker.get<std::size_t>(std::string("/budgets/") + entry.name, 1);
    if (budget < 1) checker.note(std::string("budgets.") + entry.name, "must be >= 1");
    config.pool.budgets[entry.level] = budget;
  }

  config.object_sampling = parse_sampling(checker, "/sampling/object");
  config.meta_sampling = parse_sampling(checker, "/sampling/meta");

  config.l_max = checker.get<double>("/l_max", 16384.0);
  if (config.l_max <= 0.0) checker.note("l_max", "must be > 0");

  config.ablation.disable_planning = checker.get<bool>("/ablation/disable_planning", false);
  config.ablation.disable_regulation = checker.get<bool>("/ablation/disable_regulation", false);
  config.ablation.disable_termination = checker.get<bool>("/ablation/disable_termination", false);

  config.parallelism = checker.get<std::size_t>("/parallelism", 1);
  if (config.parallelism < 1) checker.note("parallelism", "must be >= 1");

  config.formalize_exemplars_path = checker.get<std::string>("/few_shot/formalize", "");
  config.difficulty_exemplars_path = checker.get<std::string>("/few_shot/difficulty", "");
  config.check_exemplars_path = checker.get<std::string>("/few_shot/check", "");
  checker.require_file("few_shot.formalize", config.formalize_exemplars_path);
  checker.require_file("few_shot.difficulty", config.difficulty_exemplars_path);
  checker.require_file("few_shot.check", config.check_exemplars_path);

  config.markers.open = checker.get<std::string>("/advice_markers/open", "[META ADVICE]");
  config.markers.close = checker.get<std::string>("/advice_markers/close", "[/META ADVICE]");
  if (config.markers.open.empty()) checker.note("advice_markers.open", "must not be empty");
  if (config.markers.close.empty()) checker.note("advice_markers.close", "must not be empty");
  if (config.markers.open == config.markers.close) {
    checker.note("advice_markers", "open and close markers must differ");
  }
  for (const auto& [field, marker] :
       {std::pair<const char*, const std::string&>{"advice_markers.open", config.markers.open},
        std::pair<const char*, const std::string&>{"advice_markers.close", config.markers.close}}) {
    if (marker.find('\n') != std::string::npos) {
      checker.note(field, "marker must not contain newlines");
    }
  }

  config.protocol_preamble = checker.get<std::string>("/protocol_preamble", "");

  if (!checker.problems().empty()) {
    std::string joined = "invalid config:";
    for (const auto& problem : checker.problems()) {
      joined += "\n  - " + problem;
    }
    throw ConfigError(joined);
  }
  return config;
}

json dump_config(const json& doc) {
  json merged = default_config_doc();
  std::vector<std::string> unknown;
  merge_into(merged, doc, "", unknown);
  if (!unknown.empty()) {
    throw ConfigError("config has unknown key '" + unknown.front() + "'");
  }
  return merged;
}

RunSettings make_run_settings(const RunConfig& config) {
  RunSettings settings;
  settings.lexicon = config.lexicon_path.empty() ? TokenLexicon::defaults()
                                                 : TokenLexicon::from_file(config.lexicon_path);
  settings.monitor = config.monitor;
  settings.pool = config.pool;
  settings.steps_per_chunk = config.steps_per_chunk;
  settings.object_sampling = config.object_sampling;
  settings.meta_sampling = config.meta_sampling;
  settings.formalize_exemplars = config.formalize_exemplars_path.empty()
                                     ? default_formalize_exemplars()
                                     : read_text_file(config.formalize_exemplars_path, "few_shot");
  settings.difficulty_exemplars =
      config.difficulty_exemplars_path.empty()
          ? default_difficulty_exemplars()
          : read_text_file(config.difficulty_exemplars_path, "few_shot");
  settings.check_exemplars = config.check_exemplars_path.empty()
                                 ? default_check_exemplars()
                                 : read_text_file(config.check_exemplars_path, "few_shot");
  settings.markers = config.markers;
  settings.protocol_preamble = config.protocol_preamble;
  settings.ablation = config.ablation;
  return settings;
}

namespace {

HttpBackendOptions http_options(const BackendConfig& config) {
  HttpBackendOptions options;
  options.base_url = config.base_url;
  options.model = config.model;
  options.timeout_ms = config.timeout_ms;
  options.max_retries = config.max_retries;
  if (!config.api_key_env.empty()) {
    if (const char* key = std::getenv(config.api_key_env.c_str())) {
      options.api_key = key;
    }
  }
  return options;
}

}  // namespace

std::unique_ptr<ObjectBackend> make_object_backend(const BackendConfig& config) {
  if (config.kind == "scripted") {
    return std::make_unique<ScriptedObjectBackend>(Script::from_file(config.script_path));
  }
  return std::make_unique<HttpObjectBackend>(http_options(config));
}

std::unique_ptr<MetaBackend> make_meta_backend(const BackendConfig& config) {
  if (config.kind == "scripted") {
    return std::make_unique<ScriptedMetaBackend>(Script::from_file(config.script_path));
  }
  return std::make_unique<HttpMetaBackend>(http_options(config));
}

}  // namespace metaloop
