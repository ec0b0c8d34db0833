#pragma once

#include <memory>
#include <string>

#include "metaloop/backend.hpp"
#include "metaloop/orchestrator.hpp"

#include <nlohmann/json.hpp>

namespace metaloop {

struct BackendConfig {
  std::string kind = "scripted"; // "scripted" | "openai"
  std::string script_path;       // scripted
  std::string base_url;          // openai
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY"; // credentials come only from the environment
  long timeout_ms = 60000;
  int max_retries = 2;
};

/// Fully validated run configuration. Built from a JSON document layered
/// as built-in defaults <- config file <- overrides; every field below is
/// range-checked and every referenced file is stat'ed before any backend
/// is touched.
struct RunConfig {
  BackendConfig object_backend;
  BackendConfig meta_backend;
  std::string lexicon_path; // empty = built-in lexicon
  MonitorConfig monitor;
  StrategyPool pool;
  std::size_t steps_per_chunk = 4;
  SamplingParams object_sampling{0.6, 0.95, 0};
  SamplingParams meta_sampling{0.0, 1.0, 0};
  double l_max = 16384.0;
  AblationToggles ablation;
  std::size_t parallelism = 1;
  std::string formalize_exemplars_path; // empty = built-in exemplars
  std::string difficulty_exemplars_path;
  std::string check_exemplars_path;
  AdviceMarkers markers;
  std::string protocol_preamble; // empty = generated from markers
};

/// The built-in defaults, as an explicit JSON document.
nlohmann::json default_config_doc();

/// Reads a config file and deep-merges it over the defaults. Relative
/// paths inside the file resolve against the file's directory. Unknown
/// keys are rejected with their field path.
nlohmann::json load_config_doc(const std::string& path);

/// Applies one "dotted.key=value" override; the value is parsed as JSON
/// when possible, else taken as a string.
void apply_config_override(nlohmann::json& doc, const std::string& dotted_key,
                           const std::string& value);

/// Validates and materializes a config document. Throws ConfigError listing
/// every violation with its field path.
RunConfig parse_config(const nlohmann::json& doc);

/// Normalized round-trip form: defaults made explicit.
nlohmann::json dump_config(const nlohmann::json& doc);

/// Loads lexicon and exemplar files (or built-ins) into pipeline settings.
RunSettings make_run_settings(const RunConfig& config);

std::unique_ptr<ObjectBackend> make_object_backend(const BackendConfig& config);
std::unique_ptr<MetaBackend> make_meta_backend(const BackendConfig& config);

}  // namespace metaloop
