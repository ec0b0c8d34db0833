#include "metaloop.h"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "metaloop/config.hpp"
#include "metaloop/engine.hpp"
#include "metaloop/errors.hpp"
#include "metaloop/trace.hpp"

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

void set_last_error(const std::string& message) { g_last_error = message; }

char* copy_string(const std::string& text) {
  char* out = new char[text.size() + 1];
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

metaloop_status status_for(const std::exception& ex) {
  set_last_error(ex.what());
  if (dynamic_cast<const metaloop::ConfigError*>(&ex)) return METALOOP_ERR_CONFIG;
  if (dynamic_cast<const metaloop::ParseError*>(&ex)) return METALOOP_ERR_PARSE;
  if (dynamic_cast<const metaloop::TransportError*>(&ex)) return METALOOP_ERR_BACKEND;
  if (dynamic_cast<const metaloop::IoError*>(&ex)) return METALOOP_ERR_IO;
  if (dynamic_cast<const metaloop::SessionError*>(&ex)) return METALOOP_ERR_BACKEND;
  if (dynamic_cast<const metaloop::Error*>(&ex)) return METALOOP_ERR_INTERNAL;
  return METALOOP_ERR_INTERNAL;
}

template <typename Fn>
metaloop_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& ex) {
    return status_for(ex);
  } catch (...) {
    set_last_error("unknown error");
    return METALOOP_ERR_INTERNAL;
  }
}

metaloop_status invalid_argument(const char* message) {
  set_last_error(message);
  return METALOOP_ERR_INVALID_ARGUMENT;
}

}  // namespace

struct metaloop_config {
  json doc;
};

struct metaloop_engine {
  std::unique_ptr<metaloop::Engine> engine;
};

extern "C" {

const char* metaloop_version(void) { return "0.1.0"; }

const char* metaloop_last_error(void) { return g_last_error.c_str(); }

metaloop_status metaloop_config_default(metaloop_config** out_config) {
  if (out_config == nullptr) return invalid_argument("out_config is null");
  return guarded([&] {
    *out_config = new metaloop_config{metaloop::default_config_doc()};
    return METALOOP_OK;
  });
}

metaloop_status metaloop_config_load(const char* path, metaloop_config** out_config) {
  if (path == nullptr || out_config == nullptr) {
    return invalid_argument("path and out_config must be non-null");
  }
  return guarded([&] {
    *out_config = new metaloop_config{metaloop::load_config_doc(path)};
    return METALOOP_OK;
  });
}

metaloop_status metaloop_config_set(metaloop_config* config, const char* dotted_key,
                                    const char* value) {
  if (config == nullptr || dotted_key == nullptr || value == nullptr) {
    return invalid_argument("config, dotted_key and value must be non-null");
  }
  return guarded([&] {
    metaloop::apply_config_override(config->doc, dotted_key, value);
    return METALOOP_OK;
  });
}

metaloop_status metaloop_config_validate(const metaloop_config* config) {
  if (config == nullptr) return invalid_argument("config is null");
  return guarded([&] {
    metaloop::parse_config(metaloop::dump_config(config->doc));
    return METALOOP_OK;
  });
}

metaloop_status metaloop_config_dump(const metaloop_config* config, char** out_json) {
  if (config == nullptr || out_json == nullptr) {
    return invalid_argument("config and out_json must be non-null");
  }
  return guarded([&] {
    *out_json = copy_string(metaloop::dump_config(config->doc).dump(2));
    return METALOOP_OK;
  });
}

void metaloop_config_free(metaloop_config* config) { delete config; }

metaloop_status metaloop_engine_new(const metaloop_config* config, metaloop_engine** out_engine) {
  if (config == nullptr || out_engine == nullptr) {
    return invalid_argument("config and out_engine must be non-null");
  }
  return guarded([&] {
    auto engine = std::make_unique<metaloop::Engine>(config->doc);
    *out_engine = new metaloop_engine{std::move(engine)};
    return METALOOP_OK;
  });
}

void metaloop_engine_free(metaloop_engine* engine) { delete engine; }

metaloop_status metaloop_solve(metaloop_engine* engine, const char* query,
                               char** out_trace_json) {
  if (engine == nullptr || query == nullptr || out_trace_json == nullptr) {
    return invalid_argument("engine, query and out_trace_json must be non-null");
  }
  if (*query == '\0') return invalid_argument("query is empty");
  return guarded([&]() -> metaloop_status {
    metaloop::ReasoningTrace trace = engine->engine->solve(query);
    *out_trace_json = copy_string(metaloop::trace_to_json(trace).dump(2));
    if (trace.aborted) {
      set_last_error("run aborted: " + trace.abort_reason);
      return METALOOP_ERR_RUN_ABORTED;
    }
    return METALOOP_OK;
  });
}

metaloop_status metaloop_eval(metaloop_engine* engine, const char* benchmark_path,
                              const char* format, const char* method_name,
                              const char* traces_out_path, char** out_report_json) {
  if (engine == nullptr || benchmark_path == nullptr || format == nullptr ||
      out_report_json == nullptr) {
    return invalid_argument("engine, benchmark_path, format and out_report_json must be non-null");
  }
  return guarded([&]() -> metaloop_status {
    metaloop::BenchFormat bench_format = metaloop::bench_format_from_string(format);
    std::string method = method_name != nullptr && *method_name != '\0' ? method_name : "metaloop";
    metaloop::Engine::EvalOutput output =
        engine->engine->eval(benchmark_path, bench_format, method);
    if (traces_out_path != nullptr && *traces_out_path != '\0') {
      std::ofstream out(traces_out_path);
      if (!out) {
        throw metaloop::IoError(std::string("cannot write traces to '") + traces_out_path + "'");
      }
      for (const auto& trace : output.traces) {
        out << trace.dump() << "\n";
      }
    }
    const auto& report = output.report;
    json summary{{"method", report.method},
                 {"dataset", report.dataset},
                 {"samples", report.samples.size()},
                 {"completed", report.completed},
                 {"aborted", report.aborted},
                 {"accuracy", report.accuracy},
                 {"mean_object_tokens", report.mean_object_tokens},
                 {"mean_meta_tokens", report.mean_meta_tokens},
                 {"rse", report.rse_value}};
    char summary_line[256];
    std::snprintf(summary_line, sizeof(summary_line),
                  "%s on %s: Acc %.1f%% | Tokens %.0f (object) + %.0f (meta) | RSE %.1f",
                  report.method.c_str(), report.dataset.c_str(), report.accuracy,
                  report.mean_object_tokens, report.mean_meta_tokens, report.rse_value);
    json per_sample = json::array();
    for (const auto& sample : report.samples) {
      per_sample.push_back(json{{"id", sample.id},
                                {"correct", sample.correct},
                                {"aborted", sample.aborted},
                                {"predicted", sample.predicted},
                                {"object_tokens", sample.object_tokens},
                                {"meta_tokens", sample.meta_tokens},
                                {"chunks_used", sample.chunks_used},
                                {"terminated_by", metaloop::to_string(sample.terminated_by)}});
    }
    json doc{{"summary", std::move(summary)},
             {"summary_line", std::string(summary_line)},
             {"per_sample", std::move(per_sample)},
             {"table", output.table},
             {"csv", output.csv}};
    *out_report_json = copy_string(doc.dump(2));
    return METALOOP_OK;
  });
}

metaloop_status metaloop_probe_difficulty(metaloop_engine* engine, const char* benchmark_path,
                                          char** out_summary_json) {
  if (engine == nullptr || benchmark_path == nullptr || out_summary_json == nullptr) {
    return invalid_argument("engine, benchmark_path and out_summary_json must be non-null");
  }
  return guarded([&]() -> metaloop_status {
    metaloop::ConfusionSummary summary = engine->engine->probe_difficulty(benchmark_path);
    json matrix = json::array();
    for (const auto& row : summary.matrix) {
      matrix.push_back(json{row[0], row[1], row[2]});
    }
    json doc{{"matrix", std::move(matrix)},
             {"csv", summary.csv()},
             {"probe_errors", summary.probe_errors}};
    *out_summary_json = copy_string(doc.dump(2));
    return METALOOP_OK;
  });
}

metaloop_status metaloop_replay(const char* trace_path, const char* monitor_overrides_json,
                                char** out_timeline_json) {
  if (trace_path == nullptr || out_timeline_json == nullptr) {
    return invalid_argument("trace_path and out_timeline_json must be non-null");
  }
  return guarded([&]() -> metaloop_status {
    std::ifstream in(trace_path);
    if (!in) {
      throw metaloop::IoError(std::string("cannot open trace '") + trace_path + "'");
    }
    json trace_doc;
    try {
      in >> trace_doc;
    } catch (const json::exception& ex) {
      throw metaloop::ParseError(std::string("trace is not valid JSON: ") + ex.what());
    }

    metaloop::MonitorConfig monitor;
    if (monitor_overrides_json != nullptr && *monitor_overrides_json != '\0') {
      json overrides;
      try {
        overrides = json::parse(monitor_overrides_json);
      } catch (const json::exception& ex) {
        throw metaloop::ParseError(std::string("monitor overrides are not valid JSON: ") +
                                   ex.what());
      }
      monitor.tau_fact = overrides.value("tau_fact", monitor.tau_fact);
      monitor.tau_think = overrides.value("tau_think", monitor.tau_think);
      monitor.safety_interval = overrides.value("safety_interval", monitor.safety_interval);
    }

    auto timeline = metaloop::replay_monitor(trace_doc, monitor);
    json entries = json::array();
    bool matches = true;
    for (const auto& entry : timeline) {
      entries.push_back(json{{"chunk_index", entry.chunk_index},
                             {"fact_freq", entry.fact_freq},
                             {"think_freq", entry.think_freq},
                             {"replay_action", metaloop::to_string(entry.replay_action)},
                             {"live_action", metaloop::to_string(entry.live_action)}});
      if (entry.replay_action != entry.live_action) matches = false;
    }
    json doc{{"entries", std::move(entries)}, {"matches_recording", matches}};
    *out_timeline_json = copy_string(doc.dump(2));
    return METALOOP_OK;
  });
}

void metaloop_string_free(char* s) { delete[] s; }

}  // extern "C"
