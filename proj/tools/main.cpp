// Command-line front end for the metaloop shared library. Everything here
// goes through the flat C API in metaloop.h; the C++ core stays private to
// the library.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metaloop.h"

namespace {

struct ConfigHandle {
  metaloop_config* ptr = nullptr;
  ~ConfigHandle() { metaloop_config_free(ptr); }
};

struct EngineHandle {
  metaloop_engine* ptr = nullptr;
  ~EngineHandle() { metaloop_engine_free(ptr); }
};

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { metaloop_string_free(ptr); }
  std::string str() const { return ptr == nullptr ? std::string() : std::string(ptr); }
};

int fail(const std::string& what) {
  std::cerr << "error: " << what << ": " << metaloop_last_error() << "\n";
  return 1;
}

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides; // key=value
  std::vector<std::string> ablations; // s1, s2, s3
  double tau_fact = -1.0;
  double tau_think = -1.0;
  long safety_interval = -1;
  long steps_per_chunk = -1;
  double l_max = -1.0;
  long parallelism = -1;
};

void add_common_options(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--config", options.config_path, "Config file (JSON)");
  cmd->add_option("--set", options.overrides, "Override a config field: dotted.key=value")
      ->take_all();
  cmd->add_option("--ablate", options.ablations, "Disable a stage: s1, s2 or s3")
      ->check(CLI::IsMember({"s1", "s2", "s3"}))
      ->take_all();
  cmd->add_option("--tau-fact", options.tau_fact, "Fact-frequency trigger threshold");
  cmd->add_option("--tau-think", options.tau_think, "Think-frequency trigger threshold");
  cmd->add_option("--safety-interval", options.safety_interval,
                  "Max chunks without a trigger before a full check");
  cmd->add_option("--steps-per-chunk", options.steps_per_chunk, "Steps per monitored chunk");
  cmd->add_option("--l-max", options.l_max, "Token scale for the efficiency metric");
  cmd->add_option("--parallel", options.parallelism, "Parallel pipelines for batch runs");
}

bool build_config(const CommonOptions& options, ConfigHandle& config) {
  metaloop_status status = options.config_path.empty()
                               ? metaloop_config_default(&config.ptr)
                               : metaloop_config_load(options.config_path.c_str(), &config.ptr);
  if (status != METALOOP_OK) {
    fail("loading config");
    return false;
  }
  auto set = [&](const std::string& key, const std::string& value) {
    if (metaloop_config_set(config.ptr, key.c_str(), value.c_str()) != METALOOP_OK) {
      fail("override " + key);
      return false;
    }
    return true;
  };
  for (const auto& entry : options.overrides) {
    auto eq = entry.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects dotted.key=value, got '" << entry << "'\n";
      return false;
    }
    if (!set(entry.substr(0, eq), entry.substr(eq + 1))) return false;
  }
  for (const auto& stage : options.ablations) {
    const char* key = stage == "s1"   ? "ablation.disable_planning"
                      : stage == "s2" ? "ablation.disable_regulation"
                                      : "ablation.disable_termination";
    if (!set(key, "true")) return false;
  }
  auto set_number = [&](const char* key, double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return set(key, buffer);
  };
  if (options.tau_fact >= 0 && !set_number("monitor.tau_fact", options.tau_fact)) return false;
  if (options.tau_think >= 0 && !set_number("monitor.tau_think", options.tau_think)) return false;
  if (options.safety_interval >= 0 &&
      !set("monitor.safety_interval", std::to_string(options.safety_interval))) {
    return false;
  }
  if (options.steps_per_chunk >= 0 &&
      !set("steps_per_chunk", std::to_string(options.steps_per_chunk))) {
    return false;
  }
  if (options.l_max >= 0 && !set_number("l_max", options.l_max)) return false;
  if (options.parallelism >= 0 && !set("parallelism", std::to_string(options.parallelism))) {
    return false;
  }
  return true;
}

bool write_file(const std::string& path, const std::string& content, const char* what) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write " << what << " to '" << path << "'\n";
    return false;
  }
  out << content;
  return true;
}

// Pulls one string field out of a flat JSON rendering without a JSON
// dependency on the CLI side; fields the CLI needs beyond this come back
// pre-extracted from the library.
std::string json_string_field(const std::string& doc, const std::string& key) {
  std::string needle = "\"" + key + "\": \"";
  auto pos = doc.find(needle);
  if (pos == std::string::npos) return "";
  pos += needle.size();
  std::string out;
  while (pos < doc.size() && doc[pos] != '"') {
    if (doc[pos] == '\\' && pos + 1 < doc.size()) {
      char next = doc[pos + 1];
      if (next == 'n') {
        out.push_back('\n');
      } else if (next == 't') {
        out.push_back('\t');
      } else if (next == 'r') {
        out.push_back('\r');
      } else if (next == 'u') {
        out += doc.substr(pos, 6);
        pos += 6;
        continue;
      } else {
        out.push_back(next);
      }
      pos += 2;
      continue;
    }
    out.push_back(doc[pos]);
    ++pos;
  }
  return out;
}

int run_solve(const CommonOptions& common, const std::string& query_arg,
              const std::string& query_file, const std::string& trace_out) {
  std::string query = query_arg;
  if (!query_file.empty()) {
    std::ifstream in(query_file);
    if (!in) {
      std::cerr << "error: cannot open query file '" << query_file << "'\n";
      return 1;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    query = buffer.str();
    while (!query.empty() && (query.back() == '\n' || query.back() == '\r')) query.pop_back();
  }
  if (query.empty()) {
    std::cerr << "error: no query given (positional argument or --query-file)\n";
    return 1;
  }

  ConfigHandle config;
  if (!build_config(common, config)) return 1;
  EngineHandle engine;
  if (metaloop_engine_new(config.ptr, &engine.ptr) != METALOOP_OK) return fail("starting engine");

  OwnedString trace;
  metaloop_status status = metaloop_solve(engine.ptr, query.c_str(), &trace.ptr);
  if (status != METALOOP_OK && status != METALOOP_ERR_RUN_ABORTED) return fail("solve");

  if (!trace_out.empty() && !write_file(trace_out, trace.str(), "trace")) return 1;

  if (status == METALOOP_ERR_RUN_ABORTED) {
    std::cerr << "run aborted: " << metaloop_last_error() << "\n";
    return 2;
  }
  std::cout << json_string_field(trace.str(), "final_answer") << "\n";
  return 0;
}

int run_eval(const CommonOptions& common, const std::string& benchmark,
             const std::string& format, const std::string& method, const std::string& out_dir) {
  ConfigHandle config;
  if (!build_config(common, config)) return 1;
  EngineHandle engine;
  if (metaloop_engine_new(config.ptr, &engine.ptr) != METALOOP_OK) return fail("starting engine");

  std::string traces_path = out_dir + "/traces.jsonl";
  OwnedString report;
  if (metaloop_eval(engine.ptr, benchmark.c_str(), format.c_str(), method.c_str(),
                    traces_path.c_str(), &report.ptr) != METALOOP_OK) {
    return fail("eval");
  }
  std::string doc = report.str();
  std::string table = json_string_field(doc, "table");
  std::string csv = json_string_field(doc, "csv");
  if (!write_file(out_dir + "/report.txt", table, "report table")) return 1;
  if (!write_file(out_dir + "/report.csv", csv, "report csv")) return 1;
  std::cout << table << "\n";
  std::cout << json_string_field(doc, "summary_line") << "\n";
  std::cout << "report.txt, report.csv and traces.jsonl written to " << out_dir << "\n";
  return 0;
}

int run_probe(const CommonOptions& common, const std::string& benchmark,
              const std::string& out_dir) {
  ConfigHandle config;
  if (!build_config(common, config)) return 1;
  EngineHandle engine;
  if (metaloop_engine_new(config.ptr, &engine.ptr) != METALOOP_OK) return fail("starting engine");
  OwnedString summary;
  if (metaloop_probe_difficulty(engine.ptr, benchmark.c_str(), &summary.ptr) != METALOOP_OK) {
    return fail("difficulty probe");
  }
  std::string csv = json_string_field(summary.str(), "csv");
  if (!write_file(out_dir + "/confusion.csv", csv, "confusion matrix")) return 1;
  std::cout << csv;
  std::cout << "confusion.csv written to " << out_dir << "\n";
  return 0;
}

int run_replay(const std::string& trace_path, double tau_fact, double tau_think,
               long safety_interval) {
  std::string overrides = "{";
  bool first = true;
  auto add = [&](const char* key, const std::string& value) {
    if (!first) overrides += ",";
    overrides += "\"" + std::string(key) + "\":" + value;
    first = false;
  };
  if (tau_fact >= 0) add("tau_fact", std::to_string(tau_fact));
  if (tau_think >= 0) add("tau_think", std::to_string(tau_think));
  if (safety_interval >= 0) add("safety_interval", std::to_string(safety_interval));
  overrides += "}";

  OwnedString timeline;
  if (metaloop_replay(trace_path.c_str(), overrides == "{}" ? nullptr : overrides.c_str(),
                      &timeline.ptr) != METALOOP_OK) {
    return fail("replay");
  }
  std::cout << timeline.str() << "\n";
  return 0;
}

int run_validate(const CommonOptions& common, bool print) {
  ConfigHandle config;
  if (!build_config(common, config)) return 1;
  if (metaloop_config_validate(config.ptr) != METALOOP_OK) return fail("config validation");
  if (print) {
    OwnedString dump;
    if (metaloop_config_dump(config.ptr, &dump.ptr) != METALOOP_OK) return fail("config dump");
    std::cout << dump.str() << "\n";
  } else {
    std::cout << "config ok\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metaloop: two-level reasoning orchestration over token-streaming backends"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* solve = app.add_subcommand("solve", "Run one query through the pipeline");
  std::string query;
  std::string query_file;
  std::string trace_out = "trace.json";
  solve->add_option("query", query, "The problem to solve");
  solve->add_option("--query-file", query_file, "Read the query from a file");
  solve->add_option("--trace-out", trace_out, "Where to write the run trace (JSON)");
  add_common_options(solve, common);

  auto* eval = app.add_subcommand("eval", "Evaluate a JSONL benchmark");
  std::string benchmark;
  std::string format;
  std::string method = "metaloop";
  std::string out_dir = ".";
  eval->add_option("benchmark", benchmark, "Benchmark file (JSONL)")->required();
  eval->add_option("--format", format, "Benchmark format")
      ->check(CLI::IsMember({"gsm8k", "math", "aime"}))
      ->required();
  eval->add_option("--method", method, "Method label for the report");
  eval->add_option("--out-dir", out_dir, "Directory for report.txt/report.csv/traces.jsonl");
  add_common_options(eval, common);

  auto* replay = app.add_subcommand("replay", "Re-run the trigger policy over a recorded trace");
  std::string trace_path;
  double replay_tau_fact = -1.0;
  double replay_tau_think = -1.0;
  long replay_safety = -1;
  replay->add_option("trace", trace_path, "Trace file (JSON)")->required();
  replay->add_option("--tau-fact", replay_tau_fact, "Override tau_fact");
  replay->add_option("--tau-think", replay_tau_think, "Override tau_think");
  replay->add_option("--safety-interval", replay_safety, "Override the safety interval");

  auto* probe = app.add_subcommand("probe-difficulty",
                                   "Assess difficulty over a leveled MATH-format benchmark");
  std::string probe_benchmark;
  std::string probe_out_dir = ".";
  probe->add_option("benchmark", probe_benchmark, "Benchmark file (JSONL with levels)")
      ->required();
  probe->add_option("--out-dir", probe_out_dir, "Directory for confusion.csv");
  add_common_options(probe, common);

  auto* validate = app.add_subcommand("validate-config", "Validate a config file");
  bool print_config = false;
  validate->add_flag("--print", print_config, "Print the normalized config");
  add_common_options(validate, common);

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) return run_solve(common, query, query_file, trace_out);
  if (eval->parsed()) return run_eval(common, benchmark, format, method, out_dir);
  if (replay->parsed()) return run_replay(trace_path, replay_tau_fact, replay_tau_think, replay_safety);
  if (probe->parsed()) return run_probe(common, probe_benchmark, probe_out_dir);
  if (validate->parsed()) return run_validate(common, print_config);
  return 1;
}
