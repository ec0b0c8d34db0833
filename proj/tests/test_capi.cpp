#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "metaloop.h"

using nlohmann::json;

namespace {

std::string data_path(const char* name) {
  return std::string(METALOOP_TEST_DATA_DIR) + "/" + name;
}

struct Config {
  metaloop_config* ptr = nullptr;
  ~Config() { metaloop_config_free(ptr); }
};

struct Engine {
  metaloop_engine* ptr = nullptr;
  ~Engine() { metaloop_engine_free(ptr); }
};

struct Str {
  char* ptr = nullptr;
  ~Str() { metaloop_string_free(ptr); }
  std::string str() const { return ptr == nullptr ? std::string() : std::string(ptr); }
};

}  // namespace

TEST_CASE("version and null-argument handling") {
  CHECK(std::strlen(metaloop_version()) > 0);
  CHECK(metaloop_config_default(nullptr) == METALOOP_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(metaloop_last_error()) > 0);
  CHECK(metaloop_config_load(nullptr, nullptr) == METALOOP_ERR_INVALID_ARGUMENT);
}

TEST_CASE("default config dumps with every field explicit") {
  Config config;
  REQUIRE(metaloop_config_default(&config.ptr) == METALOOP_OK);
  Str dump;
  REQUIRE(metaloop_config_dump(config.ptr, &dump.ptr) == METALOOP_OK);
  json doc = json::parse(dump.str());
  CHECK(doc["monitor"]["tau_fact"] == json(0.08));
  CHECK(doc["budgets"]["hard"] == json(32));
  CHECK(doc["advice_markers"]["open"] == json("[META ADVICE]"));
}

TEST_CASE("loading a missing config reports IO failure") {
  Config config;
  CHECK(metaloop_config_load("/nonexistent/config.json", &config.ptr) == METALOOP_ERR_IO);
  CHECK(std::string(metaloop_last_error()).find("cannot open") != std::string::npos);
}

TEST_CASE("default config fails validation without script files") {
  Config config;
  REQUIRE(metaloop_config_default(&config.ptr) == METALOOP_OK);
  CHECK(metaloop_config_validate(config.ptr) == METALOOP_ERR_CONFIG);
  CHECK(std::string(metaloop_last_error()).find("object_backend.script") != std::string::npos);
}

TEST_CASE("set, validate, solve and replay through the C surface") {
  Config config;
  REQUIRE(metaloop_config_load(data_path("scripted_config.json").c_str(), &config.ptr) ==
          METALOOP_OK);
  REQUIRE(metaloop_config_validate(config.ptr) == METALOOP_OK);
  REQUIRE(metaloop_config_set(config.ptr, "monitor.tau_think", "0.06") == METALOOP_OK);
  CHECK(metaloop_config_set(config.ptr, "", "1") == METALOOP_ERR_CONFIG);

  Engine engine;
  REQUIRE(metaloop_engine_new(config.ptr, &engine.ptr) == METALOOP_OK);

  Str trace;
  REQUIRE(metaloop_solve(engine.ptr, "What is the sum of the integers from 1 to 9?",
                         &trace.ptr) == METALOOP_OK);
  json doc = json::parse(trace.str());
  CHECK(doc["outcome"]["final_answer"] == json("The sum of the integers from 1 to 9 is 45."));
  CHECK(doc["outcome"]["terminated_by"] == json("budget_forced"));

  // Round-trip the trace through a file and replay it.
  std::string trace_path = "capi_trace.json";
  {
    std::ofstream out(trace_path);
    out << trace.str();
  }
  Str timeline;
  REQUIRE(metaloop_replay(trace_path.c_str(), nullptr, &timeline.ptr) == METALOOP_OK);
  json replayed = json::parse(timeline.str());
  CHECK(replayed["matches_recording"] == json(true));
  REQUIRE(replayed["entries"].size() == 4);
  CHECK(replayed["entries"][1]["replay_action"] == json("think"));

  // Raising the thresholds silences the anomaly firing.
  Str quiet;
  REQUIRE(metaloop_replay(trace_path.c_str(),
                          "{\"tau_think\": 0.9, \"tau_fact\": 0.9, \"safety_interval\": 99}",
                          &quiet.ptr) == METALOOP_OK);
  json quiet_doc = json::parse(quiet.str());
  CHECK(quiet_doc["matches_recording"] == json(false));
  for (const auto& entry : quiet_doc["entries"]) {
    CHECK(entry["replay_action"] == json("none"));
  }
}

TEST_CASE("solve rejects an empty query") {
  Config config;
  REQUIRE(metaloop_config_load(data_path("scripted_config.json").c_str(), &config.ptr) ==
          METALOOP_OK);
  Engine engine;
  REQUIRE(metaloop_engine_new(config.ptr, &engine.ptr) == METALOOP_OK);
  Str trace;
  CHECK(metaloop_solve(engine.ptr, "", &trace.ptr) == METALOOP_ERR_INVALID_ARGUMENT);
}

TEST_CASE("eval through the C surface") {
  Config config;
  REQUIRE(metaloop_config_load(data_path("eval_config.json").c_str(), &config.ptr) == METALOOP_OK);
  Engine engine;
  REQUIRE(metaloop_engine_new(config.ptr, &engine.ptr) == METALOOP_OK);
  Str report;
  REQUIRE(metaloop_eval(engine.ptr, data_path("gsm8k_mini.jsonl").c_str(), "gsm8k", "scripted",
                        "capi_traces.jsonl", &report.ptr) == METALOOP_OK);
  json doc = json::parse(report.str());
  CHECK(doc["summary"]["samples"] == json(3));
  CHECK(doc["summary"]["accuracy"].get<double>() == doctest::Approx(100.0 * 2 / 3));
  CHECK(doc["table"].get<std::string>().find("scripted") != std::string::npos);
  CHECK(doc["per_sample"].size() == 3);

  std::ifstream traces("capi_traces.jsonl");
  REQUIRE(traces.good());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(traces, line)) {
    if (!line.empty()) {
      json::parse(line); // every line is a standalone JSON document
      ++lines;
    }
  }
  CHECK(lines == 3);
}

TEST_CASE("eval with a bad format name fails with a config error") {
  Config config;
  REQUIRE(metaloop_config_load(data_path("eval_config.json").c_str(), &config.ptr) == METALOOP_OK);
  Engine engine;
  REQUIRE(metaloop_engine_new(config.ptr, &engine.ptr) == METALOOP_OK);
  Str report;
  CHECK(metaloop_eval(engine.ptr, data_path("gsm8k_mini.jsonl").c_str(), "sudoku", "m", nullptr,
                      &report.ptr) == METALOOP_ERR_CONFIG);
}

TEST_CASE("replay rejects a non-trace file") {
  Str timeline;
  CHECK(metaloop_replay(data_path("gsm8k_mini.jsonl").c_str(), nullptr, &timeline.ptr) ==
        METALOOP_ERR_PARSE);
}

TEST_CASE("difficulty probe through the C surface") {
  Config config;
  REQUIRE(metaloop_config_load(data_path("eval_config.json").c_str(), &config.ptr) == METALOOP_OK);
  REQUIRE(metaloop_config_set(config.ptr, "meta_backend.script",
                              data_path("probe_script.json").c_str()) == METALOOP_OK);
  Engine engine;
  REQUIRE(metaloop_engine_new(config.ptr, &engine.ptr) == METALOOP_OK);
  Str summary;
  REQUIRE(metaloop_probe_difficulty(engine.ptr, data_path("math_mini.jsonl").c_str(),
                                    &summary.ptr) == METALOOP_OK);
  json doc = json::parse(summary.str());
  CHECK(doc["matrix"][0][0] == json(1));
  CHECK(doc["matrix"][1][1] == json(1));
  CHECK(doc["matrix"][2][2] == json(1));
  CHECK(doc["probe_errors"] == json(0));
  CHECK(doc["csv"].get<std::string>().find("gold,") == 0);
}
