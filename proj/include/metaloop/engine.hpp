#pragma once

#include <memory>
#include <string>
#include <vector>

#include "metaloop/config.hpp"
#include "metaloop/eval.hpp"
#include "metaloop/trace.hpp"

namespace metaloop {

/// Composition root: owns the validated config, the backend handles and
/// the batch runner. One engine may serve many pipelines; each solve()
/// call is an independent pipeline.
class Engine {
 public:
  explicit Engine(const nlohmann::json& config_doc);
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const RunConfig& config() const;

  ReasoningTrace solve(const std::string& query);

  struct EvalOutput {
    RunReport report;
    std::string table;
    std::string csv;
    std::vector<nlohmann::json> traces; // one per sample, benchmark order
  };

  /// Runs every sample of a benchmark through the pipeline, in parallel up
  /// to config().parallelism. Per-sample failures are recorded, not fatal.
  EvalOutput eval(const std::string& benchmark_path, BenchFormat format,
                  const std::string& method_name);

  /// Difficulty assessment sweep over a leveled benchmark.
  ConfusionSummary probe_difficulty(const std::string& benchmark_path);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace metaloop
