#include "metaloop/engine.hpp"

#include <atomic>
#include <thread>

#include "metaloop/errors.hpp"
#include "metaloop/orchestrator.hpp"

namespace metaloop {

struct Engine::Impl {
  RunConfig config;
  RunSettings settings;
  std::unique_ptr<ObjectBackend> object_backend;
  std::unique_ptr<MetaBackend> meta_backend;
};

Engine::Engine(const nlohmann::json& config_doc) : impl_(std::make_unique<Impl>()) {
  impl_->config = parse_config(dump_config(config_doc));
  impl_->settings = make_run_settings(impl_->config);
  impl_->object_backend = make_object_backend(impl_->config.object_backend);
  impl_->meta_backend = make_meta_backend(impl_->config.meta_backend);
}

Engine::~Engine() = default;

const RunConfig& Engine::config() const { return impl_->config; }

ReasoningTrace Engine::solve(const std::string& query) {
  return run_pipeline(query, impl_->settings, *impl_->object_backend, *impl_->meta_backend);
}

Engine::EvalOutput Engine::eval(const std::string& benchmark_path, BenchFormat format,
                                const std::string& method_name) {
  std::vector<std::string> issues;
  std::vector<Sample> samples = load_benchmark(benchmark_path, format, &issues);

  std::vector<SampleResult> results(samples.size());
  std::vector<nlohmann::json> traces(samples.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      std::size_t index = next.fetch_add(1);
      if (index >= samples.size()) break;
      const Sample& sample = samples[index];
      SampleResult result;
      result.id = sample.id;
      try {
        ReasoningTrace trace = solve(sample.question);
        result.aborted = trace.aborted;
        result.predicted = trace.outcome.final_answer;
        result.object_tokens = trace.outcome.total_object_tokens;
        result.meta_tokens = trace.outcome.total_meta_tokens;
        result.chunks_used = trace.outcome.chunks_used;
        result.terminated_by = trace.outcome.terminated_by;
        result.correct =
            !trace.aborted && match_answer(result.predicted, sample.gold_answer, format);
        traces[index] = trace_to_json(trace);
      } catch (const Error& ex) {
        result.aborted = true;
        result.terminated_by = TerminatedBy::Aborted;
        traces[index] = nlohmann::json{{"sample", sample.id}, {"error", ex.what()}};
      }
      results[index] = std::move(result);
    }
  };

  std::size_t threads = std::min(impl_->config.parallelism, samples.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) workers.emplace_back(worker);
    for (auto& thread : workers) thread.join();
  }

  EvalOutput output;
  output.report = summarize(method_name, to_string(format), std::move(results),
                            impl_->config.l_max);
  ReportTables tables = render_report({to_aggregate_row(output.report)});
  output.table = std::move(tables.table);
  output.csv = std::move(tables.csv);
  output.traces = std::move(traces);
  return output;
}

ConfusionSummary Engine::probe_difficulty(const std::string& benchmark_path) {
  std::vector<Sample> samples = load_benchmark(benchmark_path, BenchFormat::Math);
  return difficulty_probe(samples, *impl_->meta_backend, impl_->settings.difficulty_exemplars,
                          impl_->settings.meta_sampling);
}

}  // namespace metaloop
