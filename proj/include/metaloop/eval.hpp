#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "metaloop/backend.hpp"
#include "metaloop/planner.hpp"
#include "metaloop/trace.hpp"

namespace metaloop {

enum class BenchFormat { Gsm8k, Math, Aime };

BenchFormat bench_format_from_string(const std::string& name);
const char* to_string(BenchFormat format);

struct Sample {
  std::string id;
  std::string question;
  std::string gold_answer;              // canonical form
  std::optional<int> source_level;      // MATH level 1..5 when present
};

/// Loads a JSONL benchmark. Malformed records are reported per line in
/// `issues` and skipped; the load aborts (ParseError) only when no record
/// is valid. Field layouts per format:
///   gsm8k: {"question", "answer"} with the gold after the final "####"
///   math:  {"problem", "answer" or "solution" with a boxed gold, "level"?}
///   aime:  {"problem"|"question", "answer" integer in [0,999], "id"?}
std::vector<Sample> load_benchmark(const std::string& path, BenchFormat format,
                                   std::vector<std::string>* issues = nullptr);

/// Canonicalizes an extracted answer: unwraps \boxed{...}, rewrites simple
/// \frac forms to a/b, strips math markup and surrounding punctuation.
std::string normalize_answer(const std::string& text);

/// Tolerant comparison: extracts the final boxed expression or trailing
/// number from the prediction, canonicalizes both sides, compares
/// numerically when both parse as rationals, else by exact string. Empty
/// predictions never match.
bool match_answer(const std::string& predicted, const std::string& gold, BenchFormat format);

/// Efficiency score: accuracy discounted by square-root-scaled token cost,
///   rse = accuracy / sqrt(1 + mean_tokens / l_max).
/// Throws ConfigError when l_max <= 0.
double rse(double accuracy, double mean_tokens, double l_max);

struct SampleResult {
  std::string id;
  bool correct = false;
  bool aborted = false;
  std::string predicted;
  std::size_t object_tokens = 0;
  std::size_t meta_tokens = 0;
  std::size_t chunks_used = 0;
  TerminatedBy terminated_by = TerminatedBy::ModelStop;
};

/// Per-(method, dataset) evaluation record. Accuracy counts aborted
/// samples as incorrect; token means cover completed runs only.
struct RunReport {
  std::string method;
  std::string dataset;
  std::vector<SampleResult> samples;
  std::size_t completed = 0;
  std::size_t aborted = 0;
  double accuracy = 0.0;           // percent
  double mean_object_tokens = 0.0; // completed runs only
  double mean_meta_tokens = 0.0;
  double rse_value = 0.0;
};

RunReport summarize(const std::string& method, const std::string& dataset,
                    std::vector<SampleResult> samples, double l_max);

/// One Acc/Tokens/RSE triple of a comparison table.
struct AggregateRow {
  std::string method;
  std::string dataset;
  double acc = 0.0;
  double tokens = 0.0;
  double rse_value = 0.0;
};

struct ReportTables {
  std::string table; // aligned plain text
  std::string csv;
};

/// Renders the comparison table: one row per method, one Acc/Tokens/RSE
/// column group per dataset (first-seen order) plus an Avg. group holding
/// the arithmetic mean of the per-dataset values.
ReportTables render_report(const std::vector<AggregateRow>& rows);

AggregateRow to_aggregate_row(const RunReport& report);

/// MATH level tiering: levels 1-2 are Easy, level 3 Medium, levels 4-5 Hard.
Difficulty tier_from_level(int level);

struct ConfusionSummary {
  // matrix[gold][predicted], indexed by Difficulty order Easy/Medium/Hard
  std::array<std::array<std::size_t, 3>, 3> matrix{};
  std::size_t probe_errors = 0; // samples whose meta call failed
  std::string csv() const;
};

/// Runs the difficulty assessor over leveled samples and tallies predicted
/// vs tiered gold difficulty. Samples without a source level are skipped.
ConfusionSummary difficulty_probe(const std::vector<Sample>& samples, MetaBackend& meta,
                                  const std::string& exemplars, const SamplingParams& params);

}  // namespace metaloop
