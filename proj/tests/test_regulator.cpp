#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "metaloop/errors.hpp"
#include "metaloop/regulator.hpp"
#include "metaloop/scripted_backend.hpp"

using namespace metaloop;

namespace {

Chunk sample_chunk() {
  auto lexicon = TokenLexicon::defaults();
  auto steps = segment_steps("The product of 3 and 4 is stated as 14.\n\nCarrying 14 forward.");
  return assemble_chunk(steps, 0, 4, lexicon);
}

FormalProblem sample_formal() {
  FormalProblem formal;
  formal.knowns = {"a equals 3", "b equals 4"};
  formal.goal = "compute a times b";
  formal.constraints = {"stay in the integers"};
  return formal;
}

ScriptedMetaBackend meta_replying(const std::string& reply) {
  nlohmann::json doc{{"meta_rules", {{{"match", ""}, {"reply", reply}}}}};
  return ScriptedMetaBackend(Script::from_json_text(doc.dump()));
}

}  // namespace

TEST_CASE("the checklists name exactly four aspects each") {
  CHECK(factual_aspects().size() == 4);
  CHECK(thinking_aspects().size() == 4);
  CHECK(factual_aspects()[0].id == "factual.contradiction");
  CHECK(factual_aspects()[1].id == "factual.constraint");
  CHECK(factual_aspects()[2].id == "factual.theorem");
  CHECK(factual_aspects()[3].id == "factual.computation");
  CHECK(thinking_aspects()[0].id == "thinking.progress");
  CHECK(thinking_aspects()[1].id == "thinking.loop");
  CHECK(thinking_aspects()[2].id == "thinking.stall");
  CHECK(thinking_aspects()[3].id == "thinking.instability");
}

TEST_CASE("the factual prompt enumerates the four factual aspects only") {
  std::string prompt =
      build_check_prompt(sample_chunk(), ErrorType::Factual, sample_formal(), "EXEMPLARS");
  for (const auto& aspect : factual_aspects()) {
    CHECK(prompt.find(aspect.id) != std::string::npos);
  }
  for (const auto& aspect : thinking_aspects()) {
    CHECK(prompt.find(aspect.id) == std::string::npos);
  }
  CHECK(prompt.find("compute a times b") != std::string::npos);
  CHECK(prompt.find("stay in the integers") != std::string::npos);
  CHECK(prompt.find("stated as 14") != std::string::npos);
}

TEST_CASE("the combined prompt enumerates all eight aspects") {
  std::string prompt =
      build_check_prompt(sample_chunk(), ErrorType::Both, sample_formal(), "EXEMPLARS");
  for (const auto& aspect : factual_aspects()) {
    CHECK(prompt.find(aspect.id) != std::string::npos);
  }
  for (const auto& aspect : thinking_aspects()) {
    CHECK(prompt.find(aspect.id) != std::string::npos);
  }
}

TEST_CASE("a loose FAIL line maps onto the computation aspect") {
  auto meta = meta_replying("FAIL: computational error — 3×4 stated as 14");
  auto outcome = run_check(sample_chunk(), ErrorType::Factual, sample_formal(), meta,
                           default_check_exemplars(), {});
  CHECK(outcome.verdict.error_found);
  REQUIRE(outcome.verdict.failed_aspects.size() == 1);
  CHECK(outcome.verdict.failed_aspects[0] == "factual.computation");
  CHECK_FALSE(outcome.parse_degraded);
}

TEST_CASE("PASS all yields a clean verdict") {
  auto meta = meta_replying("PASS all");
  auto outcome = run_check(sample_chunk(), ErrorType::Factual, sample_formal(), meta,
                           default_check_exemplars(), {});
  CHECK_FALSE(outcome.verdict.error_found);
  CHECK(outcome.verdict.failed_aspects.empty());
}

TEST_CASE("a rigid per-aspect verdict parses aspect by aspect") {
  auto meta = meta_replying(
      "factual.contradiction: PASS\n"
      "factual.constraint: FAIL — leaves the integers\n"
      "factual.theorem: PASS\n"
      "factual.computation: FAIL — 3*4 is 12\n"
      "Manifestation: the product is wrong and drifts out of range\n"
      "Suggestion: recompute 3*4 and continue with 12");
  auto outcome = run_check(sample_chunk(), ErrorType::Factual, sample_formal(), meta,
                           default_check_exemplars(), {});
  REQUIRE(outcome.verdict.failed_aspects.size() == 2);
  CHECK(outcome.verdict.failed_aspects[0] == "factual.constraint");
  CHECK(outcome.verdict.failed_aspects[1] == "factual.computation");
}

TEST_CASE("aspects outside the checked type are ignored") {
  CheckVerdict verdict = parse_verdict("thinking.loop: FAIL — loops\nfactual.computation: PASS",
                                       ErrorType::Factual);
  CHECK_FALSE(verdict.error_found);
}

TEST_CASE("an unparseable verdict degrades to non-intervention after a retry") {
  auto meta = meta_replying("the chunk seems broadly fine to me, carry on");
  auto outcome = run_check(sample_chunk(), ErrorType::Thinking, sample_formal(), meta,
                           default_check_exemplars(), {});
  CHECK_FALSE(outcome.verdict.error_found);
  CHECK(outcome.parse_degraded);
  CHECK(meta.seen_prompts().size() == 2);
}

TEST_CASE("no advice without a confirmed error") {
  CheckVerdict clean;
  CHECK_FALSE(compose_advice(clean, ErrorType::Factual, "PASS all").has_value());
}

TEST_CASE("advice rendering is a single bracketed block") {
  CheckVerdict verdict;
  verdict.error_found = true;
  verdict.failed_aspects = {"factual.computation"};
  auto advice = compose_advice(verdict, ErrorType::Factual,
                               "factual.computation: FAIL — 3×4 stated as 14\n"
                               "Manifestation: the product 3×4 is carried as 14\n"
                               "Suggestion: recompute the product and continue with 12");
  REQUIRE(advice.has_value());
  CHECK(advice->manifestation == "the product 3×4 is carried as 14");
  CHECK(advice->suggestion == "recompute the product and continue with 12");
  CHECK_FALSE(advice->suggestion_synthesized);
  std::string rendered = render_advice(*advice, AdviceMarkers{});
  CHECK(rendered ==
        "[META ADVICE] the product 3×4 is carried as 14 Suggestion: recompute the product and "
        "continue with 12 [/META ADVICE]");
}

TEST_CASE("rendered advice never contains a blank line") {
  CheckVerdict verdict;
  verdict.error_found = true;
  verdict.failed_aspects = {"thinking.loop"};
  auto advice = compose_advice(verdict, ErrorType::Thinking,
                               "thinking.loop: FAIL — loops\n"
                               "Manifestation: the chain\n\nkeeps\nrestarting\n"
                               "Suggestion: pick one\n\npath and finish it");
  REQUIRE(advice.has_value());
  std::string rendered = render_advice(*advice, AdviceMarkers{});
  CHECK(rendered.find('\n') == std::string::npos);
}

TEST_CASE("a missing suggestion is synthesized and flagged") {
  CheckVerdict verdict;
  verdict.error_found = true;
  verdict.failed_aspects = {"factual.computation"};
  auto advice = compose_advice(verdict, ErrorType::Factual,
                               "factual.computation: FAIL — 3×4 stated as 14");
  REQUIRE(advice.has_value());
  CHECK(advice->suggestion == "Re-derive the flagged step carefully.");
  CHECK(advice->suggestion_synthesized);
  CHECK_FALSE(advice->manifestation.empty());
}

TEST_CASE("custom markers are honored") {
  MetaAdvice advice;
  advice.error_type = ErrorType::Both;
  advice.manifestation = "m";
  advice.suggestion = "s";
  CHECK(render_advice(advice, AdviceMarkers{"<A>", "</A>"}) == "<A> m Suggestion: s </A>");
}

TEST_CASE("run_check rejects an empty chunk") {
  auto meta = meta_replying("PASS all");
  Chunk empty;
  CHECK_THROWS_AS(
      run_check(empty, ErrorType::Factual, sample_formal(), meta, default_check_exemplars(), {}),
      Error);
}
