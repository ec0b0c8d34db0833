#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <thread>

#include "metaloop/errors.hpp"
#include "metaloop/scripted_backend.hpp"

using namespace metaloop;

namespace {

Script two_paragraph_script() {
  return Script::from_json_text(R"({
    "rules": [
      {"match": "", "paragraphs": ["first paragraph here", "second paragraph here"],
       "stop_after": true}
    ]
  })");
}

std::string concat_events(const GenSession& session) {
  std::string out;
  for (const auto& event : session.events()) {
    out += event.content;
  }
  return out;
}

}  // namespace

TEST_CASE("start opens a session whose context is the prompt") {
  ScriptedObjectBackend backend(two_paragraph_script());
  auto session = backend.start("P", {});
  CHECK(session->context() == "P");
  CHECK_FALSE(session->closed());
  CHECK(session->events().empty());
}

TEST_CASE("start rejects an empty prompt") {
  ScriptedObjectBackend backend(two_paragraph_script());
  CHECK_THROWS_AS(backend.start("", {}), SessionError);
}

TEST_CASE("sessions carry distinct ids and track their byte length") {
  ScriptedObjectBackend backend(two_paragraph_script());
  auto a = backend.start("P\n", {});
  auto b = backend.start("P\n", {});
  CHECK_FALSE(a->id().empty());
  CHECK(a->id() != b->id());
  CHECK(a->byte_length() == 2);
  a->stream_until(StopCondition::after_steps(1));
  CHECK(a->byte_length() == a->context().size());
}

TEST_CASE("two sessions from one backend are independent") {
  ScriptedObjectBackend backend(two_paragraph_script());
  auto a = backend.start("prompt a\n", {});
  auto b = backend.start("prompt b\n", {});
  a->stream_until(StopCondition::after_steps(1));
  CHECK(b->context() == "prompt b\n");
  auto rb = b->stream_until(StopCondition::after_steps(1));
  CHECK(rb.text == "first paragraph here");
}

TEST_CASE("stream stops after the requested number of steps") {
  ScriptedObjectBackend backend(two_paragraph_script());
  auto session = backend.start("prompt\n", {});
  auto result = session->stream_until(StopCondition::after_steps(1));
  CHECK(result.reason == StopReason::StepsCompleted);
  CHECK(result.text == "first paragraph here");
  CHECK(session->context() == "prompt\nfirst paragraph here");

  auto second = session->stream_until(StopCondition::after_steps(1));
  CHECK(second.text == "\n\nsecond paragraph here");
}

TEST_CASE("stream reports end of generation before the step target") {
  ScriptedObjectBackend backend(two_paragraph_script());
  auto session = backend.start("prompt\n", {});
  auto result = session->stream_until(StopCondition::after_steps(5));
  CHECK(result.reason == StopReason::EndOfGeneration);
  CHECK(session->closed());
  CHECK(result.text == "first paragraph here\n\nsecond paragraph here");
}

TEST_CASE("a zero-step stop returns immediately") {
  ScriptedObjectBackend backend(two_paragraph_script());
  auto session = backend.start("prompt\n", {});
  auto result = session->stream_until(StopCondition::after_steps(0));
  CHECK(result.text.empty());
  CHECK(result.reason == StopReason::StepsCompleted);
  CHECK(session->events().empty());
}

TEST_CASE("injection splices bytes onto the stream head") {
  ScriptedObjectBackend backend(two_paragraph_script());
  auto session = backend.start("A", {});
  session->inject(InjectionRequest{"B", EventOrigin::MetaAdvice});
  CHECK(session->context() == "AB");
  REQUIRE(session->events().size() == 1);
  CHECK(session->events()[0].kind == EventKind::Injected);
  CHECK(session->events()[0].origin == EventOrigin::MetaAdvice);
  CHECK(session->events()[0].content == "B");
}

TEST_CASE("continuation conditions on the spliced context") {
  // The post-injection rule only matches once the injected bytes are part
  // of the context the backend consults.
  auto script = Script::from_json_text(R"({
    "rules": [
      {"match": "redirect now", "paragraphs": ["took the redirect"]},
      {"match": "", "paragraphs": ["default one", "default two"]}
    ]
  })");
  ScriptedObjectBackend backend(script);
  auto session = backend.start("prompt\n", {});
  session->stream_until(StopCondition::after_steps(1));
  session->inject(InjectionRequest{"\n[note] redirect now [/note]", EventOrigin::MetaAdvice});
  auto result = session->stream_until(StopCondition::after_steps(1));
  CHECK(result.text == "\n\ntook the redirect");
}

TEST_CASE("injected advice block round-trips byte-exact through the event log") {
  ScriptedObjectBackend backend(two_paragraph_script());
  auto session = backend.start("prompt\n", {});
  std::string block = "[META ADVICE] the tally is off Suggestion: recount [/META ADVICE]";
  session->inject(InjectionRequest{block, EventOrigin::MetaAdvice});
  std::string injected;
  for (const auto& event : session->events()) {
    if (event.kind == EventKind::Injected) injected += event.content;
  }
  CHECK(injected == block);
}

TEST_CASE("injecting into a finished session fails") {
  ScriptedObjectBackend backend(two_paragraph_script());
  auto session = backend.start("prompt\n", {});
  session->stream_until(StopCondition::end_of_generation());
  CHECK(session->closed());
  CHECK_THROWS_WITH_AS(session->inject(InjectionRequest{"late", EventOrigin::MetaAdvice}),
                       "session terminated", SessionError);
}

TEST_CASE("splice invariant: context equals prompt plus event contents") {
  auto script = Script::from_json_text(R"({
    "max_steps": 40,
    "rules": [
      {"match": "", "paragraphs": ["alpha beta", "gamma delta", "epsilon"], "cycle": true}
    ]
  })");
  ScriptedObjectBackend backend(script);
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> choice(0, 2);
  for (int round = 0; round < 30; ++round) {
    auto session = backend.start("prompt\n", {});
    for (int op = 0; op < 12 && !session->closed(); ++op) {
      switch (choice(rng)) {
        case 0: session->stream_until(StopCondition::after_steps(1)); break;
        case 1: session->stream_until(StopCondition::after_steps(2)); break;
        case 2: session->inject(InjectionRequest{"<spliced>", EventOrigin::MetaAdvice}); break;
      }
    }
    REQUIRE(session->context() == "prompt\n" + concat_events(*session));
  }
}

TEST_CASE("scripted streams are byte-identical across runs") {
  auto script = Script::from_json_text(R"({
    "rules": [
      {"match": "", "paragraphs": ["one", "two", "three"], "stop_after": true}
    ]
  })");
  ScriptedObjectBackend backend(script);
  auto run = [&] {
    auto session = backend.start("prompt\n", {});
    session->stream_until(StopCondition::end_of_generation());
    return session->context();
  };
  CHECK(run() == run());
}

TEST_CASE("generation ends at the scripted maximum length") {
  auto script = Script::from_json_text(R"({
    "max_steps": 5,
    "rules": [{"match": "", "paragraphs": ["loop"], "cycle": true}]
  })");
  ScriptedObjectBackend backend(script);
  auto session = backend.start("prompt\n", {});
  auto result = session->stream_until(StopCondition::end_of_generation());
  CHECK(result.reason == StopReason::EndOfGeneration);
  CHECK(result.text == "loop\n\nloop\n\nloop\n\nloop\n\nloop");
}

TEST_CASE("a scripted transport failure surfaces as a typed error") {
  auto script = Script::from_json_text(R"({
    "rules": [
      {"match": "", "paragraphs": ["fine so far"]},
      {"match": "", "error": "transport"}
    ]
  })");
  ScriptedObjectBackend backend(script);
  auto session = backend.start("prompt\n", {});
  session->stream_until(StopCondition::after_steps(1));
  CHECK_THROWS_AS(session->stream_until(StopCondition::after_steps(1)), TransportError);
}

TEST_CASE("scripted meta returns canned replies") {
  auto script = Script::from_json_text(R"({
    "meta_rules": [
      {"match": "alpha", "reply": "reply for alpha"},
      {"match": "", "reply": "fallback"}
    ]
  })");
  ScriptedMetaBackend meta(script);
  CHECK(meta.complete("question about alpha", {}).text == "reply for alpha");
  CHECK(meta.complete("anything else", {}).text == "fallback");
}

TEST_CASE("scripted meta reply sequences advance per call") {
  auto script = Script::from_json_text(R"({
    "meta_rules": [
      {"match": "", "replies": ["first", "second"]}
    ]
  })");
  ScriptedMetaBackend meta(script);
  CHECK(meta.complete("q", {}).text == "first");
  CHECK(meta.complete("q", {}).text == "second");
  CHECK(meta.complete("q", {}).text == "second");
}

TEST_CASE("scripted meta timeout fixture") {
  auto script = Script::from_json_text(R"({
    "meta_rules": [{"match": "", "error": "timeout"}]
  })");
  ScriptedMetaBackend meta(script);
  CHECK_THROWS_AS(meta.complete("q", {}), TimeoutError);
}

TEST_CASE("concurrent meta calls see no cross-talk") {
  auto script = Script::from_json_text(R"({
    "meta_rules": [
      {"match": "pipeline one", "reply": "answer one"},
      {"match": "pipeline two", "reply": "answer two"}
    ]
  })");
  ScriptedMetaBackend meta(script);
  std::string got_one;
  std::string got_two;
  std::thread a([&] {
    for (int i = 0; i < 200; ++i) got_one = meta.complete("pipeline one asks", {}).text;
  });
  std::thread b([&] {
    for (int i = 0; i < 200; ++i) got_two = meta.complete("pipeline two asks", {}).text;
  });
  a.join();
  b.join();
  CHECK(got_one == "answer one");
  CHECK(got_two == "answer two");
}
