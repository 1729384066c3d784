#include <doctest.h>

#include <map>
#include <set>
#include <string>

#include "vleu/chat_backend.hpp"
#include "vleu/error.hpp"
#include "vleu/sampler.hpp"

using namespace vleu;

namespace {

PromptTemplate unconstrained() { return {TemplateKind::unconstrained, {}, {}}; }
PromptTemplate dog() { return {TemplateKind::constrained, "dog", {}}; }

SamplerConfig config_for(std::size_t num, std::size_t step = 50) {
  SamplerConfig c;
  c.num = num;
  c.step = step;
  return c;
}

std::vector<std::string> texts(const std::vector<SampledPrompt>& prompts) {
  std::vector<std::string> out;
  for (const auto& p : prompts) out.push_back(p.text);
  return out;
}

}  // namespace

TEST_CASE("render_template: table strings") {
  CHECK(render_template(unconstrained()) ==
        "Please imagine a random picture and describe it in one sentence.");
  CHECK(render_template(dog()) ==
        "Please imagine a picture of dog and describe it in one sentence, making sure to "
        "include the word \"dog\".");
  CHECK(render_template({TemplateKind::constrained_with_property, "person", "ethnicity"}) ==
        "Please imagine a picture of person and describe it in one sentence, making sure to "
        "include the word \"person\" and words about ethnicity.");
}

TEST_CASE("render_template: missing fields") {
  auto code = [](const PromptTemplate& t) {
    try {
      render_template(t);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io;
  };
  CHECK(code({TemplateKind::constrained, "", ""}) == ErrorCode::template_error);
  CHECK(code({TemplateKind::constrained_with_property, "person", ""}) == ErrorCode::template_error);
  CHECK(code({TemplateKind::constrained_with_property, "", "ethnicity"}) == ErrorCode::template_error);
}

TEST_CASE("clean_reply strips whitespace and quotes") {
  CHECK(clean_reply("  \"A red fox in snow.\" \n") == "A red fox in snow.");
  CHECK(clean_reply("'single'") == "single");
  CHECK(clean_reply("\"unbalanced") == "\"unbalanced");
  CHECK(clean_reply("   ") == "");
  CHECK(clean_reply("\"\"") == "");
}

TEST_CASE("sample_prompts: num = 0 makes no calls") {
  auto backend = ScriptedChatBackend::counter();
  CHECK(sample_prompts(config_for(0), unconstrained(), backend).empty());
  CHECK(backend.calls() == 0);
}

TEST_CASE("sample_prompts: first reply is discarded") {
  auto backend = ScriptedChatBackend::counter();
  auto prompts = sample_prompts(config_for(3), unconstrained(), backend);
  CHECK(texts(prompts) == std::vector<std::string>{"reply-2", "reply-3", "reply-4"});
  CHECK(backend.calls() == 4);
  for (std::size_t k = 0; k < prompts.size(); ++k) {
    CHECK(prompts[k].id == k);
    CHECK(prompts[k].round == k + 1);
    CHECK(prompts[k].conversation_index == 0);
    CHECK(prompts[k].sampler_model == "scripted");
  }

  // Round r sees 1 system message + (r - 1) reply/Again pairs + the current pair.
  const auto transcript = backend.transcript();
  REQUIRE(transcript.size() == 4);
  CHECK(transcript[0] ==
        std::vector<ChatMessage>{{Role::system, render_template(unconstrained())}});
  for (std::size_t r = 1; r <= 3; ++r) {
    const auto& sent = transcript[r];
    REQUIRE(sent.size() == 1 + 2 * r);
    CHECK(sent[0].role == Role::system);
    for (std::size_t k = 1; k <= r; ++k) {
      CHECK(sent[2 * k - 1] == ChatMessage{Role::assistant, "reply-" + std::to_string(k)});
      CHECK(sent[2 * k] == ChatMessage{Role::user, "Again"});
    }
  }
}

TEST_CASE("sample_prompts: keyword retry re-sends the same messages") {
  auto backend = ScriptedChatBackend::from_file(VLEU_FIXTURE_DIR "/keyword_script.txt");
  auto cfg = config_for(1);
  cfg.include_keyword = true;
  auto prompts = sample_prompts(cfg, dog(), backend);
  REQUIRE(prompts.size() == 1);
  CHECK(prompts[0].text == "reply-3 dog");
  CHECK(prompts[0].keyword_retries == 1);
  CHECK(prompts[0].round == 1);

  const auto transcript = backend.transcript();
  REQUIRE(transcript.size() == 3);
  // The failed reply-2 is not appended before the retry.
  CHECK(transcript[1] == transcript[2]);
  CHECK(transcript[2].back() == ChatMessage{Role::user, "Again"});
  CHECK(transcript[2][1] == ChatMessage{Role::assistant, "reply-1"});
}

TEST_CASE("sample_prompts: conversations split by step") {
  auto backend = ScriptedChatBackend::counter();
  auto prompts = sample_prompts(config_for(120), unconstrained(), backend);
  REQUIRE(prompts.size() == 120);
  std::map<std::size_t, std::size_t> per_conversation;
  for (const auto& p : prompts) ++per_conversation[p.conversation_index];
  CHECK(per_conversation == std::map<std::size_t, std::size_t>{{0, 50}, {1, 50}, {2, 20}});
  CHECK(backend.calls() == 3 + 120);

  // Conversation starts are the 1st, 52nd and 103rd calls, each discarded.
  const auto all = texts(prompts);
  std::set<std::string> collected(all.begin(), all.end());
  for (int seed : {1, 52, 103}) CHECK(collected.count("reply-" + std::to_string(seed)) == 0);
  for (std::size_t k = 0; k < prompts.size(); ++k) CHECK(prompts[k].id == k);

  for (const auto& sent : backend.transcript()) {
    CHECK(sent.front().role == Role::system);
    if (sent.size() > 1) CHECK(sent.back() == ChatMessage{Role::user, "Again"});
  }
}

TEST_CASE("sample_prompts: keyword guarantee and call accounting") {
  // Replies alternate between missing and containing the keyword.
  std::vector<std::string> script;
  for (int k = 0; k < 200; ++k) script.push_back(k % 3 == 1 ? "a cat" : "a Dog and a dog");
  ScriptedChatBackend backend(script);
  auto cfg = config_for(20, 7);
  cfg.include_keyword = true;
  auto prompts = sample_prompts(cfg, dog(), backend);
  REQUIRE(prompts.size() == 20);
  std::size_t retries = 0;
  for (const auto& p : prompts) {
    CHECK(p.text.find("dog") != std::string::npos);
    retries += p.keyword_retries;
  }
  const std::size_t conversations = 3;
  CHECK(backend.calls() == conversations * 1 + 20 + retries);
}

TEST_CASE("sample_prompts: keyword match is case-sensitive unless configured") {
  std::vector<std::string> script{"seed", "A DOG runs", "A DOG sits"};
  auto cfg = config_for(1);
  cfg.include_keyword = true;
  cfg.max_keyword_retries = 1;
  {
    ScriptedChatBackend backend(script);
    CHECK_THROWS_AS(sample_prompts(cfg, dog(), backend), KeywordExhausted);
  }
  {
    ScriptedChatBackend backend(script);
    cfg.keyword_case_insensitive = true;
    auto prompts = sample_prompts(cfg, dog(), backend);
    CHECK(prompts.front().text == "A DOG runs");
  }
}

TEST_CASE("sample_prompts: keyword exhaustion names the round") {
  std::vector<std::string> script{"seed", "has dog", "no", "no", "no", "no"};
  ScriptedChatBackend backend(script);
  auto cfg = config_for(2);
  cfg.include_keyword = true;
  cfg.max_keyword_retries = 3;
  try {
    sample_prompts(cfg, dog(), backend);
    FAIL("expected exhaustion");
  } catch (const KeywordExhausted& e) {
    CHECK(e.code() == ErrorCode::keyword_exhausted);
    CHECK(e.conversation() == 0);
    CHECK(e.round() == 2);
  }
  CHECK(backend.calls() == 6);
}

TEST_CASE("sample_prompts: empty replies are retried") {
  std::vector<std::string> script{"seed", "  \"\" ", "a picture"};
  ScriptedChatBackend backend(script);
  auto prompts = sample_prompts(config_for(1), unconstrained(), backend);
  CHECK(prompts.front().text == "a picture");
  CHECK(prompts.front().keyword_retries == 1);
}

TEST_CASE("sample_prompts: transport failure aborts with partial results") {
  std::vector<std::string> script{"seed", "one", "two", "!fail", "!fail", "!fail"};
  ScriptedChatBackend backend(script);
  try {
    sample_prompts(config_for(5), unconstrained(), backend);
    FAIL("expected abort");
  } catch (const SamplingAborted& e) {
    CHECK(e.code() == ErrorCode::sampling_aborted);
    CHECK(texts(e.partial()) == std::vector<std::string>{"one", "two"});
  }
}

TEST_CASE("sample_prompts: transient transport failure is retried") {
  std::vector<std::string> script{"seed", "!fail", "one"};
  ScriptedChatBackend backend(script);
  auto prompts = sample_prompts(config_for(1), unconstrained(), backend);
  CHECK(prompts.front().text == "one");
}

TEST_CASE("sample_prompts: seed dialogue follows the system message") {
  auto backend = ScriptedChatBackend::counter();
  auto cfg = config_for(1);
  cfg.seed_dialogue = {{"Give me one.", "A lighthouse at dusk."}};
  sample_prompts(cfg, unconstrained(), backend);
  const auto first = backend.transcript().front();
  REQUIRE(first.size() == 3);
  CHECK(first[1] == ChatMessage{Role::user, "Give me one."});
  CHECK(first[2] == ChatMessage{Role::assistant, "A lighthouse at dusk."});
}

TEST_CASE("sample_prompts: parallel conversations are sequenced deterministically") {
  auto backend = ScriptedChatBackend::counter();
  auto cfg = config_for(40, 10);
  cfg.parallelism = 4;
  auto prompts = sample_prompts(cfg, unconstrained(), backend);
  REQUIRE(prompts.size() == 40);
  for (std::size_t k = 0; k < prompts.size(); ++k) {
    CHECK(prompts[k].id == k);
    CHECK(prompts[k].conversation_index == k / 10);
    CHECK(prompts[k].round == k % 10 + 1);
  }
  CHECK(backend.calls() == 44);
}

TEST_CASE("sample_prompts: config validation") {
  auto backend = ScriptedChatBackend::counter();
  auto cfg = config_for(3, 0);
  CHECK_THROWS_AS(sample_prompts(cfg, unconstrained(), backend), Error);
  cfg = config_for(3);
  cfg.include_keyword = true;
  CHECK_THROWS_AS(sample_prompts(cfg, unconstrained(), backend), Error);
  CHECK(backend.calls() == 0);
}
