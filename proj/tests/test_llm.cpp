#include <set>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "goalkp/jsonl.hpp"
#include "goalkp/llm.hpp"
#include "support/fixtures.hpp"

using namespace goalkp;
using fixtures::MockFixture;
using fixtures::TempDir;

namespace {

std::string golden(const std::string& name) {
  return read_file(std::filesystem::path(GOALKP_GOLDEN_DIR) / name);
}

std::string replace_all(std::string text, const std::string& from,
                        const std::string& to) {
  for (std::size_t pos = 0; (pos = text.find(from, pos)) != std::string::npos;
       pos += to.size())
    text.replace(pos, from.size(), to);
  return text;
}

// Transport that always answers with a fixed status.
class FixedStatusTransport : public ChatTransport {
public:
  explicit FixedStatusTransport(int status) : status_(status) {}
  ChatResponse complete(const ChatRequest&) override {
    ++calls;
    return {status_, "simulated failure"};
  }
  int calls = 0;

private:
  int status_;
};

RetryPolicy no_wait(int attempts) { return {attempts, 0, 2.0, 0.0, 0}; }

}  // namespace

TEST_CASE("prompt templates match their golden files", "[llm]") {
  CHECK(detail::template_text(PromptTemplate::relevance_judgment) ==
        golden("relevance_prompt.txt"));
  CHECK(detail::template_text(PromptTemplate::keyphrase_generation) ==
        golden("generation_prompt.txt"));
}

TEST_CASE("render_prompt substitutes placeholders byte-exactly", "[llm]") {
  PromptRendering r = render_prompt(
      PromptTemplate::relevance_judgment,
      {{"title", "T"}, {"body", "B"}, {"goal", "G"}});
  std::string expected = golden("relevance_prompt.txt");
  expected = replace_all(expected, "{title}", "T");
  expected = replace_all(expected, "{body}", "B");
  expected = replace_all(expected, "{goal}", "G");
  CHECK(r.filled_text == expected);

  PromptRendering g = render_prompt(
      PromptTemplate::keyphrase_generation,
      {{"title", "T"}, {"body", "B"}, {"goal", "energy source"}});
  // The goal appears twice: the category line and the quoted generation cue.
  CHECK(g.filled_text.find("High-level Category: energy source\n") !=
        std::string::npos);
  CHECK(g.filled_text.find("Keyphrases (Must be of category \"energy source\"):") !=
        std::string::npos);
}

TEST_CASE("render_prompt names the missing binding", "[llm]") {
  CHECK_THROWS_WITH(
      render_prompt(PromptTemplate::relevance_judgment,
                    {{"title", "T"}, {"body", "B"}}),
      Catch::Matchers::ContainsSubstring("missing binding: goal"));
}

TEST_CASE("sampling defaults", "[llm]") {
  SamplingConfig cfg;
  CHECK(cfg.num_samples_k == 10);
  CHECK(cfg.top_p == 0.95);
  CHECK(cfg.temperature == 0.7);
  CHECK(cfg.max_output_tokens == 30);

  SamplingConfig ann = annotation_sampling("gpt-4o");
  CHECK(ann.num_samples_k == 1);
  CHECK(ann.temperature == 0.0);
  CHECK(ann.max_output_tokens == 400);
}

TEST_CASE("truncate_for_relevance keeps at most five sentences", "[llm]") {
  Document doc = fixtures::make_doc(
      "d", "Title", "One a. Two b. Three c. Four d. Five e. Six f. Seven g.");
  CHECK(truncate_for_relevance(doc) ==
        "Title\nOne a. Two b. Three c. Four d. Five e.");
}

TEST_CASE("truncate_for_generation respects the token budget", "[llm]") {
  Document doc = fixtures::make_doc("d", "Title", "alpha beta gamma delta");
  CHECK(truncate_for_generation(doc) == "Title\nalpha beta gamma delta");
  std::string clipped = truncate_for_generation(doc, 2);
  CHECK(approx_token_count(clipped) <= 2);
  CHECK_FALSE(clipped.empty());
}

TEST_CASE("cache key depends on every request field", "[llm]") {
  std::set<std::string> keys;
  keys.insert(make_cache_key("m", "p", 0.7, 0.95, 30, 0));
  keys.insert(make_cache_key("m2", "p", 0.7, 0.95, 30, 0));
  keys.insert(make_cache_key("m", "p2", 0.7, 0.95, 30, 0));
  keys.insert(make_cache_key("m", "p", 0.0, 0.95, 30, 0));
  keys.insert(make_cache_key("m", "p", 0.7, 1.0, 30, 0));
  keys.insert(make_cache_key("m", "p", 0.7, 0.95, 31, 0));
  keys.insert(make_cache_key("m", "p", 0.7, 0.95, 30, 1));
  CHECK(keys.size() == 7);
  CHECK(make_cache_key("m", "p", 0.7, 0.95, 30, 0) ==
        make_cache_key("m", "p", 0.7, 0.95, 30, 0));
}

TEST_CASE("prompt digest ignores sampling parameters", "[llm]") {
  std::vector<ChatMessage> messages{{"user", "hello"}};
  CHECK(prompt_digest(messages) == prompt_digest(messages));
  std::vector<ChatMessage> other{{"user", "hello!"}};
  CHECK(prompt_digest(messages) != prompt_digest(other));
  std::vector<ChatMessage> role{{"assistant", "hello"}};
  CHECK(prompt_digest(messages) != prompt_digest(role));
}

TEST_CASE("response cache round trip and corruption handling", "[llm]") {
  TempDir dir("cache");
  ResponseCache cache(dir.path() / "cache");
  CHECK(cache.size() == 0);
  CHECK_FALSE(cache.lookup("k1").has_value());
  cache.store("k1", "hello");
  REQUIRE(cache.lookup("k1").has_value());
  CHECK(*cache.lookup("k1") == "hello");
  CHECK(cache.size() == 1);
  // Overwrite is idempotent.
  cache.store("k1", "hello");
  CHECK(cache.size() == 1);
  // A corrupt entry reads as a miss.
  atomic_write_file(cache.dir() / "k2.json", "{broken");
  CHECK_FALSE(cache.lookup("k2").has_value());
}

TEST_CASE("sample_completions draws exactly K and caches each index", "[llm]") {
  TempDir dir("sample");
  ResponseCache cache(dir.path() / "cache");
  std::vector<ChatMessage> messages{{"user", "list keyphrases"}};
  MockFixture mock;
  mock.script_messages(messages, {"r0", "r1", "r2"});
  ScriptedTransport transport = mock.transport();

  SamplingConfig cfg;
  cfg.num_samples_k = 3;
  auto out = sample_completions(messages, cfg, cache, transport, no_wait(1));
  CHECK(out == std::vector<std::string>{"r0", "r1", "r2"});
  CHECK(transport.call_count() == 3);
  CHECK(cache.size() == 3);

  // Second identical run is served entirely from the cache.
  auto again = sample_completions(messages, cfg, cache, transport, no_wait(1));
  CHECK(again == out);
  CHECK(transport.call_count() == 3);
}

TEST_CASE("sample_completions fetches only the missing indices", "[llm]") {
  TempDir dir("partial");
  ResponseCache cache(dir.path() / "cache");
  std::vector<ChatMessage> messages{{"user", "list keyphrases"}};
  MockFixture mock;
  mock.script_messages(messages, {"unused", "fresh"});
  ScriptedTransport transport = mock.transport();

  SamplingConfig cfg;
  cfg.num_samples_k = 2;
  cache.store(make_cache_key(cfg.model_name, canonical_messages_text(messages),
                             cfg.temperature, cfg.top_p, cfg.max_output_tokens,
                             0),
              "cached");
  auto out = sample_completions(messages, cfg, cache, transport, no_wait(1));
  CHECK(out == std::vector<std::string>{"cached", "fresh"});
  CHECK(transport.call_count() == 1);
}

TEST_CASE("sample_completions rejects K < 1", "[llm]") {
  TempDir dir("badk");
  ResponseCache cache(dir.path() / "cache");
  MockFixture mock;
  ScriptedTransport transport = mock.transport();
  SamplingConfig cfg;
  cfg.num_samples_k = 0;
  CHECK_THROWS_AS(sample_completions({ChatMessage{"user", "x"}}, cfg, cache,
                                     transport, no_wait(1)),
                  ValidationError);
}

TEST_CASE("transient failures retry up to the attempt cap", "[llm]") {
  TempDir dir("retry");
  ResponseCache cache(dir.path() / "cache");
  SamplingConfig cfg;
  cfg.num_samples_k = 1;

  for (int status : {0, 429, 503}) {
    FixedStatusTransport transport(status);
    CHECK_THROWS_AS(sample_completions({ChatMessage{"user", "x"}}, cfg, cache,
                                       transport, no_wait(3)),
                    TransportError);
    CHECK(transport.calls == 3);
  }
  CHECK(cache.size() == 0);
}

TEST_CASE("non-transient failures do not retry", "[llm]") {
  TempDir dir("fatal");
  ResponseCache cache(dir.path() / "cache");
  SamplingConfig cfg;
  cfg.num_samples_k = 1;
  FixedStatusTransport transport(404);
  try {
    sample_completions({ChatMessage{"user", "x"}}, cfg, cache, transport,
                       no_wait(5));
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.last_status == 404);
  }
  CHECK(transport.calls == 1);
  CHECK(cache.size() == 0);
}

TEST_CASE("judge_relevance parses yes/no prefixes case-insensitively", "[llm]") {
  TempDir dir("judge");
  ResponseCache cache(dir.path() / "cache");
  Document doc = fixtures::make_doc("d", "Title", "Body text.");
  SamplingConfig cfg;

  MockFixture mock;
  mock.script_relevance(doc, "energy source", true);
  ScriptedTransport yes = mock.transport();
  CHECK(judge_relevance(doc, "energy source", cfg, cache, yes, no_wait(1)));
  // The verdict is now cached; further judgments cost no transport calls.
  CHECK(judge_relevance(doc, "energy source", cfg, cache, yes, no_wait(1)));
  CHECK(yes.call_count() == 1);

  nlohmann::json fixture = {
      {fixtures::relevance_digest(doc, "recipe"), {"No."}},
      {fixtures::relevance_digest(doc, "shouting"), {"YES, clearly"}},
      {fixtures::relevance_digest(doc, "hedging"), {"maybe"}}};
  ScriptedTransport mixed{fixture};
  CHECK_FALSE(judge_relevance(doc, "recipe", cfg, cache, mixed, no_wait(1)));
  CHECK(judge_relevance(doc, "shouting", cfg, cache, mixed, no_wait(1)));
  try {
    judge_relevance(doc, "hedging", cfg, cache, mixed, no_wait(1));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.raw_text == "maybe");
  }
}

TEST_CASE("scripted transport 404s on unknown digests and indices", "[llm]") {
  MockFixture mock;
  mock.script_messages({{"user", "known"}}, {"only one"});
  ScriptedTransport transport = mock.transport();

  ChatRequest unknown{"m", {{"user", "unknown"}}, 0.0, 1.0, 4, 0};
  CHECK(transport.complete(unknown).status == 404);

  ChatRequest overflow{"m", {{"user", "known"}}, 0.0, 1.0, 4, 1};
  CHECK(transport.complete(overflow).status == 404);

  ChatRequest ok{"m", {{"user", "known"}}, 0.0, 1.0, 4, 0};
  ChatResponse resp = transport.complete(ok);
  CHECK(resp.status == 200);
  CHECK(resp.text == "only one");
}
