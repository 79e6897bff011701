#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "goalkp/corpus.hpp"
#include "goalkp/detail/sha256.hpp"
#include "goalkp/errors.hpp"
#include "goalkp/jsonl.hpp"
#include "goalkp/text.hpp"

namespace goalkp {

// ---------------------------------------------------------------------------
// Sampling configuration
// ---------------------------------------------------------------------------

struct SamplingConfig {
  int num_samples_k = 10;
  double top_p = 0.95;
  double temperature = 0.7;
  int max_output_tokens = 30;
  std::string model_name = "gpt-4o";
};

// Output cap for yes/no relevance judgments.
inline constexpr int kRelevanceMaxOutputTokens = 4;

// Greedy decoding with a 400-token cap, used by the annotation pipeline.
inline SamplingConfig annotation_sampling(std::string model_name) {
  SamplingConfig cfg;
  cfg.num_samples_k = 1;
  cfg.top_p = 1.0;
  cfg.temperature = 0.0;
  cfg.max_output_tokens = 400;
  cfg.model_name = std::move(model_name);
  return cfg;
}

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

enum class PromptTemplate {
  relevance_judgment,
  keyphrase_generation,
  goal_proposal,
  goal_refinement,
};

struct PromptRendering {
  PromptTemplate template_id;
  std::string filled_text;
};

namespace detail {

inline const char* template_text(PromptTemplate id) {
  switch (id) {
    case PromptTemplate::relevance_judgment:
      return "In this task you will need to decide if you should reject the "
             "high-level category given the title and abstract of a document. "
             "One could use the high-level category to write keyphrases from "
             "the document. If you decide the category is relevant to the "
             "document, generate yes; if the category is not relevant, "
             "generate no. Do not output anything else.\n"
             "\n"
             "Document Title: {title}\n"
             "Document Abstract: {body}\n"
             "\n"
             "High-level Category: {goal}\n"
             "Relevant? (yes or no):";
    case PromptTemplate::keyphrase_generation:
      return "Generate present and absent keyphrases belonging to the "
             "high-level category from the given text, separated by commas. "
             "Do not output anything else.\n"
             "\n"
             "Document Title: {title}\n"
             "Document Abstract: {body}\n"
             "\n"
             "High-level Category: {goal}\n"
             "Keyphrases (Must be of category \"{goal}\"):";
    case PromptTemplate::goal_proposal:
      return "Document Title: {title}\n"
             "First 4 sentences of the document body: {body}\n"
             "\n"
             "Keyphrases (separated by \";\"): {keyphrases}\n"
             "\n"
             "For each keyphrase, generate an abstract category for the "
             "keyphrase. Examples include process, task, material, tool, "
             "measurement, model, technology, and metric etc. Do not limit "
             "yourself to the examples. Make sure that the categories are "
             "informative in the domain of science and appearing natural as "
             "if that assigned by a well-read user. Return a list of "
             "dictionaries, each with two keys - \"keyphrase\" and "
             "\"category\". If two keyphrases have the same category, make "
             "sure that they are labelled with the same phrase. Do not change "
             "how the keyphrases appear, including their cases. Return json "
             "only and do not say anything else.";
    case PromptTemplate::goal_refinement:
      return "Can you make the categories more abstract, yet still "
             "informative to the keyphrase? If the categories are already "
             "abstract enough, you do not need to change. Return json only.";
  }
  throw Error("unknown prompt template");
}

}  // namespace detail

// Byte-exact template instantiation. Every {placeholder} in the template must
// have a binding; the error names the first missing one.
inline PromptRendering render_prompt(
    PromptTemplate id, const std::map<std::string, std::string>& bindings) {
  std::string_view tmpl = detail::template_text(id);
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] != '{') {
      out.push_back(tmpl[i++]);
      continue;
    }
    std::size_t close = tmpl.find('}', i);
    if (close == std::string_view::npos) throw Error("unterminated placeholder");
    std::string name(tmpl.substr(i + 1, close - i - 1));
    auto it = bindings.find(name);
    if (it == bindings.end())
      throw ValidationError("missing binding: " + name);
    out += it->second;
    i = close + 1;
  }
  return PromptRendering{id, std::move(out)};
}

// Title plus at most the first five sentences of the body (the relevance
// judgment context window).
inline std::string truncate_for_relevance(const Document& doc) {
  Document clipped = doc;
  clipped.body = first_sentences(doc.body, 5);
  return render_document(clipped);
}

inline constexpr std::size_t kGenerationTokenBudget = 4000;

// Rendered document clipped to the generation input budget, cut at a
// whitespace boundary.
inline std::string truncate_for_generation(
    const Document& doc, std::size_t budget = kGenerationTokenBudget) {
  return truncate_to_tokens(render_document(doc), budget);
}

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_output_tokens = 1;
  // Differentiates the K independent draws; transports backed by a live API
  // ignore it, the scripted transport indexes its fixture with it.
  int sample_index = 0;
};

struct ChatResponse {
  int status = 0;  // 200 on success; 0 means the connection itself failed
  std::string text;
};

class ChatTransport {
public:
  virtual ~ChatTransport() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

inline std::string canonical_messages_text(const std::vector<ChatMessage>& messages) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ChatMessage& m : messages)
    arr.push_back({{"content", m.content}, {"role", m.role}});
  return arr.dump();
}

// Digest used by scripted-transport fixtures: depends only on the
// conversation content, not on sampling parameters.
inline std::string prompt_digest(const std::vector<ChatMessage>& messages) {
  return detail::sha256_hex(canonical_messages_text(messages));
}

inline std::string prompt_digest(const PromptRendering& prompt) {
  return prompt_digest({ChatMessage{"user", prompt.filled_text}});
}

// ---------------------------------------------------------------------------
// Response cache
// ---------------------------------------------------------------------------

inline std::string make_cache_key(const std::string& model,
                                  const std::string& prompt_text,
                                  double temperature, double top_p,
                                  int max_output_tokens, int sample_index) {
  nlohmann::json key = {{"max_output_tokens", max_output_tokens},
                        {"model", model},
                        {"prompt", prompt_text},
                        {"sample_index", sample_index},
                        {"temperature", temperature},
                        {"top_p", top_p}};
  return detail::sha256_hex(key.dump());
}

inline std::string rfc3339_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[72];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return buf;
}

// Content-addressed directory of JSON files, one response per key. Reads are
// lock-free; writes go through a temp file and an atomic rename, so
// concurrent fetches of the same key converge on identical content.
class ResponseCache {
public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const { return dir_; }

  std::optional<std::string> lookup(const std::string& key) const {
    std::filesystem::path path = entry_path(key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
      nlohmann::json entry = nlohmann::json::parse(read_file(path));
      return entry.at("response_text").get<std::string>();
    } catch (...) {
      // Unreadable entry: treat as a miss and refetch.
      return std::nullopt;
    }
  }

  void store(const std::string& key, const std::string& response_text) const {
    nlohmann::json entry = {{"key", key},
                            {"response_text", response_text},
                            {"created_at", rfc3339_now()}};
    atomic_write_file(entry_path(key), entry.dump() + "\n");
  }

  std::size_t size() const {
    std::size_t n = 0;
    std::error_code ec;
    for (auto it = std::filesystem::directory_iterator(dir_, ec);
         it != std::filesystem::directory_iterator(); ++it) {
      if (it->path().extension() == ".json") ++n;
    }
    return n;
  }

private:
  std::filesystem::path entry_path(const std::string& key) const {
    return dir_ / (key + ".json");
  }

  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Retries and sampling
// ---------------------------------------------------------------------------

struct RetryPolicy {
  int max_attempts = 5;
  int initial_delay_ms = 1000;
  double multiplier = 2.0;
  double jitter_fraction = 0.25;
  int max_delay_ms = 60000;
};

namespace detail {

inline bool is_transient_status(int status) {
  return status == 0 || status == 429 || (status >= 500 && status < 600);
}

inline void backoff_sleep(const RetryPolicy& policy, int attempt) {
  double delay = policy.initial_delay_ms;
  for (int i = 1; i < attempt; ++i) delay *= policy.multiplier;
  if (delay > policy.max_delay_ms) delay = policy.max_delay_ms;
  if (policy.jitter_fraction > 0.0 && delay > 0.0) {
    thread_local std::mt19937 rng{std::random_device{}()};
    std::uniform_real_distribution<double> u(1.0 - policy.jitter_fraction,
                                             1.0 + policy.jitter_fraction);
    delay *= u(rng);
  }
  if (delay > 0.0)
    std::this_thread::sleep_for(
        std::chrono::milliseconds(static_cast<long>(delay)));
}

inline std::string fetch_with_retries(ChatTransport& transport,
                                      const ChatRequest& request,
                                      const RetryPolicy& policy) {
  int last_status = 0;
  std::string last_text;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    ChatResponse resp = transport.complete(request);
    if (resp.status == 200) return resp.text;
    last_status = resp.status;
    last_text = resp.text;
    if (!is_transient_status(resp.status))
      throw TransportError("transport failed with status " +
                               std::to_string(resp.status) + ": " + resp.text,
                           resp.status);
    if (attempt < policy.max_attempts) backoff_sleep(policy, attempt);
  }
  throw TransportError("transport exhausted after " +
                           std::to_string(policy.max_attempts) +
                           " attempts; last status " +
                           std::to_string(last_status) + ": " + last_text,
                       last_status);
}

}  // namespace detail

// Draws exactly K completions for the conversation. Each sample index is
// served from the cache when present, otherwise fetched and persisted before
// returning.
inline std::vector<std::string> sample_completions(
    const std::vector<ChatMessage>& messages, const SamplingConfig& cfg,
    const ResponseCache& cache, ChatTransport& transport,
    const RetryPolicy& retry = {}) {
  if (cfg.num_samples_k < 1)
    throw ValidationError("num_samples_k must be >= 1");
  std::string prompt_text = canonical_messages_text(messages);
  std::vector<std::string> out(static_cast<std::size_t>(cfg.num_samples_k));
  for (int idx = 0; idx < cfg.num_samples_k; ++idx) {
    std::string key =
        make_cache_key(cfg.model_name, prompt_text, cfg.temperature, cfg.top_p,
                       cfg.max_output_tokens, idx);
    if (auto hit = cache.lookup(key)) {
      out[static_cast<std::size_t>(idx)] = *hit;
      continue;
    }
    ChatRequest request{cfg.model_name, messages,          cfg.temperature,
                        cfg.top_p,      cfg.max_output_tokens, idx};
    std::string text = detail::fetch_with_retries(transport, request, retry);
    cache.store(key, text);
    out[static_cast<std::size_t>(idx)] = text;
  }
  return out;
}

inline std::vector<std::string> sample_completions(
    const PromptRendering& prompt, const SamplingConfig& cfg,
    const ResponseCache& cache, ChatTransport& transport,
    const RetryPolicy& retry = {}) {
  return sample_completions({ChatMessage{"user", prompt.filled_text}}, cfg,
                            cache, transport, retry);
}

// Greedy yes/no judgment of a goal against a document. True iff the response,
// lowercased and stripped, begins with "yes"; anything that is neither yes-
// nor no-prefixed is a contract violation.
inline bool judge_relevance(const Document& doc, const std::string& goal,
                            const SamplingConfig& cfg,
                            const ResponseCache& cache, ChatTransport& transport,
                            const RetryPolicy& retry = {},
                            int max_output_tokens = kRelevanceMaxOutputTokens) {
  PromptRendering prompt = render_prompt(
      PromptTemplate::relevance_judgment,
      {{"title", doc.title},
       {"body", first_sentences(doc.body, 5)},
       {"goal", goal}});
  SamplingConfig greedy = cfg;
  greedy.num_samples_k = 1;
  greedy.temperature = 0.0;
  greedy.top_p = 1.0;
  greedy.max_output_tokens = max_output_tokens;
  std::string raw = sample_completions(prompt, greedy, cache, transport, retry).front();
  std::string answer = ascii_lower(trim(raw));
  if (answer.rfind("yes", 0) == 0) return true;
  if (answer.rfind("no", 0) == 0) return false;
  throw ParseError("relevance judgment is neither yes- nor no-prefixed: \"" +
                       raw + "\"",
                   raw);
}

// ---------------------------------------------------------------------------
// Scripted transport
// ---------------------------------------------------------------------------

// Deterministic offline transport: a JSON fixture maps prompt digests to
// ordered response lists, one entry per sample index.
class ScriptedTransport : public ChatTransport {
public:
  explicit ScriptedTransport(nlohmann::json fixture)
      : fixture_(std::move(fixture)) {
    if (!fixture_.is_object())
      throw ValidationError("scripted transport fixture must be a JSON object");
  }

  static ScriptedTransport from_file(const std::filesystem::path& path) {
    try {
      return ScriptedTransport(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("mock fixture " + path.string() + ": " + e.what());
    }
  }

  // Movable despite the mutex member; moving a transport that another thread
  // is still calling is a race regardless, so no lock is taken.
  ScriptedTransport(ScriptedTransport&& other) noexcept
      : fixture_(std::move(other.fixture_)), calls_(other.calls_) {}

  ChatResponse complete(const ChatRequest& request) override {
    std::lock_guard<std::mutex> lock(mutex_);
    ++calls_;
    std::string digest = prompt_digest(request.messages);
    auto it = fixture_.find(digest);
    if (it == fixture_.end())
      return {404, "no scripted response for prompt digest " + digest};
    if (!it->is_array() || request.sample_index >= static_cast<int>(it->size()))
      return {404, "scripted responses for digest " + digest +
                       " have no sample index " +
                       std::to_string(request.sample_index)};
    return {200, (*it)[static_cast<std::size_t>(request.sample_index)]
                     .get<std::string>()};
  }

  int call_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
  }

private:
  nlohmann::json fixture_;
  mutable std::mutex mutex_;
  int calls_ = 0;
};

// Bundle handed to pipeline stages.
struct LlmContext {
  SamplingConfig sampling;
  const ResponseCache* cache = nullptr;
  ChatTransport* transport = nullptr;
  RetryPolicy retry;
};

}  // namespace goalkp
