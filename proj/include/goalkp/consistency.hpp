#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "goalkp/corpus.hpp"
#include "goalkp/errors.hpp"
#include "goalkp/llm.hpp"
#include "goalkp/text.hpp"

namespace goalkp {

// One sampled completion after cleanup; order is the 1-based rank order.
struct ParsedSample {
  std::vector<std::string> phrases;
};

struct ScoredPhrase {
  std::string phrase;
  int freq = 0;            // number of samples containing the phrase
  std::int64_t rank_sum = 0;  // sum of 1-based ranks over those samples
  double score = 0.0;      // (freq/K) * (freq/rank_sum), in [0,1]
};

namespace detail {

inline const std::vector<std::string>& sample_preambles() {
  static const std::vector<std::string> preambles = {
      "present and absent keyphrases:",
      "present keyphrases:",
      "absent keyphrases:",
      "keyphrases:",
  };
  return preambles;
}

inline std::string_view strip_preambles(std::string_view line) {
  line = trim_view(line);
  bool stripped = true;
  while (stripped) {
    stripped = false;
    for (const std::string& p : sample_preambles()) {
      if (starts_with_icase(line, p)) {
        line = trim_view(line.substr(p.size()));
        stripped = true;
      }
    }
  }
  return line;
}

}  // namespace detail

// Cleans one raw completion into a ranked phrase list: list preambles are
// stripped per line, phrases split on commas, normalized, empties dropped,
// and within-sample duplicates removed keeping the first position.
inline ParsedSample parse_sample(const std::string& raw) {
  ParsedSample sample;
  for (const std::string& line : split_lines(raw)) {
    std::string_view rest = detail::strip_preambles(line);
    for (std::string_view piece : split(rest, ',')) {
      std::string phrase = normalize_phrase(piece);
      if (phrase.empty()) continue;
      if (std::find(sample.phrases.begin(), sample.phrases.end(), phrase) ==
          sample.phrases.end())
        sample.phrases.push_back(std::move(phrase));
    }
  }
  return sample;
}

// Saliency score of one phrase given its tallies over K samples.
inline double saliency_score(int freq, std::int64_t rank_sum, int k) {
  if (k < 1) throw ValidationError("K must be >= 1");
  if (freq == 0) return 0.0;
  return (static_cast<double>(freq) / k) *
         (static_cast<double>(freq) / static_cast<double>(rank_sum));
}

// Tallies phrase frequency and rank sums across exactly K parsed samples and
// scores each distinct phrase. Sorted by score descending; ties broken by
// lower rank_sum, then lexicographic phrase.
inline std::vector<ScoredPhrase> aggregate(
    const std::vector<ParsedSample>& samples, int k) {
  if (k < 1) throw ValidationError("K must be >= 1");
  if (static_cast<int>(samples.size()) != k)
    throw ValidationError("expected " + std::to_string(k) + " samples, got " +
                          std::to_string(samples.size()));
  std::map<std::string, ScoredPhrase> tally;
  for (const ParsedSample& sample : samples) {
    for (std::size_t i = 0; i < sample.phrases.size(); ++i) {
      ScoredPhrase& entry = tally[sample.phrases[i]];
      entry.phrase = sample.phrases[i];
      entry.freq += 1;
      entry.rank_sum += static_cast<std::int64_t>(i) + 1;
    }
  }
  std::vector<ScoredPhrase> out;
  out.reserve(tally.size());
  for (auto& [phrase, entry] : tally) {
    entry.score = saliency_score(entry.freq, entry.rank_sum, k);
    out.push_back(std::move(entry));
  }
  std::sort(out.begin(), out.end(),
            [](const ScoredPhrase& a, const ScoredPhrase& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.rank_sum != b.rank_sum) return a.rank_sum < b.rank_sum;
              return a.phrase < b.phrase;
            });
  return out;
}

// Keeps phrases scoring at or above tau, preserving aggregate's order. An
// empty result means no phrase survived, which downstream emits as an
// abstention.
inline std::vector<std::string> filter_by_threshold(
    const std::vector<ScoredPhrase>& scored, double tau) {
  if (tau < 0.0 || tau > 1.0)
    throw ValidationError("tau must be in [0,1]");
  std::vector<std::string> kept;
  for (const ScoredPhrase& p : scored)
    if (p.score >= tau) kept.push_back(p.phrase);
  return kept;
}

// Splits a budget-truncated document rendering back into the title and body
// bindings for the generation prompt. The truncated text is a prefix of
// "title\nbody", so a clipped title means an empty body.
inline std::pair<std::string, std::string> generation_bindings(
    const Document& doc, std::size_t budget = kGenerationTokenBudget) {
  std::string rendered = truncate_for_generation(doc, budget);
  if (doc.title.empty()) return {"", rendered};
  std::string prefix = doc.title + "\n";
  if (rendered.size() >= prefix.size() &&
      rendered.compare(0, prefix.size(), prefix) == 0)
    return {doc.title, rendered.substr(prefix.size())};
  return {rendered, ""};
}

inline PromptRendering generation_prompt(
    const Document& doc, const std::string& goal,
    std::size_t budget = kGenerationTokenBudget) {
  auto [title, body] = generation_bindings(doc, budget);
  return render_prompt(PromptTemplate::keyphrase_generation,
                       {{"title", title}, {"body", body}, {"goal", goal}});
}

struct GenerationResult {
  std::vector<ParsedSample> samples;
  std::vector<ScoredPhrase> scored;
  std::vector<std::string> kept;
};

// Full self-consistency pass for one (document, goal) pair: K sampled
// completions, parse, aggregate, threshold.
inline GenerationResult generate_scored(
    const Document& doc, const std::string& goal, const SamplingConfig& cfg,
    double tau, const ResponseCache& cache, ChatTransport& transport,
    const RetryPolicy& retry = {},
    std::size_t budget = kGenerationTokenBudget) {
  PromptRendering prompt = generation_prompt(doc, goal, budget);
  std::vector<std::string> raw =
      sample_completions(prompt, cfg, cache, transport, retry);
  GenerationResult result;
  result.samples.reserve(raw.size());
  for (const std::string& text : raw) result.samples.push_back(parse_sample(text));
  result.scored = aggregate(result.samples, cfg.num_samples_k);
  result.kept = filter_by_threshold(result.scored, tau);
  return result;
}

inline std::vector<std::string> generate_on_demand(
    const Document& doc, const std::string& goal, const SamplingConfig& cfg,
    double tau, const ResponseCache& cache, ChatTransport& transport,
    const RetryPolicy& retry = {},
    std::size_t budget = kGenerationTokenBudget) {
  return generate_scored(doc, goal, cfg, tau, cache, transport, retry, budget)
      .kept;
}

// ---------------------------------------------------------------------------
// Prediction records (JSON Lines external interface)
// ---------------------------------------------------------------------------

struct PredictionRecord {
  std::string doc_id;
  std::string goal;
  bool judged_relevant = false;
  std::vector<ScoredPhrase> phrases;  // empty when judged irrelevant
  std::vector<std::string> kept;
};

inline nlohmann::json prediction_to_json(const PredictionRecord& rec) {
  nlohmann::json phrases = nlohmann::json::array();
  for (const ScoredPhrase& p : rec.phrases)
    phrases.push_back({{"phrase", p.phrase},
                       {"freq", p.freq},
                       {"rank_sum", p.rank_sum},
                       {"score", p.score}});
  return {{"doc_id", rec.doc_id},
          {"goal", rec.goal},
          {"judged_relevant", rec.judged_relevant},
          {"phrases", phrases},
          {"kept", rec.kept}};
}

inline PredictionRecord parse_prediction(const nlohmann::json& obj) {
  try {
    PredictionRecord rec;
    rec.doc_id = obj.at("doc_id").get<std::string>();
    rec.goal = obj.at("goal").get<std::string>();
    rec.judged_relevant = obj.at("judged_relevant").get<bool>();
    for (const nlohmann::json& p : obj.at("phrases")) {
      ScoredPhrase sp;
      sp.phrase = p.at("phrase").get<std::string>();
      sp.freq = p.at("freq").get<int>();
      sp.rank_sum = p.at("rank_sum").get<std::int64_t>();
      sp.score = p.at("score").get<double>();
      rec.phrases.push_back(std::move(sp));
    }
    rec.kept = obj.at("kept").get<std::vector<std::string>>();
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed prediction record: ") +
                          e.what());
  }
}

inline std::vector<PredictionRecord> load_predictions(
    const std::filesystem::path& path) {
  std::vector<PredictionRecord> out;
  for_each_jsonl_line(path, [&](std::size_t line_no, const nlohmann::json& obj) {
    try {
      out.push_back(parse_prediction(obj));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
  });
  return out;
}

inline std::string serialize_predictions(
    const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const PredictionRecord& rec : records) {
    out += prediction_to_json(rec).dump();
    out += '\n';
  }
  return out;
}

inline void save_predictions(const std::filesystem::path& path,
                             const std::vector<PredictionRecord>& records) {
  atomic_write_file(path, serialize_predictions(records));
}

}  // namespace goalkp
