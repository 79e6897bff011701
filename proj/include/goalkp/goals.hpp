#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "goalkp/corpus.hpp"
#include "goalkp/errors.hpp"
#include "goalkp/jsonl.hpp"
#include "goalkp/llm.hpp"
#include "goalkp/similarity.hpp"
#include "goalkp/text.hpp"

namespace goalkp {

// ---------------------------------------------------------------------------
// Goal proposal and refinement (LLM-backed)
// ---------------------------------------------------------------------------

struct GoalMapping {
  // Goal -> keyphrases, goals in first-appearance order of the model output.
  std::vector<std::pair<std::string, std::vector<std::string>>> by_goal;
  // Conversation so far: proposal prompt, model answer, and any follow-ups.
  std::vector<ChatMessage> chat;
};

namespace detail {

// Pulls the outermost JSON array out of a response that may wrap it in prose.
inline nlohmann::json extract_json_array(const std::string& raw) {
  std::size_t open = raw.find('[');
  std::size_t close = raw.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw ParseError("no JSON array found in model output", raw);
  try {
    return nlohmann::json::parse(raw.substr(open, close - open + 1));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model output is not valid JSON: ") + e.what(),
                     raw);
  }
}

// Parses [{"keyphrase": ..., "category": ...}, ...] and checks that every
// expected keyphrase appears under exactly one goal, surface form untouched.
inline std::vector<std::pair<std::string, std::vector<std::string>>>
parse_goal_assignment(const std::string& raw,
                      const std::vector<std::string>& keyphrases) {
  nlohmann::json arr = extract_json_array(raw);
  if (!arr.is_array()) throw ParseError("expected a JSON array", raw);
  std::vector<std::pair<std::string, std::vector<std::string>>> by_goal;
  std::map<std::string, std::size_t> goal_index;
  std::set<std::string> assigned;
  for (const nlohmann::json& item : arr) {
    if (!item.is_object() || !item.contains("keyphrase") ||
        !item.contains("category"))
      throw ParseError("array item lacks keyphrase/category keys", raw);
    std::string kp = item["keyphrase"].get<std::string>();
    std::string goal = trim(item["category"].get<std::string>());
    if (goal.empty()) throw ParseError("empty category for keyphrase " + kp, raw);
    if (!assigned.insert(kp).second)
      throw ParseError("keyphrase assigned to more than one goal: " + kp, raw);
    auto [it, inserted] = goal_index.emplace(goal, by_goal.size());
    if (inserted) by_goal.push_back({goal, {}});
    by_goal[it->second].second.push_back(kp);
  }
  std::vector<std::string> missing;
  for (const std::string& kp : keyphrases)
    if (!assigned.count(kp)) missing.push_back(kp);
  if (!missing.empty()) {
    std::string joined;
    for (const std::string& kp : missing) {
      if (!joined.empty()) joined += ", ";
      joined += kp;
    }
    throw ParseError("model output omits keyphrases: " + joined, raw);
  }
  for (const std::string& kp : assigned)
    if (std::find(keyphrases.begin(), keyphrases.end(), kp) == keyphrases.end())
      throw ParseError("model output invents keyphrase: " + kp, raw);
  return by_goal;
}

// Greedy request with a per-attempt sample index so a retry draws a fresh
// completion instead of replaying the cached one.
inline std::string annotation_completion(const std::vector<ChatMessage>& messages,
                                         const std::string& model_name,
                                         int attempt, const ResponseCache& cache,
                                         ChatTransport& transport,
                                         const RetryPolicy& retry) {
  SamplingConfig cfg = annotation_sampling(model_name);
  cfg.num_samples_k = attempt + 1;
  return sample_completions(messages, cfg, cache, transport, retry).back();
}

}  // namespace detail

inline std::string join_keyphrases(const std::vector<std::string>& keyphrases) {
  std::string out;
  for (const std::string& kp : keyphrases) {
    if (!out.empty()) out += ";";
    out += kp;
  }
  return out;
}

// Asks the model to assign an abstract category to each keyphrase. One retry
// with a fresh sample on unparseable output, then the parse error propagates.
inline GoalMapping propose_goals(const Document& doc,
                                 const std::vector<std::string>& keyphrases,
                                 const std::string& model_name,
                                 const ResponseCache& cache,
                                 ChatTransport& transport,
                                 const RetryPolicy& retry = {}) {
  if (keyphrases.empty())
    throw ValidationError("goal proposal requires at least one keyphrase");
  PromptRendering prompt =
      render_prompt(PromptTemplate::goal_proposal,
                    {{"title", doc.title},
                     {"body", first_sentences(doc.body, 4)},
                     {"keyphrases", join_keyphrases(keyphrases)}});
  std::vector<ChatMessage> messages{{"user", prompt.filled_text}};
  std::string raw;
  for (int attempt = 0; attempt < 2; ++attempt) {
    raw = detail::annotation_completion(messages, model_name, attempt, cache,
                                        transport, retry);
    try {
      GoalMapping mapping;
      mapping.by_goal = detail::parse_goal_assignment(raw, keyphrases);
      mapping.chat = messages;
      mapping.chat.push_back({"assistant", raw});
      return mapping;
    } catch (const ParseError&) {
      if (attempt == 1) throw;
    }
  }
  throw ParseError("unreachable", raw);
}

// Follow-up turn in the same conversation asking for more abstract
// categories. Same coverage contract as propose_goals.
inline GoalMapping refine_goals(const GoalMapping& proposal,
                                const std::vector<std::string>& keyphrases,
                                const std::string& model_name,
                                const ResponseCache& cache,
                                ChatTransport& transport,
                                const RetryPolicy& retry = {}) {
  PromptRendering prompt = render_prompt(PromptTemplate::goal_refinement, {});
  std::vector<ChatMessage> messages = proposal.chat;
  messages.push_back({"user", prompt.filled_text});
  std::string raw;
  for (int attempt = 0; attempt < 2; ++attempt) {
    raw = detail::annotation_completion(messages, model_name, attempt, cache,
                                        transport, retry);
    try {
      GoalMapping mapping;
      mapping.by_goal = detail::parse_goal_assignment(raw, keyphrases);
      mapping.chat = messages;
      mapping.chat.push_back({"assistant", raw});
      return mapping;
    } catch (const ParseError&) {
      if (attempt == 1) throw;
    }
  }
  throw ParseError("unreachable", raw);
}

// ---------------------------------------------------------------------------
// Rule-based goal rewriting
// ---------------------------------------------------------------------------

struct GoalRewriteRules {
  std::set<std::string> removals;
  std::map<std::string, std::string> merges;
  std::vector<std::pair<std::string, std::string>> suffix_merges;
};

inline void validate_rules(const GoalRewriteRules& rules) {
  for (const auto& [source, target] : rules.merges) {
    if (rules.merges.count(target))
      throw ValidationError("merge target is also a merge source: " + target);
    if (rules.removals.count(source))
      throw ValidationError("goal is both removed and merged: " + source);
  }
}

inline GoalRewriteRules parse_rewrite_rules(const nlohmann::json& doc) {
  GoalRewriteRules rules;
  try {
    for (const nlohmann::json& r : doc.at("removals"))
      rules.removals.insert(normalize_reference(r.get<std::string>()));
    for (const auto& [source, target] : doc.at("merges").items())
      rules.merges[normalize_reference(source)] =
          normalize_reference(target.get<std::string>());
    for (const nlohmann::json& pair : doc.at("suffix_merges")) {
      if (!pair.is_array() || pair.size() != 2)
        throw ValidationError("suffix_merges entries must be [suffix, target] pairs");
      rules.suffix_merges.emplace_back(
          normalize_reference(pair[0].get<std::string>()),
          normalize_reference(pair[1].get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed rewrite rules: ") + e.what());
  }
  validate_rules(rules);
  return rules;
}

inline GoalRewriteRules load_rewrite_rules(const std::filesystem::path& path) {
  try {
    return parse_rewrite_rules(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("rules file " + path.string() + ": " + e.what());
  }
}

// Merge map and suffix rules applied to one goal. Suffix rules match whole
// trailing words only, so "prevent" is not an "event" match, and a goal that
// already equals the target is left alone.
inline std::string rewrite_goal(const std::string& goal,
                                const GoalRewriteRules& rules) {
  std::string out = goal;
  auto merged = rules.merges.find(out);
  if (merged != rules.merges.end()) out = merged->second;
  for (const auto& [suffix, target] : rules.suffix_merges) {
    if (out == target) continue;
    if (out == suffix ||
        (out.size() > suffix.size() + 1 &&
         out.compare(out.size() - suffix.size() - 1, suffix.size() + 1,
                     " " + suffix) == 0)) {
      out = target;
      break;
    }
  }
  return out;
}

// Rewrites every instance's goal, drops removal-listed goals, and unions the
// reference sets of instances that collide on (doc, goal) after rewriting.
// A collided instance is relevant if any of its sources were.
inline std::vector<GoalInstance> apply_rewrite_rules(
    const std::vector<GoalInstance>& instances, const GoalRewriteRules& rules) {
  validate_rules(rules);
  std::vector<GoalInstance> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const GoalInstance& inst : instances) {
    std::string goal = rewrite_goal(inst.goal, rules);
    if (rules.removals.count(goal)) continue;
    auto key = std::make_pair(inst.doc_id, goal);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.size());
      GoalInstance rewritten = inst;
      rewritten.goal = goal;
      out.push_back(std::move(rewritten));
      continue;
    }
    GoalInstance& merged = out[it->second];
    for (const std::string& ref : inst.references)
      if (std::find(merged.references.begin(), merged.references.end(), ref) ==
          merged.references.end())
        merged.references.push_back(ref);
    if (inst.relevance == Relevance::relevant)
      merged.relevance = Relevance::relevant;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Irrelevant-goal sampling
// ---------------------------------------------------------------------------

struct GoalPool {
  std::set<std::string> goals;
  std::map<std::string, std::int64_t> relevant_freq;
  std::map<std::string, std::int64_t> irrelevant_freq;
};

struct NegativeSamplingConfig {
  double dissimilar_fraction_d = 50.0;  // percentage in (0, 100]
  std::uint64_t rng_seed = 0;
};

inline GoalPool build_goal_pool(const Dataset& dataset) {
  GoalPool pool;
  for (const DatasetRecord& rec : dataset) {
    for (const GoalInstance& inst : rec.goals) {
      pool.goals.insert(inst.goal);
      if (inst.relevance == Relevance::relevant)
        pool.relevant_freq[inst.goal] += 1;
      else
        pool.irrelevant_freq[inst.goal] += 1;
    }
  }
  return pool;
}

struct NegativeSampleResult {
  std::vector<std::string> goals;
  // fallback_flags[i] is true when goals[i] was drawn with the
  // frequency-match constraint dropped; fallback_anchors names the anchor
  // goal of each such draw, in draw order.
  std::vector<bool> fallback_flags;
  std::vector<std::string> fallback_anchors;
};

namespace detail {

// The ⌈d/100 · |pool|⌉ pool goals least similar to the anchor, most
// dissimilar first, similarity ties broken by lexicographic goal order.
inline std::vector<std::string> dissimilar_candidates(
    const std::vector<std::string>& pool_goals,
    const std::vector<double>& similarities, double d) {
  std::vector<std::size_t> order(pool_goals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (similarities[a] != similarities[b])
      return similarities[a] < similarities[b];
    return pool_goals[a] < pool_goals[b];
  });
  auto cutoff = static_cast<std::size_t>(
      std::ceil(d / 100.0 * static_cast<double>(pool_goals.size())));
  if (cutoff > order.size()) cutoff = order.size();
  std::vector<std::string> out;
  out.reserve(cutoff);
  for (std::size_t i = 0; i < cutoff; ++i) out.push_back(pool_goals[order[i]]);
  return out;
}

// Weighted pick over candidates in their given order; all-zero weights fall
// back to uniform. Uses raw engine draws with modulo so the choice depends
// only on the standardized mt19937_64 sequence.
inline std::size_t weighted_pick(const std::vector<std::int64_t>& weights,
                                 std::mt19937_64& rng) {
  std::int64_t total = 0;
  for (std::int64_t w : weights) total += w;
  if (total <= 0) return static_cast<std::size_t>(rng() % weights.size());
  auto r = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(total));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    r -= weights[i];
    if (r < 0) return i;
  }
  return weights.size() - 1;
}

}  // namespace detail

// Draws n irrelevant goals for a document per the d%-dissimilarity scheme:
// anchors rotate round-robin, each draw prefers candidates whose irrelevant
// count is still below their relevant count (weighted by relevant count) and
// falls back to the full candidate set when none qualify.
inline NegativeSampleResult sample_irrelevant_goals_detailed(
    const std::vector<std::string>& doc_goals, const GoalPool& pool,
    const SimilarityBackend& backend, const NegativeSamplingConfig& cfg,
    std::size_t n) {
  if (doc_goals.empty())
    throw ValidationError("negative sampling requires at least one anchor goal");
  if (pool.goals.empty()) throw ValidationError("goal pool is empty");
  if (n < 1) throw ValidationError("sample count must be >= 1");
  if (cfg.dissimilar_fraction_d <= 0.0 || cfg.dissimilar_fraction_d > 100.0)
    throw ValidationError("dissimilar fraction d must be in (0,100]");

  std::set<std::string> excluded(doc_goals.begin(), doc_goals.end());
  std::vector<std::string> pool_goals(pool.goals.begin(), pool.goals.end());
  std::size_t available = 0;
  for (const std::string& g : pool_goals)
    if (!excluded.count(g)) ++available;
  if (available < n)
    throw ValidationError("pool has only " + std::to_string(available) +
                          " goals outside the document's own; cannot sample " +
                          std::to_string(n));

  std::vector<std::vector<double>> sim =
      backend.similarity_matrix(doc_goals, pool_goals);
  std::vector<std::vector<std::string>> candidates;
  candidates.reserve(doc_goals.size());
  for (std::size_t a = 0; a < doc_goals.size(); ++a)
    candidates.push_back(detail::dissimilar_candidates(
        pool_goals, sim[a], cfg.dissimilar_fraction_d));

  std::mt19937_64 rng(cfg.rng_seed);
  std::map<std::string, std::int64_t> irrelevant = pool.irrelevant_freq;
  auto relevant_of = [&](const std::string& g) {
    auto it = pool.relevant_freq.find(g);
    return it == pool.relevant_freq.end() ? std::int64_t{0} : it->second;
  };
  auto irrelevant_of = [&](const std::string& g) {
    auto it = irrelevant.find(g);
    return it == irrelevant.end() ? std::int64_t{0} : it->second;
  };

  NegativeSampleResult result;
  std::set<std::string> picked;
  std::size_t stale_anchors = 0;
  for (std::size_t a = 0; result.goals.size() < n;
       a = (a + 1) % doc_goals.size()) {
    if (stale_anchors >= doc_goals.size())
      throw ValidationError(
          "candidate sets exhausted before collecting " + std::to_string(n) +
          " negatives; enlarge the pool or raise d");
    std::vector<std::string> open;
    for (const std::string& g : candidates[a])
      if (!excluded.count(g) && !picked.count(g)) open.push_back(g);
    if (open.empty()) {
      ++stale_anchors;
      continue;
    }
    std::vector<std::string> eligible;
    for (const std::string& g : open)
      if (irrelevant_of(g) < relevant_of(g)) eligible.push_back(g);
    bool fallback = eligible.empty();
    const std::vector<std::string>& draw_from = fallback ? open : eligible;
    std::vector<std::int64_t> weights;
    weights.reserve(draw_from.size());
    for (const std::string& g : draw_from) weights.push_back(relevant_of(g));
    const std::string& choice = draw_from[detail::weighted_pick(weights, rng)];
    if (fallback) result.fallback_anchors.push_back(doc_goals[a]);
    result.fallback_flags.push_back(fallback);
    result.goals.push_back(choice);
    picked.insert(choice);
    irrelevant[choice] += 1;
    stale_anchors = 0;
  }
  return result;
}

inline std::vector<std::string> sample_irrelevant_goals(
    const std::vector<std::string>& doc_goals, const GoalPool& pool,
    const SimilarityBackend& backend, const NegativeSamplingConfig& cfg,
    std::size_t n) {
  return sample_irrelevant_goals_detailed(doc_goals, pool, backend, cfg, n)
      .goals;
}

// Batch bookkeeping once a document's negatives are accepted.
inline void record_irrelevant(GoalPool& pool,
                              const std::vector<std::string>& goals) {
  for (const std::string& g : goals) {
    pool.goals.insert(g);
    pool.irrelevant_freq[g] += 1;
  }
}

}  // namespace goalkp
