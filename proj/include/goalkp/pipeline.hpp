#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "goalkp/config.hpp"
#include "goalkp/consistency.hpp"
#include "goalkp/corpus.hpp"
#include "goalkp/errors.hpp"
#include "goalkp/events.hpp"
#include "goalkp/goals.hpp"
#include "goalkp/jsonl.hpp"
#include "goalkp/metrics.hpp"
#include "goalkp/parallel.hpp"
#include "goalkp/similarity.hpp"

namespace goalkp {

namespace detail {

// Stable per-document seed derived from the run seed, so output does not
// depend on processing order.
inline std::uint64_t mix_seed(std::uint64_t base, const std::string& id) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h ^ base;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

inline std::string stats_table(const DatasetStats& stats) {
  std::string out = "metric\tvalue\n";
  out += "num_docs\t" + std::to_string(stats.num_docs) + "\n";
  out += "num_instances\t" + std::to_string(stats.num_instances) + "\n";
  out += "num_unique_goals\t" + std::to_string(stats.num_unique_goals) + "\n";
  out += "mean_goal_words\t" + format_metric(stats.mean_goal_words) + "\n";
  out += "mean_kp_per_goal\t" + format_metric(stats.mean_kp_per_goal) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// judge / generate
// ---------------------------------------------------------------------------

// Relevance judgment for every goal instance; no generation.
inline std::vector<PredictionRecord> run_judge(const Dataset& dataset,
                                               const RunConfig& cfg,
                                               const ResponseCache& cache,
                                               ChatTransport& transport,
                                               const RetryPolicy& retry = {}) {
  struct Task {
    const Document* doc;
    const GoalInstance* inst;
  };
  std::vector<Task> tasks;
  for (const DatasetRecord& rec : dataset)
    for (const GoalInstance& inst : rec.goals) tasks.push_back({&rec.doc, &inst});
  std::vector<PredictionRecord> out(tasks.size());
  parallel_for(tasks.size(), static_cast<std::size_t>(cfg.concurrency_limit),
               [&](std::size_t i) {
                 PredictionRecord& rec = out[i];
                 rec.doc_id = tasks[i].inst->doc_id;
                 rec.goal = tasks[i].inst->goal;
                 rec.judged_relevant =
                     judge_relevance(*tasks[i].doc, tasks[i].inst->goal,
                                     cfg.sampling(), cache, transport, retry);
               });
  return out;
}

// Two-step pipeline per instance: judge first, then self-consistency
// generation only for goals judged relevant.
inline std::vector<PredictionRecord> run_generate(const Dataset& dataset,
                                                  const RunConfig& cfg,
                                                  const ResponseCache& cache,
                                                  ChatTransport& transport,
                                                  const RetryPolicy& retry = {}) {
  struct Task {
    const Document* doc;
    const GoalInstance* inst;
  };
  std::vector<Task> tasks;
  for (const DatasetRecord& rec : dataset)
    for (const GoalInstance& inst : rec.goals) tasks.push_back({&rec.doc, &inst});
  std::vector<PredictionRecord> out(tasks.size());
  parallel_for(
      tasks.size(), static_cast<std::size_t>(cfg.concurrency_limit),
      [&](std::size_t i) {
        PredictionRecord& rec = out[i];
        rec.doc_id = tasks[i].inst->doc_id;
        rec.goal = tasks[i].inst->goal;
        rec.judged_relevant =
            judge_relevance(*tasks[i].doc, tasks[i].inst->goal, cfg.sampling(),
                            cache, transport, retry);
        if (!rec.judged_relevant) return;
        GenerationResult gen = generate_scored(
            *tasks[i].doc, tasks[i].inst->goal, cfg.sampling(), cfg.tau_filter,
            cache, transport, retry, cfg.generation_token_budget);
        rec.phrases = std::move(gen.scored);
        rec.kept = std::move(gen.kept);
      });
  return out;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOutputs {
  std::filesystem::path report_tsv;
  std::filesystem::path per_goal_jsonl;
};

inline EvalOutputs write_eval_outputs(const EvalReport& report,
                                      const std::string& dataset_name,
                                      const std::string& model_name,
                                      const std::filesystem::path& out_dir) {
  EvalOutputs paths{out_dir / "report.tsv", out_dir / "per_goal.jsonl"};
  atomic_write_file(paths.report_tsv,
                    report_tsv(report, dataset_name, model_name));
  atomic_write_file(paths.per_goal_jsonl, serialize_per_goal(report));
  return paths;
}

// ---------------------------------------------------------------------------
// sample-negatives
// ---------------------------------------------------------------------------

struct NegativeAugmentation {
  Dataset dataset;
  // (doc id, anchor goal) pairs where the frequency-match constraint had to
  // be dropped.
  std::vector<std::pair<std::string, std::string>> fallback_log;
};

// Adds negatives_per_doc sampled irrelevant goals to every document that has
// at least one relevant goal, updating pool frequencies as it goes so the
// frequency-match constraint holds across the whole batch.
inline NegativeAugmentation run_sample_negatives(const Dataset& dataset,
                                                 const SimilarityBackend& backend,
                                                 const RunConfig& cfg) {
  NegativeAugmentation out;
  out.dataset = dataset;
  GoalPool pool = build_goal_pool(dataset);
  for (DatasetRecord& rec : out.dataset) {
    std::vector<std::string> anchors;
    std::vector<std::string> associated;
    for (const GoalInstance& inst : rec.goals) {
      associated.push_back(inst.goal);
      if (inst.relevance == Relevance::relevant) anchors.push_back(inst.goal);
    }
    if (anchors.empty()) continue;
    NegativeSamplingConfig ncfg;
    ncfg.dissimilar_fraction_d = cfg.dissimilar_fraction_d;
    ncfg.rng_seed = detail::mix_seed(cfg.rng_seed, rec.doc.id);
    NegativeSampleResult sample = sample_irrelevant_goals_detailed(
        associated, pool, backend, ncfg,
        static_cast<std::size_t>(cfg.negatives_per_doc));
    for (const std::string& anchor : sample.fallback_anchors)
      out.fallback_log.emplace_back(rec.doc.id, anchor);
    for (const std::string& goal : sample.goals)
      rec.goals.push_back(
          make_goal_instance(rec.doc.id, goal, {}, Relevance::irrelevant));
    record_irrelevant(pool, sample.goals);
  }
  return out;
}

// ---------------------------------------------------------------------------
// export-train
// ---------------------------------------------------------------------------

inline std::string serialize_train_sequences(
    const std::vector<TrainSequence>& sequences) {
  std::string out;
  for (const TrainSequence& seq : sequences) {
    nlohmann::json obj = {{"input", seq.input}, {"target", seq.target}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// benchgen
// ---------------------------------------------------------------------------

// Raw input to the annotation pipeline: a document plus its reference
// keyphrases, before any goal exists.
struct RawKeyphraseDoc {
  Document doc;
  std::vector<std::string> keyphrases;
};

inline std::vector<RawKeyphraseDoc> load_raw_keyphrase_docs(
    const std::filesystem::path& path) {
  std::vector<RawKeyphraseDoc> out;
  std::set<std::string> seen_ids;
  for_each_jsonl_line(path, [&](std::size_t line_no, const nlohmann::json& obj) {
    auto fail = [&](const std::string& msg) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": " + msg);
    };
    try {
      RawKeyphraseDoc raw;
      raw.doc.id = obj.at("id").get<std::string>();
      raw.doc.title = obj.value("title", std::string{});
      raw.doc.body = obj.at("body").get<std::string>();
      raw.doc.source = source_from_string(obj.value("source", "custom"));
      raw.doc.split = split_from_string(obj.value("split", "train"));
      for (const nlohmann::json& kp : obj.at("keyphrases"))
        raw.keyphrases.push_back(kp.get<std::string>());
      if (raw.doc.id.empty()) fail("empty document id");
      if (!seen_ids.insert(raw.doc.id).second)
        fail("duplicate document id " + raw.doc.id);
      if (raw.keyphrases.empty()) fail("document has no keyphrases");
      for (const std::string& kp : raw.keyphrases) {
        if (trim(kp).empty()) fail("empty keyphrase");
        if (kp.find(';') != std::string::npos ||
            kp.find(kEogToken) != std::string::npos)
          fail("keyphrase contains a reserved separator: " + kp);
      }
      out.push_back(std::move(raw));
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("malformed raw record: ") + e.what());
    }
  });
  return out;
}

// Annotation pipeline: propose goals per document, refine them in the same
// conversation, apply the rewrite rules, and assemble a labeled dataset in
// which every surviving goal is relevant.
inline Dataset run_benchgen(const std::vector<RawKeyphraseDoc>& raw_docs,
                            const GoalRewriteRules& rules, const RunConfig& cfg,
                            const ResponseCache& cache, ChatTransport& transport,
                            const RetryPolicy& retry = {}) {
  std::vector<GoalMapping> refined(raw_docs.size());
  parallel_for(raw_docs.size(),
               static_cast<std::size_t>(cfg.concurrency_limit),
               [&](std::size_t i) {
                 GoalMapping proposal =
                     propose_goals(raw_docs[i].doc, raw_docs[i].keyphrases,
                                   cfg.model_name, cache, transport, retry);
                 refined[i] = refine_goals(proposal, raw_docs[i].keyphrases,
                                           cfg.model_name, cache, transport,
                                           retry);
               });
  Dataset dataset;
  for (std::size_t i = 0; i < raw_docs.size(); ++i) {
    DatasetRecord rec;
    rec.doc = raw_docs[i].doc;
    std::vector<GoalInstance> instances;
    for (const auto& [goal, keyphrases] : refined[i].by_goal)
      instances.push_back(make_goal_instance(rec.doc.id, goal, keyphrases,
                                             Relevance::relevant));
    rec.goals = apply_rewrite_rules(instances, rules);
    if (!rec.goals.empty()) dataset.push_back(std::move(rec));
  }
  return dataset;
}

// ---------------------------------------------------------------------------
// events
// ---------------------------------------------------------------------------

// Precomputed judgments: one JSONL object {post_id, goal, relevant} per pair.
inline std::map<std::pair<std::string, std::string>, bool> load_judgments(
    const std::filesystem::path& path) {
  std::map<std::pair<std::string, std::string>, bool> out;
  for_each_jsonl_line(path, [&](std::size_t line_no, const nlohmann::json& obj) {
    try {
      out[{obj.at("post_id").get<std::string>(),
           obj.at("goal").get<std::string>()}] =
          obj.at("relevant").get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed judgment record: " + e.what());
    }
  });
  return out;
}

inline RelevanceJudge make_file_judge(
    std::map<std::pair<std::string, std::string>, bool> judgments) {
  return [judgments = std::move(judgments)](const TimestampedPost& post,
                                            const std::string& goal) {
    auto it = judgments.find({post.id, goal});
    if (it == judgments.end())
      throw ValidationError("no judgment on file for post " + post.id +
                            ", goal \"" + goal + "\"");
    return it->second;
  };
}

inline RelevanceJudge make_llm_judge(const RunConfig& cfg,
                                     const ResponseCache& cache,
                                     ChatTransport& transport,
                                     const RetryPolicy& retry = {}) {
  return [&cfg, &cache, &transport, retry](const TimestampedPost& post,
                                           const std::string& goal) {
    Document doc{post.id, "", post.text, Source::custom, Split::test};
    return judge_relevance(doc, goal, cfg.sampling(), cache, transport, retry);
  };
}

}  // namespace goalkp
