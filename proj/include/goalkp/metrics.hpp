#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "goalkp/consistency.hpp"
#include "goalkp/corpus.hpp"
#include "goalkp/errors.hpp"
#include "goalkp/similarity.hpp"

namespace goalkp {

struct AbstainConfusion {
  std::int64_t true_abstain = 0;    // abstained on an irrelevant goal
  std::int64_t false_abstain = 0;   // abstained on a relevant goal
  std::int64_t missed_abstain = 0;  // answered an irrelevant goal
};

struct PerGoalScore {
  std::string doc_id;
  std::string goal;
  double semf1 = 0.0;
};

struct EvalReport {
  std::vector<PerGoalScore> per_goal;  // relevant instances only
  double mean_semf1 = 0.0;
  double satisfaction_rate = 0.0;
  double sr_threshold = 0.6;
  double abstain_f1 = 0.0;
  AbstainConfusion confusion;
  std::size_t n_relevant = 0;
  std::size_t n_irrelevant = 0;
};

namespace detail {

inline std::vector<std::string> dedupe_keep_order(
    const std::vector<std::string>& phrases) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const std::string& p : phrases)
    if (seen.insert(p).second) out.push_back(p);
  return out;
}

inline double harmonic_mean(double p, double r) {
  return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace detail

// Semantic F1 between a prediction set and a reference set: precision is the
// mean over predictions of the best similarity to any reference, recall the
// mean over references of the best similarity to any prediction.
inline double sem_f1(const std::vector<std::string>& references,
                     const std::vector<std::string>& predictions,
                     const SimilarityBackend& backend) {
  std::vector<std::string> refs = detail::dedupe_keep_order(references);
  std::vector<std::string> preds = detail::dedupe_keep_order(predictions);
  if (refs.empty())
    throw ValidationError("sem_f1 requires a non-empty reference set");
  if (preds.empty()) return 0.0;
  std::vector<std::vector<double>> sim = backend.similarity_matrix(preds, refs);
  double precision = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    precision += *std::max_element(sim[i].begin(), sim[i].end());
  precision /= static_cast<double>(preds.size());
  double recall = 0.0;
  for (std::size_t j = 0; j < refs.size(); ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) best = std::max(best, sim[i][j]);
    recall += best;
  }
  recall /= static_cast<double>(refs.size());
  return detail::harmonic_mean(precision, recall);
}

// Fraction of per-goal scores exceeding the threshold. The comparison is
// strict; pass strict=false to count ties as satisfied.
inline double satisfaction_rate(const std::vector<double>& per_goal_semf1,
                                double threshold, bool strict = true) {
  if (threshold < 0.0 || threshold > 1.0)
    throw ValidationError("satisfaction threshold must be in [0,1]");
  if (per_goal_semf1.empty())
    throw ValidationError("satisfaction rate over an empty score list");
  std::size_t satisfied = 0;
  for (double s : per_goal_semf1)
    if (strict ? s > threshold : s >= threshold) ++satisfied;
  return static_cast<double>(satisfied) /
         static_cast<double>(per_goal_semf1.size());
}

// Harmonic mean of abstention precision TA/(TA+FA) and recall TA/(TA+MA),
// defined as 0 when the model never abstained correctly.
inline double abstain_f1(const AbstainConfusion& c) {
  if (c.true_abstain < 0 || c.false_abstain < 0 || c.missed_abstain < 0)
    throw ValidationError("abstention counts must be non-negative");
  if (c.true_abstain == 0 && c.false_abstain == 0 && c.missed_abstain == 0)
    throw ValidationError("abstain F1 undefined: no abstention decisions counted");
  if (c.true_abstain == 0) return 0.0;
  double ta = static_cast<double>(c.true_abstain);
  double precision = ta / static_cast<double>(c.true_abstain + c.false_abstain);
  double recall = ta / static_cast<double>(c.true_abstain + c.missed_abstain);
  return detail::harmonic_mean(precision, recall);
}

// What counts as an abstention when scoring predictions: the judgment bit
// alone, or the judgment bit plus an empty kept list.
enum class AbstainSignal { judgment_only, judgment_or_empty };

inline bool prediction_abstained(const PredictionRecord& rec,
                                 AbstainSignal signal) {
  if (!rec.judged_relevant) return true;
  return signal == AbstainSignal::judgment_or_empty && rec.kept.empty();
}

// Scores a prediction run against labeled data. SemF1 and SR cover relevant
// instances only (abstentions on them score 0); the abstention confusion
// covers every instance with a prediction record.
inline EvalReport evaluate_run(const std::vector<PredictionRecord>& predictions,
                               const Dataset& dataset,
                               const SimilarityBackend& backend,
                               double sr_threshold = 0.6,
                               AbstainSignal signal = AbstainSignal::judgment_or_empty) {
  std::map<std::pair<std::string, std::string>, const PredictionRecord*> by_key;
  for (const PredictionRecord& rec : predictions) {
    auto [it, inserted] = by_key.emplace(std::make_pair(rec.doc_id, rec.goal),
                                         &rec);
    if (!inserted)
      throw ValidationError("duplicate prediction for doc " + rec.doc_id +
                            ", goal \"" + rec.goal + "\"");
  }

  EvalReport report;
  report.sr_threshold = sr_threshold;
  std::vector<std::string> missing;
  std::set<std::pair<std::string, std::string>> matched;

  for (const DatasetRecord& rec : dataset) {
    for (const GoalInstance& inst : rec.goals) {
      auto key = std::make_pair(inst.doc_id, inst.goal);
      auto it = by_key.find(key);
      if (it == by_key.end()) {
        if (inst.relevance == Relevance::relevant)
          missing.push_back(inst.doc_id + "/" + inst.goal);
        continue;
      }
      matched.insert(key);
      const PredictionRecord& pred = *it->second;
      bool abstained = prediction_abstained(pred, signal);
      if (inst.relevance == Relevance::relevant) {
        ++report.n_relevant;
        if (abstained) ++report.confusion.false_abstain;
        double score = pred.kept.empty()
                           ? 0.0
                           : sem_f1(inst.references, pred.kept, backend);
        report.per_goal.push_back({inst.doc_id, inst.goal, score});
      } else {
        ++report.n_irrelevant;
        if (abstained)
          ++report.confusion.true_abstain;
        else
          ++report.confusion.missed_abstain;
      }
    }
  }

  if (!missing.empty()) {
    std::string joined;
    for (const std::string& id : missing) {
      if (!joined.empty()) joined += ", ";
      joined += id;
    }
    throw ValidationError("missing predictions for relevant instances: " +
                          joined);
  }
  if (matched.size() != by_key.size()) {
    for (const auto& [key, rec] : by_key)
      if (!matched.count(key))
        throw ValidationError("prediction for unknown instance: " + key.first +
                              "/" + key.second);
  }
  if (report.per_goal.empty())
    throw ValidationError("no relevant goal instances to evaluate");
  if (report.n_irrelevant == 0)
    throw ValidationError("abstain F1 undefined: dataset has no irrelevant goals");

  double sum = 0.0;
  std::vector<double> scores;
  scores.reserve(report.per_goal.size());
  for (const PerGoalScore& s : report.per_goal) {
    sum += s.semf1;
    scores.push_back(s.semf1);
  }
  report.mean_semf1 = sum / static_cast<double>(report.per_goal.size());
  report.satisfaction_rate = satisfaction_rate(scores, sr_threshold);
  report.abstain_f1 = abstain_f1(report.confusion);
  return report;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

inline std::string report_tsv(const EvalReport& report,
                              const std::string& dataset_name,
                              const std::string& model_name) {
  std::string out =
      "dataset\tmodel\tmean_semf1\tsr\tabstain_f1\tn_relevant\tn_irrelevant\n";
  out += dataset_name + "\t" + model_name + "\t" +
         format_metric(report.mean_semf1) + "\t" +
         format_metric(report.satisfaction_rate) + "\t" +
         format_metric(report.abstain_f1) + "\t" +
         std::to_string(report.n_relevant) + "\t" +
         std::to_string(report.n_irrelevant) + "\n";
  return out;
}

inline std::string serialize_per_goal(const EvalReport& report) {
  std::string out;
  for (const PerGoalScore& s : report.per_goal) {
    nlohmann::json obj = {
        {"doc_id", s.doc_id}, {"goal", s.goal}, {"semf1", s.semf1}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

}  // namespace goalkp
