#pragma once

// Independent reference implementations used to cross-check the library.
// These are written directly from the defining formulas and share no code
// with the headers under include/goalkp.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "goalkp/similarity.hpp"

namespace oracle {

// Direct evaluation of the saliency formula: for each distinct phrase,
// freq = |{i : p in s_i}|, rank(s_i, p) = 1-based position or 0 if absent,
// score = (freq / K) * (freq / sum of ranks).
inline std::map<std::string, double> saliency_scores(
    const std::vector<std::vector<std::string>>& samples, int k) {
  std::map<std::string, double> out;
  std::map<std::string, int> freq;
  std::map<std::string, long long> rank_sum;
  for (const auto& sample : samples) {
    for (std::size_t pos = 0; pos < sample.size(); ++pos) {
      freq[sample[pos]] += 1;
      rank_sum[sample[pos]] += static_cast<long long>(pos) + 1;
    }
  }
  for (const auto& [phrase, f] : freq) {
    double fd = static_cast<double>(f);
    out[phrase] = (fd / k) * (fd / static_cast<double>(rank_sum[phrase]));
  }
  return out;
}

// Mean-of-max precision/recall SemF1 evaluated pair by pair.
inline double sem_f1(const std::vector<std::string>& references,
                     const std::vector<std::string>& predictions,
                     const goalkp::SimilarityBackend& backend) {
  if (predictions.empty()) return 0.0;
  double precision = 0.0;
  for (const std::string& p : predictions) {
    double best = 0.0;
    for (const std::string& r : references)
      best = std::max(best, backend.similarity(p, r));
    precision += best;
  }
  precision /= static_cast<double>(predictions.size());
  double recall = 0.0;
  for (const std::string& r : references) {
    double best = 0.0;
    for (const std::string& p : predictions)
      best = std::max(best, backend.similarity(p, r));
    recall += best;
  }
  recall /= static_cast<double>(references.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

// F1 of abstention precision and recall from raw counts.
inline double abstain_f1(long long true_abstain, long long false_abstain,
                         long long missed_abstain) {
  if (true_abstain == 0) return 0.0;
  double ta = static_cast<double>(true_abstain);
  double p = ta / static_cast<double>(true_abstain + false_abstain);
  double r = ta / static_cast<double>(true_abstain + missed_abstain);
  return 2.0 * p * r / (p + r);
}

// All ordered lists of up to max_len distinct phrases from the alphabet.
inline std::vector<std::vector<std::string>> distinct_ordered_lists(
    const std::vector<std::string>& alphabet, std::size_t max_len) {
  std::vector<std::vector<std::string>> out{{}};
  std::vector<std::vector<std::string>> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& prefix : frontier) {
      for (const std::string& p : alphabet) {
        if (std::find(prefix.begin(), prefix.end(), p) != prefix.end())
          continue;
        auto extended = prefix;
        extended.push_back(p);
        out.push_back(extended);
        next.push_back(std::move(extended));
      }
    }
    frontier = std::move(next);
  }
  return out;
}

}  // namespace oracle
