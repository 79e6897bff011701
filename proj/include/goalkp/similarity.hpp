#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "goalkp/errors.hpp"

namespace goalkp {

// Phrase-similarity contract used by the evaluator and by negative sampling.
// embed() returns unit-norm vectors; similarity is the cosine of the two
// embeddings clamped to [0, 1], with similarity(x, x) = 1 for non-empty x.
class SimilarityBackend {
public:
  virtual ~SimilarityBackend() = default;

  virtual std::string name() const = 0;

  virtual std::vector<std::vector<double>> embed(
      const std::vector<std::string>& phrases) const = 0;

  virtual double similarity(const std::string& a, const std::string& b) const {
    auto vecs = embed({a, b});
    return clamp01(dot(vecs[0], vecs[1]));
  }

  // rows[i][j] = similarity(rows_phrases[i], col_phrases[j]). The default
  // embeds each side once; backends with an exact pairwise form override it.
  virtual std::vector<std::vector<double>> similarity_matrix(
      const std::vector<std::string>& row_phrases,
      const std::vector<std::string>& col_phrases) const {
    auto row_vecs = embed(row_phrases);
    auto col_vecs = embed(col_phrases);
    std::vector<std::vector<double>> out(row_phrases.size(),
                                         std::vector<double>(col_phrases.size()));
    for (std::size_t i = 0; i < row_vecs.size(); ++i)
      for (std::size_t j = 0; j < col_vecs.size(); ++j)
        out[i][j] = clamp01(dot(row_vecs[i], col_vecs[j]));
    return out;
  }

protected:
  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  }

  static double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }
};

// Offline fallback: cosine over bags of character trigrams. Strings are
// padded with boundary markers so every non-empty string has at least one
// trigram. similarity() computes the exact sparse cosine; embed() projects
// the bag onto a fixed hashed dimension for batch callers.
class TrigramBackend : public SimilarityBackend {
public:
  static constexpr std::size_t kHashedDim = 4096;

  std::string name() const override { return "trigram-fallback"; }

  std::vector<std::vector<double>> embed(
      const std::vector<std::string>& phrases) const override {
    std::vector<std::vector<double>> out;
    out.reserve(phrases.size());
    for (const std::string& p : phrases) {
      std::vector<double> v(kHashedDim, 0.0);
      for (const auto& [gram, count] : trigram_bag(p))
        v[fnv1a(gram) % kHashedDim] += static_cast<double>(count);
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (double& x : v) x /= norm;
      out.push_back(std::move(v));
    }
    return out;
  }

  double similarity(const std::string& a, const std::string& b) const override {
    if (a == b) return a.empty() ? 0.0 : 1.0;
    return clamp01(sparse_cosine(trigram_bag(a), trigram_bag(b)));
  }

  std::vector<std::vector<double>> similarity_matrix(
      const std::vector<std::string>& row_phrases,
      const std::vector<std::string>& col_phrases) const override {
    std::vector<std::map<std::string, int>> rows, cols;
    rows.reserve(row_phrases.size());
    cols.reserve(col_phrases.size());
    for (const auto& p : row_phrases) rows.push_back(trigram_bag(p));
    for (const auto& p : col_phrases) cols.push_back(trigram_bag(p));
    std::vector<std::vector<double>> out(row_phrases.size(),
                                         std::vector<double>(col_phrases.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j)
        out[i][j] = (row_phrases[i] == col_phrases[j] && !row_phrases[i].empty())
                        ? 1.0
                        : clamp01(sparse_cosine(rows[i], cols[j]));
    return out;
  }

private:
  static std::map<std::string, int> trigram_bag(const std::string& s) {
    std::map<std::string, int> bag;
    if (s.empty()) return bag;
    std::string padded;
    padded.reserve(s.size() + 2);
    padded.push_back('\x01');
    padded += s;
    padded.push_back('\x02');
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i)
      ++bag[padded.substr(i, 3)];
    return bag;
  }

  static double sparse_cosine(const std::map<std::string, int>& a,
                              const std::map<std::string, int>& b) {
    if (a.empty() || b.empty()) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [gram, c] : a) {
      na += static_cast<double>(c) * c;
      auto it = b.find(gram);
      if (it != b.end()) dot += static_cast<double>(c) * it->second;
    }
    for (const auto& [gram, c] : b) nb += static_cast<double>(c) * c;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  }

  static std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }
};

// Test backend: 1 when the strings are equal, 0 otherwise.
class ExactMatchBackend : public SimilarityBackend {
public:
  std::string name() const override { return "exact-match"; }

  std::vector<std::vector<double>> embed(
      const std::vector<std::string>& phrases) const override {
    // One-hot over the batch's distinct strings.
    std::map<std::string, std::size_t> index;
    for (const std::string& p : phrases)
      index.emplace(p, index.size());
    std::vector<std::vector<double>> out;
    out.reserve(phrases.size());
    for (const std::string& p : phrases) {
      std::vector<double> v(index.size(), 0.0);
      v[index.at(p)] = 1.0;
      out.push_back(std::move(v));
    }
    return out;
  }

  double similarity(const std::string& a, const std::string& b) const override {
    return (!a.empty() && a == b) ? 1.0 : 0.0;
  }

  std::vector<std::vector<double>> similarity_matrix(
      const std::vector<std::string>& row_phrases,
      const std::vector<std::string>& col_phrases) const override {
    std::vector<std::vector<double>> out(row_phrases.size(),
                                         std::vector<double>(col_phrases.size()));
    for (std::size_t i = 0; i < row_phrases.size(); ++i)
      for (std::size_t j = 0; j < col_phrases.size(); ++j)
        out[i][j] = similarity(row_phrases[i], col_phrases[j]);
    return out;
  }
};

}  // namespace goalkp
