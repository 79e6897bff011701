#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "goalkp/errors.hpp"
#include "goalkp/similarity.hpp"

namespace goalkp {

// Parses {"embeddings": [[...], ...]} and enforces the batch size and, when
// expected_dim > 0, the vector width.
inline std::vector<std::vector<double>> parse_embedding_body(
    const std::string& body, std::size_t expected_count,
    std::size_t expected_dim) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed embedding response: ") + e.what(),
                     body);
  }
  if (!doc.contains("embeddings") || !doc["embeddings"].is_array())
    throw ParseError("embedding response lacks an \"embeddings\" array", body);
  std::vector<std::vector<double>> out;
  out.reserve(doc["embeddings"].size());
  for (const nlohmann::json& row : doc["embeddings"]) {
    if (!row.is_array())
      throw ParseError("embedding row is not an array", body);
    std::vector<double> vec;
    vec.reserve(row.size());
    for (const nlohmann::json& v : row) vec.push_back(v.get<double>());
    if (expected_dim > 0 && vec.size() != expected_dim)
      throw ParseError("embedding dimension " + std::to_string(vec.size()) +
                           " does not match configured " +
                           std::to_string(expected_dim),
                       body);
    out.push_back(std::move(vec));
  }
  if (out.size() != expected_count)
    throw ParseError("embedding count " + std::to_string(out.size()) +
                         " does not match batch size " +
                         std::to_string(expected_count),
                     body);
  return out;
}

// Embedding backend that posts phrase batches to an HTTP service. The wire
// format is {"texts": [...]} in, {"embeddings": [[...], ...]} out, one
// vector per text in order. Vectors are re-normalized locally so cosine
// reduces to a dot product regardless of what the service returns.
class EndpointBackend : public SimilarityBackend {
public:
  EndpointBackend(std::string base_url, std::string path = "/embed",
                  std::size_t expected_dim = 0)
      : base_url_(std::move(base_url)),
        path_(std::move(path)),
        expected_dim_(expected_dim) {
    if (base_url_.empty())
      throw ValidationError("embedding endpoint URL must not be empty");
  }

  std::string name() const override { return "endpoint"; }

  std::vector<std::vector<double>> embed(
      const std::vector<std::string>& phrases) const override {
    if (phrases.empty()) return {};
    nlohmann::json body = {{"texts", phrases}};
    httplib::Client client(base_url_);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    httplib::Result result =
        client.Post(path_, body.dump(), "application/json");
    if (!result)
      throw TransportError(
          "embedding endpoint unreachable: " + httplib::to_string(result.error()),
          0);
    if (result->status != 200)
      throw TransportError("embedding endpoint returned status " +
                               std::to_string(result->status) + ": " +
                               result->body,
                           result->status);
    auto vectors =
        parse_embedding_body(result->body, phrases.size(), expected_dim_);
    for (std::vector<double>& vec : vectors) normalize(vec);
    return vectors;
  }

private:
  static void normalize(std::vector<double>& vec) {
    double norm = 0.0;
    for (double v : vec) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& v : vec) v /= norm;
  }

  std::string base_url_;
  std::string path_;
  std::size_t expected_dim_;
};

}  // namespace goalkp
