#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "goalkp/errors.hpp"
#include "goalkp/jsonl.hpp"
#include "goalkp/llm.hpp"

namespace goalkp {

enum class BackendKind { fallback, endpoint };

inline std::string to_string(BackendKind kind) {
  return kind == BackendKind::fallback ? "fallback" : "endpoint";
}

// Every tunable a run needs, with the published defaults. One file drives all
// subcommands; flags may override individual fields.
struct RunConfig {
  std::string dataset_path;
  std::string model_name = "gpt-4o";
  int num_samples_k = 10;
  double top_p = 0.95;
  double temperature = 0.7;
  int max_output_tokens = 30;
  double tau_filter = 0.3;
  double sr_threshold = 0.6;
  std::string cache_dir = "cache";
  std::uint64_t rng_seed = 0;
  int concurrency_limit = 4;
  BackendKind backend = BackendKind::fallback;
  std::string endpoint_url;       // embedding service, endpoint backend only
  std::size_t endpoint_dim = 0;   // 0 accepts any dimension
  double dissimilar_fraction_d = 50.0;
  int negatives_per_doc = 1;
  std::size_t generation_token_budget = kGenerationTokenBudget;

  SamplingConfig sampling() const {
    SamplingConfig cfg;
    cfg.num_samples_k = num_samples_k;
    cfg.top_p = top_p;
    cfg.temperature = temperature;
    cfg.max_output_tokens = max_output_tokens;
    cfg.model_name = model_name;
    return cfg;
  }
};

// Collects every violation instead of stopping at the first, so a bad config
// is fixable in one edit.
inline std::vector<std::string> config_violations(const RunConfig& cfg) {
  std::vector<std::string> v;
  if (cfg.model_name.empty()) v.push_back("model_name: must not be empty");
  if (cfg.num_samples_k < 1) v.push_back("num_samples_k: must be >= 1");
  if (cfg.top_p <= 0.0 || cfg.top_p > 1.0) v.push_back("top_p: must be in (0,1]");
  if (cfg.temperature < 0.0) v.push_back("temperature: must be >= 0");
  if (cfg.max_output_tokens < 1)
    v.push_back("max_output_tokens: must be >= 1");
  if (cfg.tau_filter < 0.0 || cfg.tau_filter > 1.0)
    v.push_back("tau_filter: must be in [0,1]");
  if (cfg.sr_threshold < 0.0 || cfg.sr_threshold > 1.0)
    v.push_back("sr_threshold: must be in [0,1]");
  if (cfg.concurrency_limit < 1)
    v.push_back("concurrency_limit: must be >= 1");
  if (cfg.backend == BackendKind::endpoint && cfg.endpoint_url.empty())
    v.push_back("endpoint_url: required when backend is \"endpoint\"");
  if (cfg.dissimilar_fraction_d <= 0.0 || cfg.dissimilar_fraction_d > 100.0)
    v.push_back("dissimilar_fraction_d: must be in (0,100]");
  if (cfg.negatives_per_doc < 1)
    v.push_back("negatives_per_doc: must be >= 1");
  if (cfg.generation_token_budget < 1)
    v.push_back("generation_token_budget: must be >= 1");
  return v;
}

inline void validate_config(const RunConfig& cfg) {
  std::vector<std::string> v = config_violations(cfg);
  if (v.empty()) return;
  std::string joined = "invalid config:";
  for (const std::string& msg : v) joined += "\n  " + msg;
  throw ValidationError(joined);
}

inline RunConfig parse_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> known = {
      "dataset_path",     "model_name",        "num_samples_k",
      "top_p",            "temperature",       "max_output_tokens",
      "tau_filter",       "sr_threshold",      "cache_dir",
      "rng_seed",         "concurrency_limit", "backend",
      "endpoint_url",     "endpoint_dim",      "dissimilar_fraction_d",
      "negatives_per_doc", "generation_token_budget"};
  std::vector<std::string> problems;
  for (const auto& [key, value] : doc.items())
    if (!known.count(key)) problems.push_back(key + ": unknown field");

  RunConfig cfg;
  auto read = [&](const char* key, auto& field) {
    if (!doc.contains(key)) return;
    try {
      field = doc.at(key).get<std::decay_t<decltype(field)>>();
    } catch (const nlohmann::json::exception&) {
      problems.push_back(std::string(key) + ": wrong type");
    }
  };
  read("dataset_path", cfg.dataset_path);
  read("model_name", cfg.model_name);
  read("num_samples_k", cfg.num_samples_k);
  read("top_p", cfg.top_p);
  read("temperature", cfg.temperature);
  read("max_output_tokens", cfg.max_output_tokens);
  read("tau_filter", cfg.tau_filter);
  read("sr_threshold", cfg.sr_threshold);
  read("cache_dir", cfg.cache_dir);
  read("rng_seed", cfg.rng_seed);
  read("concurrency_limit", cfg.concurrency_limit);
  read("endpoint_url", cfg.endpoint_url);
  read("endpoint_dim", cfg.endpoint_dim);
  read("dissimilar_fraction_d", cfg.dissimilar_fraction_d);
  read("negatives_per_doc", cfg.negatives_per_doc);
  read("generation_token_budget", cfg.generation_token_budget);
  if (doc.contains("backend")) {
    std::string kind;
    read("backend", kind);
    if (kind == "fallback")
      cfg.backend = BackendKind::fallback;
    else if (kind == "endpoint")
      cfg.backend = BackendKind::endpoint;
    else
      problems.push_back("backend: must be \"fallback\" or \"endpoint\"");
  }

  for (const std::string& msg : config_violations(cfg)) problems.push_back(msg);
  if (!problems.empty()) {
    std::string joined = "invalid config:";
    for (const std::string& msg : problems) joined += "\n  " + msg;
    throw ValidationError(joined);
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config file " + path.string() + ": " + e.what());
  }
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  return {{"dataset_path", cfg.dataset_path},
          {"model_name", cfg.model_name},
          {"num_samples_k", cfg.num_samples_k},
          {"top_p", cfg.top_p},
          {"temperature", cfg.temperature},
          {"max_output_tokens", cfg.max_output_tokens},
          {"tau_filter", cfg.tau_filter},
          {"sr_threshold", cfg.sr_threshold},
          {"cache_dir", cfg.cache_dir},
          {"rng_seed", cfg.rng_seed},
          {"concurrency_limit", cfg.concurrency_limit},
          {"backend", to_string(cfg.backend)},
          {"endpoint_url", cfg.endpoint_url},
          {"endpoint_dim", cfg.endpoint_dim},
          {"dissimilar_fraction_d", cfg.dissimilar_fraction_d},
          {"negatives_per_doc", cfg.negatives_per_doc},
          {"generation_token_budget", cfg.generation_token_budget}};
}

}  // namespace goalkp
