#pragma once

#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "goalkp/errors.hpp"
#include "goalkp/jsonl.hpp"
#include "goalkp/text.hpp"

namespace goalkp {

enum class Source { kptimes, duc2001, kpbiomed, pubmed, custom };
enum class Split { train, val, test };
enum class Relevance { relevant, irrelevant };

inline std::string to_string(Source s) {
  switch (s) {
    case Source::kptimes: return "kptimes";
    case Source::duc2001: return "duc2001";
    case Source::kpbiomed: return "kpbiomed";
    case Source::pubmed: return "pubmed";
    case Source::custom: return "custom";
  }
  return "custom";
}

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "test";
}

inline std::string to_string(Relevance r) {
  return r == Relevance::relevant ? "relevant" : "irrelevant";
}

inline Source source_from_string(const std::string& s) {
  if (s == "kptimes") return Source::kptimes;
  if (s == "duc2001") return Source::duc2001;
  if (s == "kpbiomed") return Source::kpbiomed;
  if (s == "pubmed") return Source::pubmed;
  if (s == "custom") return Source::custom;
  throw ValidationError("unknown source: \"" + s + "\"");
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split: \"" + s + "\"");
}

inline Relevance relevance_from_string(const std::string& s) {
  if (s == "relevant") return Relevance::relevant;
  if (s == "irrelevant") return Relevance::irrelevant;
  throw ValidationError("unknown relevance: \"" + s + "\"");
}

struct Document {
  std::string id;
  std::string title;  // may be empty
  std::string body;
  Source source = Source::custom;
  Split split = Split::test;

  bool operator==(const Document&) const = default;
};

// One (document, goal, reference set, label) instance. Goals are stored
// lowercased; references are stored in normalized form and keep their order.
struct GoalInstance {
  std::string doc_id;
  std::string goal;
  std::vector<std::string> references;
  Relevance relevance = Relevance::relevant;

  bool operator==(const GoalInstance&) const = default;
};

struct DatasetRecord {
  Document doc;
  std::vector<GoalInstance> goals;

  bool operator==(const DatasetRecord&) const = default;
};

using Dataset = std::vector<DatasetRecord>;

struct DatasetStats {
  std::size_t num_docs = 0;
  std::size_t num_instances = 0;
  std::size_t num_unique_goals = 0;
  double mean_goal_words = 0.0;
  double mean_kp_per_goal = 0.0;
};

// Exported training pair. The target follows the grammar
//   <goal> <eog> <n/a>            (irrelevant goal)
//   <goal> <eog> <kp>(;<kp>)*     (relevant goal)
struct TrainSequence {
  std::string input;
  std::string target;
};

inline constexpr std::string_view kEogToken = "<eog>";
inline constexpr std::string_view kNaToken = "<n/a>";

// Rendered document: title and body joined by a newline, or just the body
// when the title is empty.
inline std::string render_document(const Document& doc) {
  if (doc.title.empty()) return doc.body;
  return doc.title + "\n" + doc.body;
}

namespace detail {

inline void check_goal_text(const std::string& goal, const std::string& where) {
  if (goal.empty()) throw ValidationError(where + ": goal is empty");
  if (goal.find(';') != std::string::npos ||
      goal.find(kEogToken) != std::string::npos)
    throw ValidationError(where + ": goal \"" + goal +
                          "\" contains a reserved token (';' or '<eog>')");
}

inline void check_reference_text(const std::string& kp, const std::string& where) {
  if (kp.empty()) throw ValidationError(where + ": empty keyphrase");
  if (kp.find(';') != std::string::npos ||
      kp.find(kEogToken) != std::string::npos)
    throw ValidationError(where + ": keyphrase \"" + kp +
                          "\" contains a reserved token (';' or '<eog>')");
}

}  // namespace detail

// Normalizes and validates one instance. `where` prefixes error messages
// (typically "file:line").
inline GoalInstance make_goal_instance(const std::string& doc_id,
                                       const std::string& goal_raw,
                                       const std::vector<std::string>& refs_raw,
                                       Relevance relevance,
                                       const std::string& where = "instance") {
  GoalInstance inst;
  inst.doc_id = doc_id;
  inst.goal = normalize_reference(goal_raw);
  inst.relevance = relevance;
  detail::check_goal_text(inst.goal, where);
  std::set<std::string> seen;
  for (const std::string& raw : refs_raw) {
    std::string kp = normalize_reference(raw);
    detail::check_reference_text(kp, where);
    if (!seen.insert(kp).second)
      throw ValidationError(where + ": duplicate keyphrase \"" + kp +
                            "\" for goal \"" + inst.goal + "\"");
    inst.references.push_back(std::move(kp));
  }
  if (inst.relevance == Relevance::irrelevant && !inst.references.empty())
    throw ValidationError(where + ": irrelevant goal \"" + inst.goal +
                          "\" must have an empty reference set");
  if (inst.relevance == Relevance::relevant && inst.references.empty())
    throw ValidationError(where + ": relevant goal \"" + inst.goal +
                          "\" must have a non-empty reference set");
  return inst;
}

inline DatasetRecord parse_dataset_record(const nlohmann::json& obj,
                                          const std::string& where) {
  auto require_string = [&](const char* key) -> std::string {
    if (!obj.contains(key) || !obj.at(key).is_string())
      throw ValidationError(where + ": missing or non-string field \"" +
                            key + "\"");
    return obj.at(key).get<std::string>();
  };
  DatasetRecord rec;
  rec.doc.id = require_string("id");
  rec.doc.title = require_string("title");
  rec.doc.body = require_string("body");
  rec.doc.source = source_from_string(require_string("source"));
  rec.doc.split = split_from_string(require_string("split"));
  if (rec.doc.id.empty()) throw ValidationError(where + ": empty document id");
  if (rec.doc.body.empty())
    throw ValidationError(where + ": document \"" + rec.doc.id +
                          "\" has an empty body");
  if (!obj.contains("goals") || !obj.at("goals").is_array())
    throw ValidationError(where + ": missing \"goals\" array");
  for (const auto& g : obj.at("goals")) {
    if (!g.is_object() || !g.contains("goal") || !g.contains("relevance"))
      throw ValidationError(where + ": goal entries need \"goal\" and \"relevance\"");
    std::vector<std::string> refs;
    if (g.contains("keyphrases")) {
      for (const auto& kp : g.at("keyphrases")) refs.push_back(kp.get<std::string>());
    }
    rec.goals.push_back(make_goal_instance(
        rec.doc.id, g.at("goal").get<std::string>(), refs,
        relevance_from_string(g.at("relevance").get<std::string>()), where));
  }
  return rec;
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  Dataset records;
  std::set<std::string> ids;
  for_each_jsonl_line(path, [&](std::size_t line_no, const nlohmann::json& obj) {
    std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      DatasetRecord rec = parse_dataset_record(obj, where);
      if (!ids.insert(rec.doc.id).second)
        throw ValidationError(where + ": duplicate document id \"" +
                              rec.doc.id + "\"");
      records.push_back(std::move(rec));
    } catch (const ValidationError& e) {
      // Errors raised below parse_dataset_record lack the line context.
      std::string msg = e.what();
      if (msg.rfind(where, 0) == 0) throw;
      throw ValidationError(where + ": " + msg);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + ": malformed record: " + e.what());
    }
  });
  return records;
}

inline nlohmann::json record_to_json(const DatasetRecord& rec) {
  nlohmann::json goals = nlohmann::json::array();
  for (const GoalInstance& g : rec.goals) {
    goals.push_back({{"goal", g.goal},
                     {"keyphrases", g.references},
                     {"relevance", to_string(g.relevance)}});
  }
  return {{"id", rec.doc.id},       {"title", rec.doc.title},
          {"body", rec.doc.body},   {"source", to_string(rec.doc.source)},
          {"split", to_string(rec.doc.split)}, {"goals", goals}};
}

inline std::string serialize_dataset(const Dataset& records) {
  std::string out;
  for (const DatasetRecord& rec : records) {
    out += record_to_json(rec).dump();
    out += '\n';
  }
  return out;
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& records) {
  atomic_write_file(path, serialize_dataset(records));
}

inline DatasetStats compute_stats(const Dataset& records) {
  if (records.empty())
    throw ValidationError("compute_stats: empty record list");
  DatasetStats stats;
  stats.num_docs = records.size();
  std::set<std::string> unique_goals;
  std::size_t goal_words = 0;
  std::size_t relevant = 0;
  std::size_t total_refs = 0;
  for (const DatasetRecord& rec : records) {
    for (const GoalInstance& g : rec.goals) {
      ++stats.num_instances;
      unique_goals.insert(ascii_lower(g.goal));
      goal_words += whitespace_word_count(g.goal);
      if (g.relevance == Relevance::relevant) {
        ++relevant;
        total_refs += g.references.size();
      }
    }
  }
  stats.num_unique_goals = unique_goals.size();
  if (stats.num_instances > 0)
    stats.mean_goal_words =
        static_cast<double>(goal_words) / static_cast<double>(stats.num_instances);
  if (relevant > 0)
    stats.mean_kp_per_goal =
        static_cast<double>(total_refs) / static_cast<double>(relevant);
  return stats;
}

using DocRenderer = std::function<std::string(const Document&)>;

inline std::vector<TrainSequence> export_train_sequences(
    const Dataset& records, const DocRenderer& renderer = render_document) {
  std::vector<TrainSequence> out;
  for (const DatasetRecord& rec : records) {
    std::string input = renderer(rec.doc);
    for (const GoalInstance& g : rec.goals) {
      TrainSequence seq;
      seq.input = input;
      seq.target = g.goal;
      seq.target += ' ';
      seq.target += kEogToken;
      seq.target += ' ';
      if (g.relevance == Relevance::irrelevant) {
        seq.target += kNaToken;
      } else {
        for (std::size_t i = 0; i < g.references.size(); ++i) {
          if (i > 0) seq.target += ';';
          seq.target += g.references[i];
        }
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

// Parsed form of a train target. `keyphrases` is empty iff the target is the
// abstention branch.
struct ParsedTrainTarget {
  std::string goal;
  bool abstained = false;
  std::vector<std::string> keyphrases;
};

// Strict grammar check over an exported target. Returns nullopt when the
// string is not derivable from the grammar.
inline std::optional<ParsedTrainTarget> parse_train_target(std::string_view target) {
  const std::string sep = std::string(" ") + std::string(kEogToken) + " ";
  std::size_t pos = target.find(sep);
  if (pos == std::string_view::npos) return std::nullopt;
  ParsedTrainTarget parsed;
  parsed.goal = std::string(target.substr(0, pos));
  if (parsed.goal.empty()) return std::nullopt;
  if (parsed.goal.find(kEogToken) != std::string::npos) return std::nullopt;
  std::string_view rest = target.substr(pos + sep.size());
  if (rest.find(kEogToken) != std::string_view::npos) return std::nullopt;
  if (rest == kNaToken) {
    parsed.abstained = true;
    return parsed;
  }
  if (rest.empty()) return std::nullopt;
  for (const std::string& kp : split(rest, ';')) {
    if (kp.empty()) return std::nullopt;
    parsed.keyphrases.push_back(kp);
  }
  return parsed;
}

}  // namespace goalkp
