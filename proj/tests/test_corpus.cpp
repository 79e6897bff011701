#include <algorithm>
#include <filesystem>

#include <catch2/catch_amalgamated.hpp>

#include "goalkp/corpus.hpp"
#include "support/fixtures.hpp"

using namespace goalkp;
using fixtures::TempDir;

namespace {

nlohmann::json valid_record_json() {
  return nlohmann::json::parse(R"({
    "id": "d1", "title": "A title", "body": "A body.",
    "source": "kptimes", "split": "test",
    "goals": [
      {"goal": "Location", "keyphrases": ["New York", "Boston"], "relevance": "relevant"},
      {"goal": "recipe", "keyphrases": [], "relevance": "irrelevant"}
    ]})");
}

std::filesystem::path write_lines(const TempDir& dir, const std::string& name,
                                  const std::string& content) {
  auto path = dir.path() / name;
  atomic_write_file(path, content);
  return path;
}

}  // namespace

TEST_CASE("enum round trips", "[corpus]") {
  for (auto s : {Source::kptimes, Source::duc2001, Source::kpbiomed,
                 Source::pubmed, Source::custom})
    CHECK(source_from_string(to_string(s)) == s);
  for (auto s : {Split::train, Split::val, Split::test})
    CHECK(split_from_string(to_string(s)) == s);
  for (auto r : {Relevance::relevant, Relevance::irrelevant})
    CHECK(relevance_from_string(to_string(r)) == r);
  CHECK_THROWS_AS(source_from_string("arxiv"), ValidationError);
  CHECK_THROWS_AS(split_from_string("dev"), ValidationError);
  CHECK_THROWS_AS(relevance_from_string("maybe"), ValidationError);
}

TEST_CASE("render_document joins title and body", "[corpus]") {
  CHECK(render_document({"d", "Title", "Body", Source::custom, Split::test}) ==
        "Title\nBody");
  CHECK(render_document({"d", "", "Body only", Source::custom, Split::test}) ==
        "Body only");
}

TEST_CASE("make_goal_instance normalizes goal and references", "[corpus]") {
  GoalInstance inst = make_goal_instance(
      "d1", "  Medical   Condition ", {"Monkey Pox", "FEVER"},
      Relevance::relevant);
  CHECK(inst.goal == "medical condition");
  REQUIRE(inst.references.size() == 2);
  CHECK(inst.references[0] == "monkey pox");
  CHECK(inst.references[1] == "fever");
}

TEST_CASE("make_goal_instance rejects contract violations", "[corpus]") {
  CHECK_THROWS_AS(make_goal_instance("d", "", {"x"}, Relevance::relevant),
                  ValidationError);
  // Reserved separator and marker tokens would corrupt the train export.
  CHECK_THROWS_AS(make_goal_instance("d", "a;b", {"x"}, Relevance::relevant),
                  ValidationError);
  CHECK_THROWS_AS(
      make_goal_instance("d", "goal", {"kp <eog> kp"}, Relevance::relevant),
      ValidationError);
  // Duplicates after normalization collapse to the same reference.
  CHECK_THROWS_AS(
      make_goal_instance("d", "goal", {"Oil", "oil"}, Relevance::relevant),
      ValidationError);
  CHECK_THROWS_AS(
      make_goal_instance("d", "goal", {"x"}, Relevance::irrelevant),
      ValidationError);
  CHECK_THROWS_AS(make_goal_instance("d", "goal", {}, Relevance::relevant),
                  ValidationError);
}

TEST_CASE("load and serialize round trip", "[corpus]") {
  TempDir dir("corpus");
  auto path = write_lines(dir, "ds.jsonl", valid_record_json().dump() + "\n");
  Dataset ds = load_dataset(path);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].doc.id == "d1");
  REQUIRE(ds[0].goals.size() == 2);
  CHECK(ds[0].goals[0].goal == "location");
  CHECK(ds[0].goals[0].references ==
        std::vector<std::string>{"new york", "boston"});
  CHECK(ds[0].goals[1].relevance == Relevance::irrelevant);

  auto path2 = dir.path() / "ds2.jsonl";
  save_dataset(path2, ds);
  Dataset ds2 = load_dataset(path2);
  REQUIRE(ds2.size() == 1);
  CHECK(serialize_dataset(ds) == serialize_dataset(ds2));
}

TEST_CASE("load_dataset reports the offending line", "[corpus]") {
  TempDir dir("corpus");
  auto good = valid_record_json();
  auto bad = valid_record_json();
  bad["id"] = "d2";
  bad["goals"][0]["relevance"] = "sometimes";
  auto path =
      write_lines(dir, "ds.jsonl", good.dump() + "\n" + bad.dump() + "\n");
  CHECK_THROWS_WITH(load_dataset(path), Catch::Matchers::ContainsSubstring(":2"));
}

TEST_CASE("load_dataset rejects duplicate ids and malformed JSON", "[corpus]") {
  TempDir dir("corpus");
  auto rec = valid_record_json();
  auto dup = write_lines(dir, "dup.jsonl", rec.dump() + "\n" + rec.dump() + "\n");
  CHECK_THROWS_WITH(load_dataset(dup),
                    Catch::Matchers::ContainsSubstring("duplicate document id"));
  auto broken = write_lines(dir, "broken.jsonl", "{not json\n");
  CHECK_THROWS_WITH(load_dataset(broken),
                    Catch::Matchers::ContainsSubstring("malformed JSON"));
  auto empty = write_lines(dir, "empty.jsonl", "");
  CHECK(load_dataset(empty).empty());
}

TEST_CASE("load_dataset accepts CRLF and blank lines", "[corpus]") {
  TempDir dir("corpus");
  auto path = write_lines(dir, "crlf.jsonl",
                          valid_record_json().dump() + "\r\n\r\n");
  CHECK(load_dataset(path).size() == 1);
}

TEST_CASE("compute_stats hand arithmetic", "[corpus]") {
  DatasetRecord rec;
  rec.doc = fixtures::make_doc("d1", "t", "b");
  rec.goals.push_back(make_goal_instance("d1", "location", {"new york"},
                                         Relevance::relevant));
  rec.goals.push_back(make_goal_instance("d1", "event", {"storm", "flood"},
                                         Relevance::relevant));
  DatasetStats stats = compute_stats({rec});
  CHECK(stats.num_docs == 1);
  CHECK(stats.num_instances == 2);
  CHECK(stats.num_unique_goals == 2);
  CHECK(stats.mean_goal_words == 1.0);
  CHECK(stats.mean_kp_per_goal == 1.5);
}

TEST_CASE("compute_stats dedupes goals across documents", "[corpus]") {
  DatasetRecord a, b;
  a.doc = fixtures::make_doc("d1", "", "b");
  b.doc = fixtures::make_doc("d2", "", "b");
  a.goals.push_back(make_goal_instance("d1", "event", {"x"}, Relevance::relevant));
  b.goals.push_back(make_goal_instance("d2", "event", {"y"}, Relevance::relevant));
  CHECK(compute_stats({a, b}).num_unique_goals == 1);
}

TEST_CASE("compute_stats counts only relevant goals for kp mean", "[corpus]") {
  DatasetRecord rec;
  rec.doc = fixtures::make_doc("d1", "", "b");
  rec.goals.push_back(make_goal_instance("d1", "only irrelevant", {},
                                         Relevance::irrelevant));
  DatasetStats stats = compute_stats({rec});
  CHECK(stats.mean_kp_per_goal == 0.0);
  CHECK(stats.mean_goal_words == 2.0);
}

TEST_CASE("compute_stats rejects an empty dataset", "[corpus]") {
  CHECK_THROWS_AS(compute_stats({}), ValidationError);
}

TEST_CASE("compute_stats is permutation invariant", "[corpus]") {
  Dataset ds;
  for (int i = 0; i < 5; ++i) {
    DatasetRecord rec;
    rec.doc = fixtures::make_doc("d" + std::to_string(i), "", "b");
    rec.goals.push_back(make_goal_instance(
        rec.doc.id, "goal " + std::to_string(i % 3),
        {"kp" + std::to_string(i)}, Relevance::relevant));
    ds.push_back(rec);
  }
  DatasetStats before = compute_stats(ds);
  std::reverse(ds.begin(), ds.end());
  DatasetStats after = compute_stats(ds);
  CHECK(before.num_unique_goals == after.num_unique_goals);
  CHECK(before.mean_goal_words == after.mean_goal_words);
  CHECK(before.mean_kp_per_goal == after.mean_kp_per_goal);
}

TEST_CASE("export_train_sequences relevant branch", "[corpus]") {
  DatasetRecord rec;
  rec.doc = fixtures::make_doc("d1", "Education bill passes",
                               "The law was signed today.");
  rec.goals.push_back(make_goal_instance(
      "d1", "law", {"no child left behind act"}, Relevance::relevant));
  auto seqs = export_train_sequences({rec});
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].input == "Education bill passes\nThe law was signed today.");
  CHECK(seqs[0].target == "law <eog> no child left behind act");
}

TEST_CASE("export_train_sequences abstention branch", "[corpus]") {
  DatasetRecord rec;
  rec.doc = fixtures::make_doc("d1", "", "Body.");
  rec.goals.push_back(
      make_goal_instance("d1", "recipe", {}, Relevance::irrelevant));
  auto seqs = export_train_sequences({rec});
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].input == "Body.");
  CHECK(seqs[0].target == "recipe <eog> <n/a>");
}

TEST_CASE("export_train_sequences separator count", "[corpus]") {
  DatasetRecord rec;
  rec.doc = fixtures::make_doc("d1", "", "Body.");
  rec.goals.push_back(
      make_goal_instance("d1", "goal", {"a", "b"}, Relevance::relevant));
  auto seqs = export_train_sequences({rec});
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].target == "goal <eog> a;b");
  CHECK(std::count(seqs[0].target.begin(), seqs[0].target.end(), ';') == 1);
}

TEST_CASE("export_train_sequences accepts a custom renderer", "[corpus]") {
  DatasetRecord rec;
  rec.doc = fixtures::make_doc("d1", "T", "B");
  rec.goals.push_back(make_goal_instance("d1", "g", {"x"}, Relevance::relevant));
  auto seqs = export_train_sequences(
      {rec}, [](const Document& doc) { return doc.title; });
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].input == "T");
}

TEST_CASE("parse_train_target accepts the grammar", "[corpus]") {
  auto kp = parse_train_target("law <eog> a;b;c");
  REQUIRE(kp.has_value());
  CHECK(kp->goal == "law");
  CHECK_FALSE(kp->abstained);
  CHECK(kp->keyphrases == std::vector<std::string>{"a", "b", "c"});

  auto na = parse_train_target("recipe <eog> <n/a>");
  REQUIRE(na.has_value());
  CHECK(na->abstained);
  CHECK(na->keyphrases.empty());
}

TEST_CASE("parse_train_target rejects malformed targets", "[corpus]") {
  CHECK_FALSE(parse_train_target("no separator").has_value());
  CHECK_FALSE(parse_train_target(" <eog> kp").has_value());
  CHECK_FALSE(parse_train_target("goal <eog> ").has_value());
  CHECK_FALSE(parse_train_target("goal <eog> a;;b").has_value());
  CHECK_FALSE(parse_train_target("goal <eog> a <eog> b").has_value());
}
