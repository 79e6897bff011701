#include <algorithm>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "goalkp/events.hpp"
#include "support/fixtures.hpp"

using namespace goalkp;
using fixtures::TempDir;

namespace {

TimestampedPost post(std::string id, std::string text, const std::string& ts) {
  return {std::move(id), std::move(text), parse_rfc3339(ts)};
}

// Judge keyed on substring containment, case-sensitive.
RelevanceJudge substring_judge() {
  return [](const TimestampedPost& p, const std::string& goal) {
    return p.text.find(goal) != std::string::npos;
  };
}

}  // namespace

TEST_CASE("parse_rfc3339 accepted forms", "[events]") {
  auto base = parse_rfc3339("2022-07-14T09:30:00Z");
  CHECK(parse_rfc3339("2022-07-14t09:30:00z") == base);
  CHECK(parse_rfc3339("2022-07-14T09:30:00.5Z") == base);
  CHECK(parse_rfc3339("2022-07-14T09:30:00.123456Z") == base);
  CHECK(parse_rfc3339("2022-07-14T09:30:00+00:00") == base);
  // +02:00 means the UTC instant is two hours earlier.
  CHECK(parse_rfc3339("2022-07-14T11:30:00+02:00") == base);
  CHECK(parse_rfc3339("2022-07-14T04:00:00-05:30") == base);
  // A leap second collapses onto :59.
  CHECK(parse_rfc3339("2022-07-14T09:30:60Z") ==
        parse_rfc3339("2022-07-14T09:30:59Z"));
}

TEST_CASE("parse_rfc3339 day boundaries under offsets", "[events]") {
  auto day = [](const std::string& ts) {
    return std::chrono::floor<std::chrono::days>(parse_rfc3339(ts));
  };
  // 00:30+02:00 is 22:30 UTC on the previous day.
  CHECK(day("2022-07-15T00:30:00+02:00") == day("2022-07-14T22:30:00Z"));
  CHECK(day("2022-07-14T23:30:00-01:00") == day("2022-07-15T00:30:00Z"));
}

TEST_CASE("parse_rfc3339 rejected forms", "[events]") {
  for (const char* bad :
       {"2022-07-14", "2022-07-14T09:30:00", "2022-07-14 09:30:00Z",
        "2022-07-14T09:30:00X", "2022-07-14T09:30:00+2:00",
        "2022-07-14T09:30:00Zjunk", "2022-07-14T09:30:00.Z",
        "2022-13-01T00:00:00Z", "2022-02-30T00:00:00Z",
        "2022-07-14T24:00:00Z", "not a date"}) {
    CHECK_THROWS_AS(parse_rfc3339(bad), ValidationError);
  }
}

TEST_CASE("format_day round trips", "[events]") {
  auto t = parse_rfc3339("2022-07-14T23:59:59Z");
  CHECK(format_day(std::chrono::floor<std::chrono::days>(t)) == "2022-07-14");
  auto y2k = parse_rfc3339("2000-01-02T00:00:00Z");
  CHECK(format_day(std::chrono::floor<std::chrono::days>(y2k)) == "2000-01-02");
}

TEST_CASE("post parsing and loading", "[events]") {
  TimestampedPost p = parse_post(nlohmann::json{
      {"id", "p1"}, {"text", "fever cases rise"},
      {"timestamp", "2022-07-14T09:30:00Z"}});
  CHECK(p.id == "p1");
  CHECK(p.text == "fever cases rise");

  CHECK_THROWS_AS(parse_post(nlohmann::json{{"id", "p1"},
                                            {"text", "  "},
                                            {"timestamp", "2022-07-14T09:30:00Z"}}),
                  ValidationError);
  CHECK_THROWS_AS(parse_post(nlohmann::json{{"id", "p1"}, {"text", "x"}}),
                  ValidationError);

  TempDir dir("posts");
  auto path = dir.path() / "posts.jsonl";
  atomic_write_file(
      path,
      nlohmann::json{{"id", "p1"},
                     {"text", "fever"},
                     {"timestamp", "2022-07-14T09:30:00Z"}}
              .dump() +
          "\n{\"id\": \"p2\", \"text\": \"cough\", \"timestamp\": \"bad\"}\n");
  CHECK_THROWS_WITH(load_posts(path), Catch::Matchers::ContainsSubstring(":2"));
}

TEST_CASE("default epidemic goals", "[events]") {
  const auto& goals = default_epidemic_goals();
  REQUIRE(goals.size() == 7);
  CHECK(goals.front() == "disease infection");
  CHECK(goals.back() == "death from epidemic");
  CHECK(std::find(goals.begin(), goals.end(), "symptom") != goals.end());
}

TEST_CASE("build_trends buckets by UTC day and zero-fills gaps", "[events]") {
  std::vector<TimestampedPost> posts = {
      post("p1", "spike in fever", "2022-07-01T10:00:00Z"),
      post("p2", "fever and cough", "2022-07-01T23:00:00Z"),
      // Day 2022-07-02 has no posts at all.
      post("p3", "all recovered", "2022-07-03T08:00:00Z"),
      // Offset pushes this one back to 2022-07-03 UTC.
      post("p4", "fever returns", "2022-07-04T01:00:00+02:00")};
  TrendReport report =
      build_trends(posts, {"fever", "recovered"}, substring_judge());

  REQUIRE(report.per_goal.size() == 2);
  const auto& fever = report.per_goal[0];
  CHECK(fever.goal == "fever");
  REQUIRE(fever.buckets.size() == 3);  // contiguous 07-01..07-03

  auto day = [](const char* ts) {
    return std::chrono::floor<std::chrono::days>(parse_rfc3339(ts));
  };
  CHECK(fever.buckets.at(day("2022-07-01T00:00:00Z")) == 2);
  CHECK(fever.buckets.at(day("2022-07-02T00:00:00Z")) == 0);
  CHECK(fever.buckets.at(day("2022-07-03T00:00:00Z")) == 1);

  const auto& recovered = report.per_goal[1];
  CHECK(recovered.buckets.at(day("2022-07-03T00:00:00Z")) == 1);
  CHECK(recovered.buckets.at(day("2022-07-01T00:00:00Z")) == 0);

  CHECK(report.total.goal == "total");
  CHECK(report.total.buckets.at(day("2022-07-01T00:00:00Z")) == 2);
  CHECK(report.total.buckets.at(day("2022-07-02T00:00:00Z")) == 0);
  CHECK(report.total.buckets.at(day("2022-07-03T00:00:00Z")) == 2);
  CHECK(report.skipped.empty());
}

TEST_CASE("build_trends is invariant to post order and worker count",
          "[events]") {
  std::vector<TimestampedPost> posts;
  for (int i = 0; i < 20; ++i) {
    char ts[40];
    std::snprintf(ts, sizeof(ts), "2022-07-%02dT0%d:00:00Z", 1 + i % 5, i % 10);
    posts.push_back(post("p" + std::to_string(i),
                         (i % 3 == 0) ? "fever spike" : "quiet day", ts));
  }
  TrendReport base = build_trends(posts, {"fever"}, substring_judge(), 1);
  std::mt19937 rng(5);
  std::shuffle(posts.begin(), posts.end(), rng);
  for (std::size_t workers : {1u, 4u}) {
    TrendReport got = build_trends(posts, {"fever"}, substring_judge(), workers);
    CHECK(got.per_goal[0].buckets == base.per_goal[0].buckets);
    CHECK(got.total.buckets == base.total.buckets);
  }
}

TEST_CASE("build_trends records failed judgments and continues", "[events]") {
  std::vector<TimestampedPost> posts = {
      post("p1", "fever", "2022-07-01T10:00:00Z"),
      post("p2", "explode", "2022-07-01T11:00:00Z")};
  RelevanceJudge flaky = [](const TimestampedPost& p, const std::string& goal) {
    if (p.text == "explode") throw std::runtime_error("judge offline");
    return p.text.find(goal) != std::string::npos;
  };
  TrendReport report = build_trends(posts, {"fever", "cough"}, flaky);
  REQUIRE(report.skipped.size() == 2);
  CHECK(report.skipped[0].post_id == "p2");
  CHECK(report.skipped[0].goal == "fever");
  CHECK(report.skipped[0].reason == "judge offline");
  CHECK(report.skipped[1].goal == "cough");
  auto day = std::chrono::floor<std::chrono::days>(posts[0].timestamp);
  CHECK(report.per_goal[0].buckets.at(day) == 1);
}

TEST_CASE("build_trends requires goals and tolerates no posts", "[events]") {
  CHECK_THROWS_AS(build_trends({}, {}, substring_judge()), ValidationError);
  TrendReport empty = build_trends({}, {"fever"}, substring_judge());
  CHECK(empty.per_goal.size() == 1);
  CHECK(empty.per_goal[0].buckets.empty());
  CHECK(empty.total.buckets.empty());
}

TEST_CASE("trend output formats", "[events]") {
  std::vector<TimestampedPost> posts = {
      post("p1", "fever", "2022-07-01T10:00:00Z"),
      post("p2", "fever cough", "2022-07-02T10:00:00Z")};
  TrendReport report = build_trends(posts, {"fever", "cough"}, substring_judge());

  std::string tsv = trends_tsv(report);
  auto tsv_lines = split_lines(tsv);
  CHECK(tsv_lines[0] == "date\tgoal\tcount");
  // 2 goals + total, 2 days each, plus header and trailing blank.
  REQUIRE(tsv_lines.size() == 8);
  CHECK(tsv_lines[1] == "2022-07-01\tfever\t1");
  CHECK(tsv_lines[2] == "2022-07-02\tfever\t1");
  CHECK(tsv_lines[3] == "2022-07-01\tcough\t0");
  CHECK(tsv_lines[4] == "2022-07-02\tcough\t1");
  CHECK(tsv_lines[5] == "2022-07-01\ttotal\t1");
  CHECK(tsv_lines[6] == "2022-07-02\ttotal\t2");

  std::string csv = trends_csv_matrix(report);
  auto csv_lines = split_lines(csv);
  CHECK(csv_lines[0] == "date,fever,cough,total");
  CHECK(csv_lines[1] == "2022-07-01,1,0,1");
  CHECK(csv_lines[2] == "2022-07-02,1,1,2");

  std::string svg = trends_svg(report);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  // One polyline per goal plus the total.
  std::size_t polylines = 0;
  for (std::size_t pos = 0; (pos = svg.find("<polyline", pos)) != std::string::npos;
       ++pos)
    ++polylines;
  CHECK(polylines == 3);
  CHECK(svg.find(">fever</text>") != std::string::npos);
  CHECK(svg.find("2022-07-01") != std::string::npos);
}
