#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "goalkp/errors.hpp"
#include "goalkp/jsonl.hpp"
#include "goalkp/parallel.hpp"
#include "goalkp/text.hpp"

namespace goalkp {

struct TimestampedPost {
  std::string id;
  std::string text;
  std::chrono::sys_seconds timestamp;
};

// Parses an RFC 3339 timestamp ("2022-07-14T09:30:00Z", optional fractional
// seconds, numeric offsets allowed) into a UTC instant.
inline std::chrono::sys_seconds parse_rfc3339(const std::string& raw) {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  int consumed = 0;
  if (std::sscanf(raw.c_str(), "%4d-%2d-%2d%*1[Tt]%2d:%2d:%2d%n", &year,
                  &month, &day, &hour, &minute, &second, &consumed) != 6)
    throw ValidationError("unparseable RFC 3339 timestamp: " + raw);
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < raw.size() && raw[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    while (pos < raw.size() && raw[pos] >= '0' && raw[pos] <= '9') {
      ++pos;
      ++digits;
    }
    if (digits == 0)
      throw ValidationError("unparseable RFC 3339 timestamp: " + raw);
  }
  int offset_minutes = 0;
  if (pos >= raw.size())
    throw ValidationError("timestamp lacks a timezone designator: " + raw);
  if (raw[pos] == 'Z' || raw[pos] == 'z') {
    ++pos;
  } else if (raw[pos] == '+' || raw[pos] == '-') {
    int oh = 0, om = 0, n = 0;
    if (std::sscanf(raw.c_str() + pos + 1, "%2d:%2d%n", &oh, &om, &n) != 2 ||
        n != 5)
      throw ValidationError("malformed timezone offset in timestamp: " + raw);
    offset_minutes = oh * 60 + om;
    if (raw[pos] == '-') offset_minutes = -offset_minutes;
    pos += 6;
  } else {
    throw ValidationError("timestamp lacks a timezone designator: " + raw);
  }
  if (pos != raw.size())
    throw ValidationError("trailing characters in timestamp: " + raw);

  std::chrono::year_month_day ymd{std::chrono::year{year},
                                  std::chrono::month{static_cast<unsigned>(month)},
                                  std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60)
    throw ValidationError("out-of-range timestamp: " + raw);
  if (second == 60) second = 59;  // collapse leap seconds
  std::chrono::sys_seconds local =
      std::chrono::sys_days{ymd} + std::chrono::hours{hour} +
      std::chrono::minutes{minute} + std::chrono::seconds{second};
  return local - std::chrono::minutes{offset_minutes};
}

inline std::string format_day(std::chrono::sys_days day) {
  std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

inline TimestampedPost parse_post(const nlohmann::json& obj) {
  try {
    TimestampedPost post;
    post.id = obj.at("id").get<std::string>();
    post.text = obj.at("text").get<std::string>();
    if (trim(post.text).empty())
      throw ValidationError("post text must be non-empty");
    post.timestamp = parse_rfc3339(obj.at("timestamp").get<std::string>());
    return post;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed post record: ") + e.what());
  }
}

inline std::vector<TimestampedPost> load_posts(
    const std::filesystem::path& path) {
  std::vector<TimestampedPost> posts;
  for_each_jsonl_line(path, [&](std::size_t line_no, const nlohmann::json& obj) {
    try {
      posts.push_back(parse_post(obj));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
  });
  return posts;
}

// The seven epidemic-tracking goals, in their canonical order.
inline const std::vector<std::string>& default_epidemic_goals() {
  static const std::vector<std::string> goals = {
      "disease infection",  "epidemic spread",     "epidemic prevention",
      "epidemic control",   "symptom",             "recover from disease",
      "death from epidemic"};
  return goals;
}

struct TrendSeries {
  std::string goal;
  std::map<std::chrono::sys_days, std::int64_t> buckets;
};

struct SkippedJudgment {
  std::string post_id;
  std::string goal;
  std::string reason;
};

struct TrendReport {
  std::vector<TrendSeries> per_goal;
  TrendSeries total;  // goal = "total", sums across goals per day
  std::vector<SkippedJudgment> skipped;
};

using RelevanceJudge =
    std::function<bool(const TimestampedPost&, const std::string& goal)>;

// Counts, per goal and UTC day, the posts the judge deems relevant. Buckets
// are zero-filled over the contiguous day range covered by the input posts.
// A failing judgment is recorded as skipped and the run continues.
inline TrendReport build_trends(const std::vector<TimestampedPost>& posts,
                                const std::vector<std::string>& goals,
                                const RelevanceJudge& judge,
                                std::size_t workers = 1) {
  if (goals.empty())
    throw ValidationError("trend detection requires at least one goal");

  struct Verdict {
    bool relevant = false;
    bool failed = false;
    std::string reason;
  };
  std::vector<Verdict> verdicts(posts.size() * goals.size());
  parallel_for(verdicts.size(), workers, [&](std::size_t i) {
    const TimestampedPost& post = posts[i / goals.size()];
    const std::string& goal = goals[i % goals.size()];
    Verdict& v = verdicts[i];
    try {
      v.relevant = judge(post, goal);
    } catch (const std::exception& e) {
      v.failed = true;
      v.reason = e.what();
    }
  });

  TrendReport report;
  report.total.goal = "total";
  report.per_goal.resize(goals.size());
  for (std::size_t g = 0; g < goals.size(); ++g)
    report.per_goal[g].goal = goals[g];
  if (!posts.empty()) {
    auto min_day = std::chrono::floor<std::chrono::days>(posts[0].timestamp);
    auto max_day = min_day;
    for (const TimestampedPost& post : posts) {
      auto d = std::chrono::floor<std::chrono::days>(post.timestamp);
      if (d < min_day) min_day = d;
      if (d > max_day) max_day = d;
    }
    for (auto d = min_day; d <= max_day; d += std::chrono::days{1}) {
      for (TrendSeries& series : report.per_goal) series.buckets[d] = 0;
      report.total.buckets[d] = 0;
    }
  }
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const TimestampedPost& post = posts[i / goals.size()];
    std::size_t g = i % goals.size();
    const Verdict& v = verdicts[i];
    if (v.failed) {
      report.skipped.push_back({post.id, goals[g], v.reason});
      continue;
    }
    if (!v.relevant) continue;
    auto d = std::chrono::floor<std::chrono::days>(post.timestamp);
    report.per_goal[g].buckets[d] += 1;
    report.total.buckets[d] += 1;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Trend output formats
// ---------------------------------------------------------------------------

inline std::string trends_tsv(const TrendReport& report) {
  std::string out = "date\tgoal\tcount\n";
  auto emit = [&](const TrendSeries& series) {
    for (const auto& [day, count] : series.buckets)
      out += format_day(day) + "\t" + series.goal + "\t" +
             std::to_string(count) + "\n";
  };
  for (const TrendSeries& series : report.per_goal) emit(series);
  emit(report.total);
  return out;
}

// One row per date, one column per goal plus the total, for plotting tools.
inline std::string trends_csv_matrix(const TrendReport& report) {
  std::string out = "date";
  for (const TrendSeries& series : report.per_goal) out += "," + series.goal;
  out += ",total\n";
  for (const auto& [day, total] : report.total.buckets) {
    out += format_day(day);
    for (const TrendSeries& series : report.per_goal) {
      auto it = series.buckets.find(day);
      out += "," + std::to_string(it == series.buckets.end() ? 0 : it->second);
    }
    out += "," + std::to_string(total) + "\n";
  }
  return out;
}

// Static SVG line chart of every series over the covered range.
inline std::string trends_svg(const TrendReport& report, int width = 720,
                              int height = 360) {
  const int margin_left = 50, margin_right = 20, margin_top = 20,
            margin_bottom = 40;
  const int plot_w = width - margin_left - margin_right;
  const int plot_h = height - margin_top - margin_bottom;

  std::vector<const TrendSeries*> all;
  for (const TrendSeries& s : report.per_goal) all.push_back(&s);
  all.push_back(&report.total);

  std::int64_t max_count = 1;
  for (const TrendSeries* s : all)
    for (const auto& [day, count] : s->buckets)
      if (count > max_count) max_count = count;
  std::size_t n_days = report.total.buckets.size();

  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#333333"};
  const std::size_t palette_n = sizeof(palette) / sizeof(palette[0]);

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" "
                "height=\"%d\" viewBox=\"0 0 %d %d\">\n",
                width, height, width, height);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" "
                "stroke=\"black\"/>\n",
                margin_left, margin_top + plot_h, margin_left + plot_w,
                margin_top + plot_h);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" "
                "stroke=\"black\"/>\n",
                margin_left, margin_top, margin_left, margin_top + plot_h);
  svg += buf;

  auto x_of = [&](std::size_t idx) {
    if (n_days <= 1) return margin_left + plot_w / 2;
    return margin_left +
           static_cast<int>(static_cast<double>(idx) * plot_w /
                            static_cast<double>(n_days - 1));
  };
  auto y_of = [&](std::int64_t count) {
    return margin_top + plot_h -
           static_cast<int>(static_cast<double>(count) * plot_h /
                            static_cast<double>(max_count));
  };

  for (std::size_t s = 0; s < all.size(); ++s) {
    std::string points;
    std::size_t idx = 0;
    for (const auto& [day, total] : report.total.buckets) {
      auto it = all[s]->buckets.find(day);
      std::int64_t count = it == all[s]->buckets.end() ? 0 : it->second;
      std::snprintf(buf, sizeof(buf), "%d,%d ", x_of(idx), y_of(count));
      points += buf;
      ++idx;
    }
    if (!points.empty()) points.pop_back();
    const char* color = palette[s % palette_n];
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" font-size=\"10\" fill=\"%s\">",
                  margin_left + plot_w - 120, margin_top + 12 * (int(s) + 1),
                  color);
    svg += buf;
    svg += all[s]->goal + "</text>\n";
  }

  std::size_t idx = 0;
  for (const auto& [day, total] : report.total.buckets) {
    if (n_days <= 10 || idx % ((n_days + 9) / 10) == 0) {
      std::snprintf(buf, sizeof(buf),
                    "<text x=\"%d\" y=\"%d\" font-size=\"9\" "
                    "text-anchor=\"middle\">",
                    x_of(idx), margin_top + plot_h + 14);
      svg += buf;
      svg += format_day(day) + "</text>\n";
    }
    ++idx;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%d\" y=\"%d\" font-size=\"9\" "
                "text-anchor=\"end\">%lld</text>\n",
                margin_left - 4, margin_top + 8,
                static_cast<long long>(max_count));
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%d\" y=\"%d\" font-size=\"9\" "
                "text-anchor=\"end\">0</text>\n",
                margin_left - 4, margin_top + plot_h);
  svg += buf;
  svg += "</svg>\n";
  return svg;
}

}  // namespace goalkp
