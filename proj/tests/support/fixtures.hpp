#pragma once

// Builders for the synthetic dataset and scripted-transport fixtures the
// tests run against. The mock fixture maps prompt digests to ordered
// response lists, so entries are derived from the same prompt renderings the
// pipeline will issue.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "goalkp/consistency.hpp"
#include "goalkp/corpus.hpp"
#include "goalkp/llm.hpp"

namespace fixtures {

using nlohmann::json;

inline goalkp::Document make_doc(std::string id, std::string title,
                                 std::string body) {
  return {std::move(id), std::move(title), std::move(body),
          goalkp::Source::custom, goalkp::Split::test};
}

// Unique scratch directory under the system temp root.
class TempDir {
public:
  explicit TempDir(const std::string& label) {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() /
            ("goalkp_" + label + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

inline std::string relevance_digest(const goalkp::Document& doc,
                                    const std::string& goal) {
  goalkp::PromptRendering prompt = goalkp::render_prompt(
      goalkp::PromptTemplate::relevance_judgment,
      {{"title", doc.title},
       {"body", goalkp::first_sentences(doc.body, 5)},
       {"goal", goal}});
  return goalkp::prompt_digest(prompt);
}

inline std::string generation_digest(const goalkp::Document& doc,
                                     const std::string& goal) {
  return goalkp::prompt_digest(goalkp::generation_prompt(doc, goal));
}

// Incrementally assembled digest -> responses fixture.
class MockFixture {
public:
  void script_relevance(const goalkp::Document& doc, const std::string& goal,
                        bool relevant) {
    fixture_[relevance_digest(doc, goal)] = json::array({relevant ? "yes" : "no"});
  }

  void script_generation(const goalkp::Document& doc, const std::string& goal,
                         const std::vector<std::string>& samples) {
    fixture_[generation_digest(doc, goal)] = samples;
  }

  void script_messages(const std::vector<goalkp::ChatMessage>& messages,
                       const std::vector<std::string>& responses) {
    fixture_[goalkp::prompt_digest(messages)] = responses;
  }

  const json& fixture() const { return fixture_; }
  goalkp::ScriptedTransport transport() const {
    return goalkp::ScriptedTransport(fixture_);
  }

private:
  json fixture_ = json::object();
};

// A labeled record plus the scripted behavior that realizes it: judgments
// follow the labels and every relevant goal's samples repeat its references
// in order, so generation reproduces the references exactly.
inline goalkp::DatasetRecord perfect_record(
    const goalkp::Document& doc,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& relevant,
    const std::vector<std::string>& irrelevant, int k, MockFixture& mock) {
  goalkp::DatasetRecord rec;
  rec.doc = doc;
  for (const auto& [goal, refs] : relevant) {
    rec.goals.push_back(goalkp::make_goal_instance(
        doc.id, goal, refs, goalkp::Relevance::relevant));
    mock.script_relevance(doc, rec.goals.back().goal, true);
    std::string joined;
    for (const std::string& r : refs) {
      if (!joined.empty()) joined += ", ";
      joined += r;
    }
    mock.script_generation(doc, rec.goals.back().goal,
                           std::vector<std::string>(k, joined));
  }
  for (const std::string& goal : irrelevant) {
    rec.goals.push_back(goalkp::make_goal_instance(
        doc.id, goal, {}, goalkp::Relevance::irrelevant));
    mock.script_relevance(doc, rec.goals.back().goal, false);
  }
  return rec;
}

// The consensus document: phrase A at rank 1 in 8 of 10 samples, phrase B at
// rank 3 in the other 2, giving scores 0.8 and 1/15.
inline goalkp::DatasetRecord consensus_record(MockFixture& mock) {
  goalkp::Document doc = make_doc(
      "d01", "Tanker runs aground off the coast",
      "A loaded tanker ran aground early Monday. Cleanup crews deployed "
      "booms around the hull. Officials said the cargo was crude oil.");
  goalkp::DatasetRecord rec;
  rec.doc = doc;
  rec.goals.push_back(goalkp::make_goal_instance(
      doc.id, "energy source", {"crude oil"}, goalkp::Relevance::relevant));
  rec.goals.push_back(goalkp::make_goal_instance(
      doc.id, "recipe", {}, goalkp::Relevance::irrelevant));
  mock.script_relevance(doc, "energy source", true);
  mock.script_relevance(doc, "recipe", false);
  std::vector<std::string> samples(8, "crude oil");
  samples.push_back("fossil fuel, petroleum, oil spill");
  samples.push_back("fossil fuel, petroleum, oil spill");
  mock.script_generation(doc, "energy source", samples);
  return rec;
}

}  // namespace fixtures
