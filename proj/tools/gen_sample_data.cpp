// Regenerates the sample corpus under data/: a labeled dataset, timestamped
// posts with judgments, raw keyphrase documents, a run config, and a scripted
// transport fixture whose digests match the prompts the pipeline renders for
// those inputs. Run from the repository root after changing any prompt
// template or sample document:
//
//   build/tools/gen_sample_data [output-dir]

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "goalkp/goalkp.hpp"

using namespace goalkp;
using nlohmann::json;

namespace {

json fixture = json::object();

void script_relevance(const Document& doc, const std::string& goal,
                      bool relevant) {
  PromptRendering prompt = render_prompt(
      PromptTemplate::relevance_judgment,
      {{"title", doc.title},
       {"body", first_sentences(doc.body, 5)},
       {"goal", goal}});
  fixture[prompt_digest(prompt)] = json::array({relevant ? "yes" : "no"});
}

void script_generation(const Document& doc, const std::string& goal,
                       const std::vector<std::string>& samples) {
  fixture[prompt_digest(generation_prompt(doc, goal))] = samples;
}

// A document whose relevant goals answer "yes" and reproduce their references
// verbatim in all K samples.
DatasetRecord labeled_record(
    Document doc,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& relevant,
    const std::vector<std::string>& irrelevant, int k) {
  DatasetRecord rec;
  rec.doc = std::move(doc);
  for (const auto& [goal, refs] : relevant) {
    rec.goals.push_back(
        make_goal_instance(rec.doc.id, goal, refs, Relevance::relevant));
    script_relevance(rec.doc, rec.goals.back().goal, true);
    std::string joined;
    for (const std::string& r : refs) {
      if (!joined.empty()) joined += ", ";
      joined += r;
    }
    script_generation(rec.doc, rec.goals.back().goal,
                      std::vector<std::string>(static_cast<std::size_t>(k),
                                               joined));
  }
  for (const std::string& goal : irrelevant) {
    rec.goals.push_back(
        make_goal_instance(rec.doc.id, goal, {}, Relevance::irrelevant));
    script_relevance(rec.doc, rec.goals.back().goal, false);
  }
  return rec;
}

Dataset build_dataset() {
  Dataset dataset;

  // d01 carries a split consensus: "crude oil" leads 8 of 10 samples, the
  // other two open with different phrasings, so only "crude oil" survives
  // the saliency threshold.
  Document d01{"d01", "Tanker runs aground off the coast",
               "A loaded tanker ran aground early Monday. Cleanup crews "
               "deployed booms around the hull. Officials said the cargo "
               "was crude oil.",
               Source::custom, Split::test};
  DatasetRecord consensus;
  consensus.doc = d01;
  consensus.goals.push_back(make_goal_instance(
      "d01", "energy source", {"crude oil"}, Relevance::relevant));
  consensus.goals.push_back(
      make_goal_instance("d01", "recipe", {}, Relevance::irrelevant));
  script_relevance(d01, "energy source", true);
  script_relevance(d01, "recipe", false);
  std::vector<std::string> samples(8, "crude oil");
  samples.emplace_back("fossil fuel, petroleum, oil spill");
  samples.emplace_back("fossil fuel, petroleum, oil spill");
  script_generation(d01, "energy source", samples);
  dataset.push_back(std::move(consensus));

  dataset.push_back(labeled_record(
      {"d02", "Hurricane makes landfall near the delta",
       "The storm came ashore before dawn. Forecasters warned of a record "
       "storm surge. Thousands moved to higher ground overnight.",
       Source::custom, Split::test},
      {{"natural disaster", {"hurricane landfall", "storm surge"}}},
      {"recipe"}, 10));
  dataset.push_back(labeled_record(
      {"d03", "Court strikes down the zoning ordinance",
       "The ruling came down Friday. Judges cited the state constitution. "
       "City planners must now redraw the district map.",
       Source::custom, Split::test},
      {{"legal ruling", {"zoning ordinance", "constitutional challenge"}}},
      {"sports event"}, 10));
  dataset.push_back(labeled_record(
      {"d04", "Clinic reports a spike in seasonal flu",
       "Visits doubled in two weeks. Most patients presented with high "
       "fever. Staff urged residents to get vaccinated.",
       Source::custom, Split::test},
      {{"medical condition", {"seasonal flu", "high fever"}}}, {"recipe"},
      10));
  dataset.push_back(labeled_record(
      {"d05", "City bids for the regional games",
       "Organizers filed the paperwork Tuesday. The bid leans on the new "
       "stadium. A decision is expected next spring.",
       Source::custom, Split::test},
      {{"sports event", {"regional games", "stadium bid"}}},
      {"medical condition"}, 10));
  dataset.push_back(labeled_record(
      {"d06", "Central bank floats a digital bond pilot",
       "The pilot starts small. Dealers will settle trades on a shared "
       "ledger. Regulators are watching the settlement times closely.",
       Source::custom, Split::test},
      {{"financial instrument", {"digital bond", "shared ledger settlement"}}},
      {"natural disaster"}, 10));
  dataset.push_back(labeled_record(
      {"d07", "Blight spreads through the orchard belt",
       "Growers reported browning leaves in June. Inspectors confirmed fire "
       "blight in three counties. Crews began pruning infected limbs.",
       Source::custom, Split::test},
      {{"crop disease", {"fire blight", "infected limbs"}}}, {"legal ruling"},
      10));
  dataset.push_back(labeled_record(
      {"d08", "Ferry line adds an overnight crossing",
       "The new schedule starts in May. The overnight crossing cuts the "
       "drive by six hours. Freight operators welcomed the change.",
       Source::custom, Split::test},
      {{"transport mode", {"overnight ferry crossing"}}}, {"crop disease"},
      10));
  dataset.push_back(labeled_record(
      {"d09", "Forecasters track a slow-moving heat dome",
       "Temperatures broke records for a week. The heat dome parked over "
       "the basin. Cooling centers stayed open around the clock.",
       Source::custom, Split::test},
      {{"weather pattern", {"heat dome", "record temperatures"}}},
      {"financial instrument"}, 10));
  dataset.push_back(labeled_record(
      {"d10", "Ministers initial the ports accord",
       "Negotiators met for a final round. The accord trims tariffs at "
       "twelve ports. Ratification votes are scheduled for the fall.",
       Source::custom, Split::test},
      {{"trade agreement", {"ports accord", "tariff reduction"}}},
      {"weather pattern"}, 10));
  return dataset;
}

struct SamplePost {
  std::string id;
  std::string text;
  std::string timestamp;
  std::set<std::string> relevant;  // subset of default_epidemic_goals()
};

std::vector<SamplePost> build_posts() {
  return {
      {"p01", "Two more wards report fever cases this morning.",
       "2022-07-01T08:15:00Z", {"disease infection", "symptom"}},
      {"p02", "City extends the mask order through the month.",
       "2022-07-01T14:40:00Z", {"epidemic prevention"}},
      {"p03", "Dry cough and chills kept me home all day.",
       "2022-07-02T09:05:00Z", {"symptom"}},
      {"p04", "Outbreak map shows the cluster crossing the river district.",
       "2022-07-02T18:30:00Z", {"epidemic spread"}},
      {"p05", "Grandfather finally discharged and back on his feet.",
       "2022-07-03T11:20:00Z", {"recover from disease"}},
      {"p06", "Checkpoint screening slowed the commute but lines moved.",
       "2022-07-03T21:10:00Z", {"epidemic control"}},
      {"p07", "Obituary lists three neighbors lost to the outbreak this week.",
       "2022-07-04T10:00:00Z", {"death from epidemic"}},
      {"p08", "Festival went ahead with no health checks at the gate.",
       "2022-07-04T19:45:00Z", {}},
      {"p09", "New infections doubled in the port quarter overnight.",
       "2022-07-05T07:30:00Z", {"disease infection", "epidemic spread"}},
  };
}

void script_post_judgments(const std::vector<SamplePost>& posts) {
  for (const SamplePost& post : posts) {
    Document doc{post.id, "", post.text, Source::custom, Split::test};
    for (const std::string& goal : default_epidemic_goals())
      script_relevance(doc, goal, post.relevant.count(goal) > 0);
  }
}

struct RawSample {
  std::string id;
  std::string title;
  std::string body;
  std::vector<std::string> keyphrases;
  // category per keyphrase in the proposal turn, then in the refinement turn.
  std::vector<std::string> proposed;
  std::vector<std::string> refined;
};

std::vector<RawSample> build_raw_samples() {
  return {
      {"r01",
       "Dredging reopens the harbor channel",
       "Crews finished dredging on Thursday. The harbor channel reopened to "
       "deep-draft ships. Pilots praised the wider turning basin.",
       {"harbor channel", "turning basin", "gulf coast"},
       {"marine passage", "marine passage", "geographical location"},
       {"waterway", "waterway", "geographical location"}},
      {"r02",
       "Museum restores the colonial archive",
       "Conservators scanned the ledgers page by page. The archive covers "
       "two centuries of port records. A public reading room opens in fall.",
       {"colonial archive", "port records"},
       {"historical collection", "historical collection"},
       {"archive", "archive"}},
  };
}

std::string assignment_json(const std::vector<std::string>& keyphrases,
                            const std::vector<std::string>& categories) {
  json arr = json::array();
  for (std::size_t i = 0; i < keyphrases.size(); ++i)
    arr.push_back({{"keyphrase", keyphrases[i]}, {"category", categories[i]}});
  return arr.dump();
}

void script_benchgen(const std::vector<RawSample>& samples) {
  for (const RawSample& raw : samples) {
    PromptRendering proposal = render_prompt(
        PromptTemplate::goal_proposal,
        {{"title", raw.title},
         {"body", first_sentences(raw.body, 4)},
         {"keyphrases", join_keyphrases(raw.keyphrases)}});
    std::vector<ChatMessage> chat{{"user", proposal.filled_text}};
    std::string proposal_answer = assignment_json(raw.keyphrases, raw.proposed);
    fixture[prompt_digest(chat)] = json::array({proposal_answer});

    chat.push_back({"assistant", proposal_answer});
    chat.push_back({"user", render_prompt(PromptTemplate::goal_refinement, {})
                                .filled_text});
    fixture[prompt_digest(chat)] =
        json::array({assignment_json(raw.keyphrases, raw.refined)});
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path out_dir = argc > 1 ? argv[1] : "data";
  std::filesystem::create_directories(out_dir);

  Dataset dataset = build_dataset();
  save_dataset(out_dir / "sample_dataset.jsonl", dataset);

  std::vector<SamplePost> posts = build_posts();
  script_post_judgments(posts);
  std::string post_lines, judgment_lines;
  for (const SamplePost& post : posts) {
    post_lines += json{{"id", post.id},
                       {"text", post.text},
                       {"timestamp", post.timestamp}}
                      .dump() +
                  "\n";
    for (const std::string& goal : default_epidemic_goals())
      judgment_lines += json{{"post_id", post.id},
                             {"goal", goal},
                             {"relevant", post.relevant.count(goal) > 0}}
                            .dump() +
                        "\n";
  }
  atomic_write_file(out_dir / "sample_posts.jsonl", post_lines);
  atomic_write_file(out_dir / "sample_judgments.jsonl", judgment_lines);

  std::vector<RawSample> raw_samples = build_raw_samples();
  script_benchgen(raw_samples);
  std::string raw_lines;
  for (const RawSample& raw : raw_samples)
    raw_lines += json{{"id", raw.id},
                      {"title", raw.title},
                      {"body", raw.body},
                      {"keyphrases", raw.keyphrases}}
                     .dump() +
                 "\n";
  atomic_write_file(out_dir / "sample_raw_keyphrases.jsonl", raw_lines);

  RunConfig cfg;
  cfg.dataset_path = "data/sample_dataset.jsonl";
  atomic_write_file(out_dir / "sample_config.json",
                    config_to_json(cfg).dump(2) + "\n");

  atomic_write_file(out_dir / "mock_fixture.json", fixture.dump(2) + "\n");

  std::printf("wrote %zu dataset records, %zu posts, %zu raw documents, and "
              "%zu fixture entries to %s\n",
              dataset.size(), posts.size(), raw_samples.size(), fixture.size(),
              out_dir.string().c_str());
  return 0;
}
