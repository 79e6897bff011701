#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "goalkp/goalkp.hpp"
#include "goalkp/llm_http.hpp"
#include "goalkp/similarity_endpoint.hpp"

namespace {

using namespace goalkp;

// Options shared by every subcommand.
struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string cache_dir;
  std::string mock_fixture;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Run configuration JSON file");
  cmd->add_option("--seed", opts.seed, "Override the config RNG seed");
  cmd->add_option("--cache-dir", opts.cache_dir,
                  "Override the response cache directory");
  cmd->add_option("--mock", opts.mock_fixture,
                  "Scripted transport fixture (JSON digest -> responses)");
}

RunConfig effective_config(const CommonOpts& opts) {
  RunConfig cfg =
      opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  if (opts.seed) cfg.rng_seed = *opts.seed;
  if (!opts.cache_dir.empty()) cfg.cache_dir = opts.cache_dir;
  validate_config(cfg);
  return cfg;
}

std::unique_ptr<ChatTransport> make_transport(const CommonOpts& opts) {
  if (!opts.mock_fixture.empty())
    return std::make_unique<ScriptedTransport>(
        ScriptedTransport::from_file(opts.mock_fixture));
  return std::make_unique<HttpTransport>(HttpTransport::from_env());
}

std::unique_ptr<SimilarityBackend> make_backend(const RunConfig& cfg) {
  if (cfg.backend == BackendKind::endpoint)
    return std::make_unique<EndpointBackend>(cfg.endpoint_url, "/embed",
                                             cfg.endpoint_dim);
  return std::make_unique<TrigramBackend>();
}

std::string require_dataset(const std::string& flag_value,
                            const RunConfig& cfg) {
  if (!flag_value.empty()) return flag_value;
  if (!cfg.dataset_path.empty()) return cfg.dataset_path;
  throw ValidationError("no dataset: pass --dataset or set dataset_path in the config");
}

int run(int argc, char** argv) {
  CLI::App app{"On-demand keyphrase generation toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string dataset_path, out_path, out_dir = ".";
  std::string predictions_path, raw_path, rules_path, posts_path;
  std::string judgments_path, dataset_name, goals_csv;
  bool plot = false;

  CLI::App* stats = app.add_subcommand("stats", "Dataset statistics table");
  stats->add_option("--dataset", dataset_path, "Dataset JSONL file");
  stats->add_option("--out", out_path, "Write the table here instead of stdout");
  add_common(stats, opts);

  CLI::App* judge =
      app.add_subcommand("judge", "Relevance judgment for every goal instance");
  judge->add_option("--dataset", dataset_path, "Dataset JSONL file");
  judge->add_option("--out", out_path, "Predictions JSONL output")->required();
  add_common(judge, opts);

  CLI::App* generate = app.add_subcommand(
      "generate", "Judgment plus self-consistency keyphrase generation");
  generate->add_option("--dataset", dataset_path, "Dataset JSONL file");
  generate->add_option("--out", out_path, "Predictions JSONL output")->required();
  add_common(generate, opts);

  CLI::App* eval = app.add_subcommand("eval", "Score predictions against labels");
  eval->add_option("--dataset", dataset_path, "Dataset JSONL file");
  eval->add_option("--predictions", predictions_path, "Predictions JSONL file")
      ->required();
  eval->add_option("--out-dir", out_dir, "Directory for report.tsv and per_goal.jsonl");
  eval->add_option("--dataset-name", dataset_name,
                   "Dataset label in the report (default: file stem)");
  add_common(eval, opts);

  CLI::App* negatives = app.add_subcommand(
      "sample-negatives", "Augment a dataset with sampled irrelevant goals");
  negatives->add_option("--dataset", dataset_path, "Dataset JSONL file");
  negatives->add_option("--out", out_path, "Augmented dataset JSONL output")
      ->required();
  add_common(negatives, opts);

  CLI::App* export_train = app.add_subcommand(
      "export-train", "Export goal <eog> training sequences");
  export_train->add_option("--dataset", dataset_path, "Dataset JSONL file");
  export_train->add_option("--out", out_path, "Sequences JSONL output")
      ->required();
  add_common(export_train, opts);

  CLI::App* benchgen = app.add_subcommand(
      "benchgen", "Annotate raw keyphrase documents with goals");
  benchgen->add_option("--raw", raw_path, "Raw JSONL: {id,title,body,keyphrases}")
      ->required();
  benchgen->add_option("--rules", rules_path, "Goal rewrite rules JSON");
  benchgen->add_option("--out", out_path, "Dataset JSONL output")->required();
  add_common(benchgen, opts);

  CLI::App* events = app.add_subcommand(
      "events", "Per-goal trend series over timestamped posts");
  events->add_option("--posts", posts_path, "Posts JSONL: {id,text,timestamp}")
      ->required();
  events->add_option("--goals", goals_csv,
                     "Comma-separated goal list (default: epidemic goals)");
  events->add_option("--judgments", judgments_path,
                     "Precomputed {post_id,goal,relevant} JSONL instead of the LLM");
  events->add_option("--out-dir", out_dir, "Directory for trend files");
  events->add_flag("--plot", plot, "Also render trends.svg");
  add_common(events, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  RunConfig cfg = effective_config(opts);
  ResponseCache cache(cfg.cache_dir);

  if (stats->parsed()) {
    Dataset dataset = load_dataset(require_dataset(dataset_path, cfg));
    std::string table = stats_table(compute_stats(dataset));
    if (out_path.empty())
      std::cout << table;
    else
      atomic_write_file(out_path, table);
    return 0;
  }

  if (judge->parsed() || generate->parsed()) {
    Dataset dataset = load_dataset(require_dataset(dataset_path, cfg));
    auto transport = make_transport(opts);
    std::vector<PredictionRecord> predictions =
        judge->parsed() ? run_judge(dataset, cfg, cache, *transport)
                        : run_generate(dataset, cfg, cache, *transport);
    save_predictions(out_path, predictions);
    std::cerr << "wrote " << predictions.size() << " prediction records to "
              << out_path << "\n";
    return 0;
  }

  if (eval->parsed()) {
    Dataset dataset = load_dataset(require_dataset(dataset_path, cfg));
    std::vector<PredictionRecord> predictions =
        load_predictions(predictions_path);
    auto backend = make_backend(cfg);
    EvalReport report =
        evaluate_run(predictions, dataset, *backend, cfg.sr_threshold);
    if (dataset_name.empty())
      dataset_name =
          std::filesystem::path(require_dataset(dataset_path, cfg)).stem().string();
    EvalOutputs outputs =
        write_eval_outputs(report, dataset_name, cfg.model_name, out_dir);
    std::cout << report_tsv(report, dataset_name, cfg.model_name);
    std::cerr << "wrote " << outputs.report_tsv << " and "
              << outputs.per_goal_jsonl << "\n";
    return 0;
  }

  if (negatives->parsed()) {
    Dataset dataset = load_dataset(require_dataset(dataset_path, cfg));
    auto backend = make_backend(cfg);
    NegativeAugmentation augmented =
        run_sample_negatives(dataset, *backend, cfg);
    save_dataset(out_path, augmented.dataset);
    for (const auto& [doc_id, anchor] : augmented.fallback_log)
      std::cerr << "fallback sampling for doc " << doc_id << ", anchor \""
                << anchor << "\"\n";
    std::cerr << "wrote augmented dataset to " << out_path << "\n";
    return 0;
  }

  if (export_train->parsed()) {
    Dataset dataset = load_dataset(require_dataset(dataset_path, cfg));
    std::vector<TrainSequence> sequences = export_train_sequences(dataset);
    atomic_write_file(out_path, serialize_train_sequences(sequences));
    std::cerr << "wrote " << sequences.size() << " sequences to " << out_path
              << "\n";
    return 0;
  }

  if (benchgen->parsed()) {
    std::vector<RawKeyphraseDoc> raw = load_raw_keyphrase_docs(raw_path);
    GoalRewriteRules rules =
        rules_path.empty() ? GoalRewriteRules{} : load_rewrite_rules(rules_path);
    auto transport = make_transport(opts);
    Dataset dataset = run_benchgen(raw, rules, cfg, cache, *transport);
    save_dataset(out_path, dataset);
    std::cerr << "wrote " << dataset.size() << " annotated documents to "
              << out_path << "\n";
    return 0;
  }

  if (events->parsed()) {
    std::vector<TimestampedPost> posts = load_posts(posts_path);
    std::vector<std::string> goals;
    if (goals_csv.empty()) {
      goals = default_epidemic_goals();
    } else {
      for (std::string_view piece : split(goals_csv, ','))
        if (!trim_view(piece).empty()) goals.push_back(trim(piece));
      if (goals.empty())
        throw ValidationError("--goals parsed to an empty list");
    }
    std::unique_ptr<ChatTransport> transport;
    RelevanceJudge judge_fn;
    if (!judgments_path.empty()) {
      judge_fn = make_file_judge(load_judgments(judgments_path));
    } else {
      transport = make_transport(opts);
      judge_fn = make_llm_judge(cfg, cache, *transport);
    }
    TrendReport report = build_trends(
        posts, goals, judge_fn, static_cast<std::size_t>(cfg.concurrency_limit));
    std::filesystem::path dir(out_dir);
    atomic_write_file(dir / "trends.tsv", trends_tsv(report));
    atomic_write_file(dir / "trends.csv", trends_csv_matrix(report));
    if (plot) atomic_write_file(dir / "trends.svg", trends_svg(report));
    for (const SkippedJudgment& s : report.skipped)
      std::cerr << "skipped post " << s.post_id << ", goal \"" << s.goal
                << "\": " << s.reason << "\n";
    std::cerr << "wrote trend files to " << out_dir << " ("
              << report.skipped.size() << " judgments skipped)\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const goalkp::TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return 3;
  } catch (const goalkp::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
