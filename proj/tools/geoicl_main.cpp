// geoicl: retrieval-augmented meta in-context learning pipeline for
// geometry question answering. One subcommand per pipeline stage; all
// machine-readable output is JSON on stdout, logs go to stderr.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "geoicl/pipeline.hpp"
#include "geoicl/util.hpp"

namespace {

using geoicl::PipelineConfig;
using nlohmann::json;
using nlohmann::ordered_json;

struct CommonFlags {
  std::string config_path;
  std::string summary_out;
};

void add_common(CLI::App* cmd, PipelineConfig& cfg, CommonFlags& flags,
                bool summary_out = true) {
  cmd->add_option("--config", flags.config_path,
                  "Pipeline config JSON (flags override fields)");
  cmd->add_option("--data", cfg.dataset_path, "Dataset JSONL path");
  cmd->add_option("--image-root", cfg.image_root,
                  "Directory image paths resolve against");
  cmd->add_option("--out-dir", cfg.out_dir, "Artifact output directory");
  if (summary_out)
    cmd->add_option("--out", flags.summary_out,
                    "Write the summary JSON here instead of stdout");
  cmd->add_flag("--lenient", cfg.lenient,
                "Report-and-skip invalid records instead of failing fast");
  cmd->add_flag("--dry-run", cfg.dry_run, "Validate inputs without writing");
}

// Config file first, then flag overrides on top.
void finalize_config(const CLI::App* cmd, PipelineConfig& cfg,
                     const CommonFlags& flags, const PipelineConfig& defaults) {
  if (flags.config_path.empty()) return;
  PipelineConfig from_file = geoicl::load_pipeline_config(flags.config_path);
  PipelineConfig merged = from_file;

  // A flag the user actually passed beats the file.
  const auto passed = [&](const std::string& name) {
    return cmd->count(name) > 0;
  };
  if (passed("--data")) merged.dataset_path = cfg.dataset_path;
  if (passed("--image-root")) merged.image_root = cfg.image_root;
  if (passed("--out-dir")) merged.out_dir = cfg.out_dir;
  if (passed("--lenient")) merged.lenient = cfg.lenient;
  if (passed("--dry-run")) merged.dry_run = cfg.dry_run;
  merged.checkpoint_override = cfg.checkpoint_override;

  // Non-common flags were written straight into cfg; keep any that differ
  // from the built-in defaults.
  if (cfg.trainer.epochs != defaults.trainer.epochs)
    merged.trainer.epochs = cfg.trainer.epochs;
  if (cfg.trainer.learning_rate != defaults.trainer.learning_rate)
    merged.trainer.learning_rate = cfg.trainer.learning_rate;
  if (cfg.trainer.seed != defaults.trainer.seed)
    merged.trainer.seed = cfg.trainer.seed;
  if (cfg.trainer.batch_size != defaults.trainer.batch_size)
    merged.trainer.batch_size = cfg.trainer.batch_size;
  if (cfg.infonce.temperature != defaults.infonce.temperature)
    merged.infonce.temperature = cfg.infonce.temperature;
  if (cfg.meta.k != defaults.meta.k) merged.meta.k = cfg.meta.k;
  if (cfg.meta.fan_out != defaults.meta.fan_out)
    merged.meta.fan_out = cfg.meta.fan_out;
  if (cfg.augment_n != defaults.augment_n) merged.augment_n = cfg.augment_n;
  if (cfg.augment_backend_url != defaults.augment_backend_url)
    merged.augment_backend_url = cfg.augment_backend_url;
  if (cfg.eval_mock != defaults.eval_mock) merged.eval_mock = cfg.eval_mock;
  if (cfg.eval_backend_url != defaults.eval_backend_url)
    merged.eval_backend_url = cfg.eval_backend_url;
  if (cfg.eval_seed != defaults.eval_seed) merged.eval_seed = cfg.eval_seed;
  if (cfg.eval.split != defaults.eval.split) merged.eval.split = cfg.eval.split;
  if (cfg.eval.include_proving != defaults.eval.include_proving)
    merged.eval.include_proving = cfg.eval.include_proving;
  if (cfg.eval.lenient != defaults.eval.lenient)
    merged.eval.lenient = cfg.eval.lenient;

  cfg = merged;
}

void emit_summary(const json& summary, const CommonFlags& flags) {
  if (flags.summary_out.empty()) {
    std::cout << summary.dump(2) << '\n';
    return;
  }
  std::ofstream out(flags.summary_out, std::ios::trunc);
  if (!out)
    throw geoicl::Error("Io", "cannot write " + flags.summary_out);
  out << summary.dump(2) << '\n';
}

int fail(const geoicl::Error& e) {
  ordered_json err{{"error", {{"type", e.kind()}, {"message", e.message()}}}};
  std::cout << err.dump(2) << '\n';
  std::cerr << "error: " << e.what() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented meta in-context learning pipeline for "
               "geometry QA"};
  app.require_subcommand(1);

  PipelineConfig cfg;
  const PipelineConfig defaults;
  CommonFlags flags;

  auto* ingest = app.add_subcommand(
      "ingest", "Validate a dataset and write the canonical JSONL");
  add_common(ingest, cfg, flags);

  auto* stats = app.add_subcommand("stats", "Dataset statistics table");
  add_common(stats, cfg, flags);

  bool audit = false;
  auto* normalize =
      app.add_subcommand("normalize", "Rewrite math symbols into words");
  add_common(normalize, cfg, flags);
  normalize->add_option("--table", cfg.normalizer_table,
                        "Symbol table TSV (pattern<TAB>replacement)");
  normalize->add_flag("--audit", audit, "Report unmapped non-ASCII symbols");

  auto* embed = app.add_subcommand(
      "embed", "Base text/image embeddings for every record");
  add_common(embed, cfg, flags);

  std::string pairs_path;
  auto* train = app.add_subcommand("train-retriever",
                                   "Train the adapter towers with InfoNCE");
  add_common(train, cfg, flags, /*summary_out=*/false);
  train->add_option("--pairs", pairs_path, "Pairs JSONL from `embed`");
  train->add_option("--epochs", cfg.trainer.epochs, "Training epochs");
  train->add_option("--lr", cfg.trainer.learning_rate, "Learning rate");
  train->add_option("--temp", cfg.infonce.temperature, "InfoNCE temperature");
  train->add_option("--seed", cfg.trainer.seed, "RNG seed");
  train->add_option("--batch", cfg.trainer.batch_size, "Batch size");
  train->add_option("--out", cfg.checkpoint_override,
                    "Checkpoint output path");

  auto* build_index = app.add_subcommand(
      "build-index", "Exact cosine index over adapted train embeddings");
  add_common(build_index, cfg, flags);

  auto* build_meta = app.add_subcommand(
      "build-meta", "Compose meta-training samples with merged images");
  add_common(build_meta, cfg, flags);
  build_meta->add_option("--k", cfg.meta.k, "Context exemplars per sample");
  bool stack = false;
  build_meta->add_flag("--stack", stack,
                       "One k-exemplar sample per record instead of fan-out");

  auto* augment =
      app.add_subcommand("augment", "Paraphrase-expand the dataset (n+1)x");
  add_common(augment, cfg, flags);
  augment->add_option("--n", cfg.augment_n, "Paraphrases per record");
  augment->add_option("--backend", cfg.augment_backend_url,
                      "Paraphrase service URL (default: offline stub)");

  bool with_icl = false;
  auto* eval = app.add_subcommand("eval", "Grade a split against a backend");
  add_common(eval, cfg, flags);
  eval->add_flag("--icl", with_icl, "Compose retrieved context into prompts");
  eval->add_option("--mock", cfg.eval_mock,
                   "Offline backend: gold-oracle | copy-context | random");
  eval->add_option("--backend", cfg.eval_backend_url, "LMM service URL");
  eval->add_option("--seed", cfg.eval_seed, "Seed for the random mock");
  std::string eval_split;
  eval->add_option("--split", eval_split, "Split to grade (val|test)");
  eval->add_flag("--include-proving", cfg.eval.include_proving,
                 "Grade proving questions by exact target match");

  auto* compare = app.add_subcommand(
      "compare-icl", "Paired with/without-ICL evaluation and delta");
  add_common(compare, cfg, flags);
  compare->add_option("--mock", cfg.eval_mock,
                      "Offline backend: gold-oracle | copy-context | random");
  compare->add_option("--backend", cfg.eval_backend_url, "LMM service URL");
  compare->add_option("--seed", cfg.eval_seed, "Seed for the random mock");
  std::string compare_split;
  compare->add_option("--split", compare_split, "Split to grade (val|test)");

  auto* emit = app.add_subcommand("emit-finetune-config",
                                  "LoRA fine-tune settings for the backbone");
  add_common(emit, cfg, flags);

  std::string query_id;
  std::size_t query_k = 5;
  bool include_self = false;
  auto* query = app.add_subcommand("query", "Nearest neighbors of an indexed id");
  add_common(query, cfg, flags);
  query->add_option("--id", query_id, "Query record id")->required();
  query->add_option("--k", query_k, "Neighbors to return");
  query->add_flag("--include-self", include_self,
                  "Keep the query record in its own results");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    finalize_config(active, cfg, flags, defaults);
    if (!eval_split.empty()) cfg.eval.split = geoicl::split_from_string(eval_split);
    if (!compare_split.empty())
      cfg.eval.split = geoicl::split_from_string(compare_split);
    if (stack) cfg.meta.fan_out = false;

    json summary;
    if (active == ingest) summary = geoicl::stage_ingest(cfg);
    else if (active == stats) {
      summary = geoicl::stage_stats(cfg);
      std::cerr << summary.at("table").get<std::string>();
    } else if (active == normalize) summary = geoicl::stage_normalize(cfg, audit);
    else if (active == embed) summary = geoicl::stage_embed(cfg);
    else if (active == train) summary = geoicl::stage_train(cfg, pairs_path);
    else if (active == build_index) summary = geoicl::stage_build_index(cfg);
    else if (active == build_meta) summary = geoicl::stage_build_meta(cfg);
    else if (active == augment) summary = geoicl::stage_augment(cfg);
    else if (active == eval) summary = geoicl::stage_eval(cfg, with_icl);
    else if (active == compare) {
      summary = geoicl::stage_compare_icl(cfg);
      if (summary.contains("table"))
        std::cerr << summary.at("table").get<std::string>();
    } else if (active == emit) summary = geoicl::stage_emit_finetune_config(cfg);
    else if (active == query)
      summary = geoicl::stage_query(cfg, query_id, query_k, include_self);

    emit_summary(summary, flags);
    return 0;
  } catch (const geoicl::Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    return fail(geoicl::Error("Internal", e.what()));
  }
}
