#include "geoicl/pipeline.hpp"

#include <fstream>

#include "geoicl/png_io.hpp"
#include "geoicl/util.hpp"

namespace geoicl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace fs = std::filesystem;

fs::path PipelineConfig::canonical_path() const {
  return fs::path(out_dir) / "canonical.jsonl";
}
fs::path PipelineConfig::normalized_path() const {
  return fs::path(out_dir) / "normalized.jsonl";
}
fs::path PipelineConfig::pairs_path() const {
  return fs::path(out_dir) / "pairs.jsonl";
}
fs::path PipelineConfig::checkpoint_path() const {
  if (!checkpoint_override.empty()) return checkpoint_override;
  return fs::path(out_dir) / "retriever.ckpt.json";
}
fs::path PipelineConfig::train_report_path() const {
  return fs::path(out_dir) / "train_report.json";
}
fs::path PipelineConfig::loss_curve_path() const {
  return fs::path(out_dir) / "loss_curve.csv";
}
fs::path PipelineConfig::index_path() const {
  return fs::path(out_dir) / "index.json";
}
fs::path PipelineConfig::meta_jsonl_path() const {
  return fs::path(out_dir) / "meta" / "meta.jsonl";
}
fs::path PipelineConfig::meta_image_dir() const {
  return fs::path(out_dir) / "meta" / "images";
}
fs::path PipelineConfig::augmented_path() const {
  return fs::path(out_dir) / "augmented.jsonl";
}
fs::path PipelineConfig::finetune_config_path() const {
  return fs::path(out_dir) / "finetune_config.json";
}
fs::path PipelineConfig::eval_result_path(bool icl) const {
  return fs::path(out_dir) / (icl ? "eval_icl" : "eval_noicl");
}

fs::path PipelineConfig::resolved_image_root() const {
  if (!image_root.empty()) return image_root;
  return fs::path(dataset_path).parent_path();
}

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Split split_field(const json& j, const char* key, Split fallback) {
  if (!j.contains(key)) return fallback;
  return split_from_string(j.at(key).get<std::string>());
}

}  // namespace

void apply_config_json(PipelineConfig& cfg, const json& j) {
  read_field(j, "dataset", cfg.dataset_path);
  read_field(j, "image_root", cfg.image_root);
  read_field(j, "out_dir", cfg.out_dir);
  read_field(j, "normalizer_table", cfg.normalizer_table);
  read_field(j, "lenient", cfg.lenient);

  if (j.contains("featurizer")) {
    const auto& f = j.at("featurizer");
    read_field(f, "text_buckets", cfg.featurizer.text.buckets);
    read_field(f, "ngram_min", cfg.featurizer.text.ngram_min);
    read_field(f, "ngram_max", cfg.featurizer.text.ngram_max);
    read_field(f, "image_grid", cfg.featurizer.image.grid);
    read_field(f, "image_channels", cfg.featurizer.image.channels);
  }
  if (j.contains("trainer")) {
    const auto& t = j.at("trainer");
    read_field(t, "learning_rate", cfg.trainer.learning_rate);
    read_field(t, "batch_size", cfg.trainer.batch_size);
    read_field(t, "epochs", cfg.trainer.epochs);
    read_field(t, "seed", cfg.trainer.seed);
    read_field(t, "momentum", cfg.trainer.momentum);
    read_field(t, "shuffle", cfg.trainer.shuffle);
    read_field(t, "hidden1", cfg.trainer.hidden1);
    read_field(t, "hidden2", cfg.trainer.hidden2);
    read_field(t, "d_shared", cfg.trainer.d_shared);
    if (t.contains("optimizer")) {
      const auto name = t.at("optimizer").get<std::string>();
      if (name == "sgd")
        cfg.trainer.optimizer = Optimizer::Sgd;
      else if (name == "momentum")
        cfg.trainer.optimizer = Optimizer::MomentumSgd;
      else
        throw Error("InvalidArgument", "unknown optimizer: " + name);
    }
  }
  if (j.contains("infonce")) {
    const auto& i = j.at("infonce");
    read_field(i, "temperature", cfg.infonce.temperature);
    read_field(i, "symmetric", cfg.infonce.symmetric);
  }
  if (j.contains("meta")) {
    const auto& m = j.at("meta");
    read_field(m, "k", cfg.meta.k);
    read_field(m, "include_steps", cfg.meta.include_steps);
    read_field(m, "fan_out", cfg.meta.fan_out);
    if (m.contains("pad_value"))
      cfg.meta.pad_value = static_cast<std::uint8_t>(m.at("pad_value").get<int>());
    if (m.contains("template")) {
      const auto& t = m.at("template");
      read_field(t, "image_token", cfg.meta.prompt.image_token);
      read_field(t, "question_prefix", cfg.meta.prompt.question_prefix);
      read_field(t, "solution_prefix", cfg.meta.prompt.solution_prefix);
      read_field(t, "answer_delimiter", cfg.meta.prompt.answer_delimiter);
      read_field(t, "block_separator", cfg.meta.prompt.block_separator);
    }
  }
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    read_field(a, "n", cfg.augment_n);
    read_field(a, "backend_url", cfg.augment_backend_url);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    cfg.eval.split = split_field(e, "split", cfg.eval.split);
    read_field(e, "dataset_name", cfg.eval.dataset_name);
    read_field(e, "lenient", cfg.eval.lenient);
    read_field(e, "include_proving", cfg.eval.include_proving);
    read_field(e, "max_new_tokens", cfg.eval.max_new_tokens);
    read_field(e, "backend_url", cfg.eval_backend_url);
    read_field(e, "mock", cfg.eval_mock);
    read_field(e, "seed", cfg.eval_seed);
  }
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("Io", "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("InvalidArgument", std::string("bad config JSON: ") + e.what());
  }
  PipelineConfig cfg;
  apply_config_json(cfg, j);
  return cfg;
}

namespace {

Dataset load_canonical(const PipelineConfig& cfg, const fs::path& path) {
  LoadOptions opts;
  opts.lenient = cfg.lenient;
  opts.image_root = cfg.resolved_image_root().string();
  return load_dataset(path, kDatasetSchemaVersion, opts).records;
}

SymbolTable table_for(const PipelineConfig& cfg) {
  if (cfg.normalizer_table.empty()) return default_symbol_table();
  return load_symbol_table(cfg.normalizer_table);
}

ImageProvider image_provider_for(const PipelineConfig& cfg) {
  const fs::path root = cfg.resolved_image_root();
  return [root](const GeoRecord& rec) { return load_image(rec, root); };
}

void ensure_out_dir(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
}

ordered_json stats_to_json(const DatasetStats& stats) {
  static constexpr Source kOrder[] = {Source::GeoQAPlus, Source::PGPS9K,
                                      Source::UniGeo, Source::GeoMath};
  static constexpr QuestionType kTypes[] = {
      QuestionType::Selection, QuestionType::Cloze, QuestionType::Proving};
  ordered_json per_source;
  for (Source s : kOrder) {
    ordered_json row;
    for (QuestionType t : kTypes) {
      row[std::string(to_string(t))] =
          ordered_json{{"total", stats.count(s, t)},
                       {"test", stats.count_test(s, t)}};
    }
    row["image_text_pairs"] =
        ordered_json{{"total", stats.image_text_pairs[static_cast<int>(s)]},
                     {"test", stats.image_text_pairs_test[static_cast<int>(s)]}};
    per_source[std::string(to_string(s))] = std::move(row);
  }
  return ordered_json{{"total", stats.total},
                      {"synthetic", stats.synthetic},
                      {"sources", per_source}};
}

struct LoadedPairs {
  std::vector<EmbeddingPair> train;
  std::vector<EmbeddingPair> val;
};

LoadedPairs read_pairs_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("Io", "cannot open pairs file " + path.string());
  LoadedPairs out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw MalformedRecordError(line_no, e.what());
    }
    EmbeddingPair pair;
    pair.id = j.at("id").get<std::string>();
    auto tv = j.at("text").get<std::vector<double>>();
    auto iv = j.at("image").get<std::vector<double>>();
    pair.text = Eigen::Map<const Vector>(tv.data(),
                                         static_cast<Eigen::Index>(tv.size()));
    pair.image = Eigen::Map<const Vector>(iv.data(),
                                          static_cast<Eigen::Index>(iv.size()));
    const Split split = split_from_string(j.at("split").get<std::string>());
    if (split == Split::Train)
      out.train.push_back(std::move(pair));
    else if (split == Split::Val)
      out.val.push_back(std::move(pair));
  }
  return out;
}

EvalContext make_eval_context(const PipelineConfig& cfg) {
  EvalContext ctx;
  ctx.dataset = load_canonical(cfg, cfg.normalized_path());
  ctx.table = table_for(cfg);
  ctx.ckpt = load_checkpoint(cfg.checkpoint_path());
  ctx.index = load_index(cfg.index_path());
  ctx.meta = cfg.meta;
  ctx.images = image_provider_for(cfg);
  return ctx;
}

std::unique_ptr<LMMClient> make_eval_client(const PipelineConfig& cfg,
                                            const Dataset& dataset) {
  if (!cfg.eval_backend_url.empty())
    return std::make_unique<HttpLMMClient>(cfg.eval_backend_url);
  return make_mock_client(cfg.eval_mock, dataset, cfg.eval_seed);
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("Io", "cannot write " + path.string());
  out << content;
}

}  // namespace

std::unique_ptr<LMMClient> make_mock_client(const std::string& name,
                                            const Dataset& dataset,
                                            std::uint64_t seed) {
  if (name == "gold-oracle") return std::make_unique<GoldOracleClient>(dataset);
  if (name == "copy-context") return std::make_unique<CopyContextClient>(dataset);
  if (name == "random")
    return std::make_unique<RandomAnswerClient>(dataset, seed);
  throw Error("InvalidArgument", "unknown mock backend: " + name);
}

json stage_ingest(const PipelineConfig& cfg) {
  LoadOptions opts;
  opts.lenient = cfg.lenient;
  opts.image_root = cfg.resolved_image_root().string();
  LoadResult loaded = load_dataset(cfg.dataset_path, kDatasetSchemaVersion, opts);

  ordered_json skipped = ordered_json::array();
  for (const auto& issue : loaded.skipped)
    skipped.push_back(ordered_json{{"line", issue.line}, {"reason", issue.reason}});

  ordered_json summary{{"schema", "geoicl/ingest/v1"},
                       {"records", loaded.records.size()},
                       {"skipped", skipped},
                       {"stats", stats_to_json(compute_stats(loaded.records))}};
  if (cfg.dry_run) {
    summary["dry_run"] = true;
    return summary;
  }
  ensure_out_dir(cfg);
  write_dataset(loaded.records, cfg.canonical_path());
  summary["out"] = cfg.canonical_path().string();
  return summary;
}

json stage_stats(const PipelineConfig& cfg, const std::string& dataset_override) {
  const fs::path path = dataset_override.empty() ? fs::path(cfg.dataset_path)
                                                 : fs::path(dataset_override);
  LoadOptions opts;
  opts.lenient = cfg.lenient;
  opts.image_root =
      cfg.image_root.empty() ? path.parent_path().string() : cfg.image_root;
  Dataset dataset = load_dataset(path, kDatasetSchemaVersion, opts).records;
  DatasetStats stats = compute_stats(dataset);
  ordered_json summary{{"schema", "geoicl/stats/v1"},
                       {"dataset", path.string()},
                       {"stats", stats_to_json(stats)},
                       {"table", render_stats_table(stats)}};
  return summary;
}

json stage_normalize(const PipelineConfig& cfg, bool audit) {
  SymbolTable table = table_for(cfg);
  Dataset dataset = load_canonical(cfg, cfg.canonical_path());
  Dataset normalized = normalize_dataset(std::move(dataset), table);

  ordered_json summary{{"schema", "geoicl/normalize/v1"},
                       {"records", normalized.size()}};
  if (audit) {
    ordered_json unmapped = ordered_json::array();
    for (const auto& sc : audit_vocabulary(normalized, table))
      unmapped.push_back(ordered_json{{"symbol", sc.symbol}, {"count", sc.count}});
    summary["unmapped_symbols"] = unmapped;
  }
  if (cfg.dry_run) {
    summary["dry_run"] = true;
    return summary;
  }
  ensure_out_dir(cfg);
  write_dataset(normalized, cfg.normalized_path());
  summary["out"] = cfg.normalized_path().string();
  return summary;
}

json stage_embed(const PipelineConfig& cfg) {
  Dataset dataset = load_canonical(cfg, cfg.normalized_path());
  const ImageProvider images = image_provider_for(cfg);
  const SymbolTable table = table_for(cfg);

  ordered_json summary{{"schema", "geoicl/embed/v1"},
                       {"records", dataset.size()},
                       {"text_dim", cfg.featurizer.text.buckets},
                       {"image_dim", cfg.featurizer.image.grid *
                                         cfg.featurizer.image.grid *
                                         cfg.featurizer.image.channels * 2}};
  if (cfg.dry_run) {
    summary["dry_run"] = true;
    return summary;
  }
  ensure_out_dir(cfg);
  std::ofstream out(cfg.pairs_path(), std::ios::trunc);
  if (!out) throw Error("Io", "cannot write " + cfg.pairs_path().string());
  for (const auto& rec : dataset) {
    const std::string& q =
        rec.question_norm.empty() ? normalize(rec.question_raw, table)
                                  : rec.question_norm;
    Vector text = text_base_embed(q, cfg.featurizer.text);
    Vector image = image_base_embed(images(rec), cfg.featurizer.image);
    ordered_json j;
    j["id"] = rec.id;
    j["split"] = to_string(rec.split);
    j["text"] = std::vector<double>(text.data(), text.data() + text.size());
    j["image"] = std::vector<double>(image.data(), image.data() + image.size());
    out << j.dump() << '\n';
  }
  summary["out"] = cfg.pairs_path().string();
  return summary;
}

json stage_train(const PipelineConfig& cfg, const std::string& pairs_override) {
  const fs::path pairs_path =
      pairs_override.empty() ? cfg.pairs_path() : fs::path(pairs_override);
  LoadedPairs pairs = read_pairs_file(pairs_path);
  if (pairs.train.empty())
    throw Error("InvalidArgument", "no train pairs in " + pairs_path.string());

  ordered_json summary{{"schema", "geoicl/train/v1"},
                       {"train_pairs", pairs.train.size()},
                       {"val_pairs", pairs.val.size()}};
  if (cfg.dry_run) {
    summary["dry_run"] = true;
    return summary;
  }

  TrainOutputs trained = train_retriever(
      pairs.train, cfg.trainer, cfg.infonce,
      pairs.val.empty() ? nullptr : &pairs.val);

  ensure_out_dir(cfg);
  RetrieverCheckpoint ckpt;
  ckpt.seed = cfg.trainer.seed;
  ckpt.text = trained.text;
  ckpt.image = trained.image;
  ckpt.featurizer = cfg.featurizer;
  save_checkpoint(ckpt, cfg.checkpoint_path());

  ordered_json report{{"schema", "geoicl/train-report/v1"},
                      {"epochs", trained.report.epoch_loss.size()},
                      {"epoch_loss", trained.report.epoch_loss},
                      {"final_loss", trained.report.epoch_loss.empty()
                                         ? 0.0
                                         : trained.report.epoch_loss.back()},
                      {"recall_at_1", trained.report.recall_at_1},
                      {"recall_at_5", trained.report.recall_at_5},
                      {"wall_time_sec", trained.report.wall_time_sec}};
  write_text(cfg.train_report_path(), report.dump(2) + "\n");

  std::ostringstream csv;
  csv << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < trained.report.epoch_loss.size(); ++e)
    csv << e << ',' << format_double(trained.report.epoch_loss[e]) << '\n';
  write_text(cfg.loss_curve_path(), csv.str());

  summary["checkpoint"] = cfg.checkpoint_path().string();
  summary["report"] = report;
  return summary;
}

json stage_build_index(const PipelineConfig& cfg) {
  Dataset dataset = load_canonical(cfg, cfg.normalized_path());
  RetrieverCheckpoint ckpt = load_checkpoint(cfg.checkpoint_path());
  const SymbolTable table = table_for(cfg);

  std::map<std::string, Vector> entries;
  for (const auto& rec : filter_split(dataset, Split::Train)) {
    const std::string& q =
        rec.question_norm.empty() ? normalize(rec.question_raw, table)
                                  : rec.question_norm;
    Vector base = text_base_embed(q, ckpt.featurizer.text);
    if (!entries.emplace(rec.id, adapter_forward(ckpt.text, base)).second)
      throw Error("DuplicateId", "id \"" + rec.id + "\"");
  }
  if (entries.empty())
    throw Error("InvalidArgument", "no train records to index");

  ordered_json summary{{"schema", "geoicl/build-index/v1"},
                       {"rows", entries.size()}};
  if (cfg.dry_run) {
    summary["dry_run"] = true;
    return summary;
  }
  ensure_out_dir(cfg);
  SimilarityIndex index = SimilarityIndex::build(entries);
  save_index(index, cfg.index_path());
  summary["out"] = cfg.index_path().string();
  summary["dim"] = index.dim();
  return summary;
}

json stage_build_meta(const PipelineConfig& cfg) {
  Dataset dataset = load_canonical(cfg, cfg.normalized_path());
  SimilarityIndex index = load_index(cfg.index_path());
  Dataset train = filter_split(dataset, Split::Train);

  ordered_json summary{{"schema", "geoicl/build-meta/v1"},
                       {"train_records", train.size()},
                       {"k", cfg.meta.k},
                       {"fan_out", cfg.meta.fan_out}};
  if (cfg.dry_run) {
    summary["dry_run"] = true;
    return summary;
  }
  auto samples = build_meta_dataset(train, index, cfg.meta,
                                    image_provider_for(cfg));
  fs::create_directories(cfg.meta_jsonl_path().parent_path());
  write_meta_dataset(samples, cfg.meta_jsonl_path(), cfg.meta_image_dir());
  summary["samples"] = samples.size();
  summary["out"] = cfg.meta_jsonl_path().string();
  return summary;
}

json stage_augment(const PipelineConfig& cfg) {
  Dataset dataset = load_canonical(cfg, cfg.canonical_path());
  std::unique_ptr<ParaphraseClient> client;
  if (cfg.augment_backend_url.empty())
    client = std::make_unique<StubParaphraseClient>();
  else
    client = std::make_unique<HttpParaphraseClient>(cfg.augment_backend_url);

  ordered_json summary{{"schema", "geoicl/augment/v1"},
                       {"records_in", dataset.size()},
                       {"n", cfg.augment_n}};
  if (cfg.dry_run) {
    summary["dry_run"] = true;
    return summary;
  }
  Dataset augmented = augment_dataset(dataset, cfg.augment_n, *client);
  ensure_out_dir(cfg);
  write_dataset(augmented, cfg.augmented_path());
  summary["records_out"] = augmented.size();
  summary["out"] = cfg.augmented_path().string();
  return summary;
}

namespace {

json finish_eval(const PipelineConfig& cfg, const EvalResult& result,
                 const std::string& client_name) {
  ordered_json summary{{"schema", "geoicl/eval/v1"},
                       {"client", client_name},
                       {"result", eval_result_to_json(result)}};
  if (cfg.dry_run) return summary;
  ensure_out_dir(cfg);
  const fs::path base = cfg.eval_result_path(result.icl);
  write_text(fs::path(base).replace_extension(".json"),
             eval_result_to_json(result).dump(2) + "\n");
  write_text(fs::path(base).replace_extension(".csv"),
             eval_result_to_csv(result));
  write_text(fs::path(base).replace_extension(".txt"),
             render_results_table({result}, client_name));
  summary["out"] = base.string();
  return summary;
}

}  // namespace

json stage_eval(const PipelineConfig& cfg, bool with_icl) {
  EvalContext ctx = make_eval_context(cfg);
  auto client = make_eval_client(cfg, ctx.dataset);
  EvalOptions opts = cfg.eval;
  if (opts.dataset_name == "dataset" || opts.dataset_name.empty())
    opts.dataset_name = fs::path(cfg.dataset_path).stem().string();
  if (cfg.dry_run)
    return ordered_json{{"schema", "geoicl/eval/v1"},
                        {"dry_run", true},
                        {"client", client->name()}};
  EvalResult result = run_eval(ctx, *client, opts, with_icl);
  return finish_eval(cfg, result, client->name());
}

json stage_compare_icl(const PipelineConfig& cfg) {
  EvalContext ctx = make_eval_context(cfg);
  auto client = make_eval_client(cfg, ctx.dataset);
  EvalOptions opts = cfg.eval;
  if (opts.dataset_name == "dataset" || opts.dataset_name.empty())
    opts.dataset_name = fs::path(cfg.dataset_path).stem().string();
  if (cfg.dry_run)
    return ordered_json{{"schema", "geoicl/compare-icl/v1"},
                        {"dry_run", true},
                        {"client", client->name()}};

  IclComparison cmp = compare_icl(ctx, *client, opts);
  const std::string table = render_results_table(
      {cmp.without_icl, cmp.with_icl}, client->name());
  ordered_json summary{{"schema", "geoicl/compare-icl/v1"},
                       {"client", client->name()},
                       {"accuracy_no_icl", cmp.without_icl.accuracy},
                       {"accuracy_icl", cmp.with_icl.accuracy},
                       {"delta", cmp.delta},
                       {"mcnemar_p", cmp.mcnemar_p},
                       {"table", table}};
  ensure_out_dir(cfg);
  finish_eval(cfg, cmp.without_icl, client->name());
  finish_eval(cfg, cmp.with_icl, client->name());
  write_text(fs::path(cfg.out_dir) / "compare_icl.json", summary.dump(2) + "\n");
  write_text(fs::path(cfg.out_dir) / "compare_icl.txt", table);
  return summary;
}

json stage_emit_finetune_config(const PipelineConfig& cfg) {
  ordered_json summary{{"schema", "geoicl/emit-finetune/v1"}};
  if (cfg.dry_run) {
    summary["dry_run"] = true;
    return summary;
  }
  ensure_out_dir(cfg);
  emit_finetune_config(cfg.finetune_config_path());
  summary["out"] = cfg.finetune_config_path().string();
  return summary;
}

json stage_query(const PipelineConfig& cfg, const std::string& id,
                 std::size_t k, bool include_self) {
  SimilarityIndex index = load_index(cfg.index_path());
  auto row = index.row_of(id);
  if (!row) throw Error("UnknownId", "id \"" + id + "\" not in index");
  const Vector query =
      index.embeddings().row(static_cast<Eigen::Index>(*row)).transpose();
  auto hits = top_k(index, query, k,
                    include_self ? std::nullopt
                                 : std::optional<std::string>(id));
  ordered_json results = ordered_json::array();
  for (const auto& hit : hits)
    results.push_back(ordered_json{{"id", hit.id}, {"cosine", hit.score}});
  return ordered_json{{"schema", "geoicl/query/v1"},
                      {"query_id", id},
                      {"k", k},
                      {"results", results}};
}

json run_full_pipeline(const PipelineConfig& cfg) {
  ordered_json stages;
  stages["ingest"] = stage_ingest(cfg);
  stages["normalize"] = stage_normalize(cfg, false);
  stages["embed"] = stage_embed(cfg);
  stages["train"] = stage_train(cfg);
  stages["build_index"] = stage_build_index(cfg);
  stages["build_meta"] = stage_build_meta(cfg);
  stages["compare_icl"] = stage_compare_icl(cfg);
  stages["finetune_config"] = stage_emit_finetune_config(cfg);
  return stages;
}

}  // namespace geoicl
