#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "geoicl/augment.hpp"
#include "geoicl/contrastive.hpp"
#include "geoicl/corpus.hpp"
#include "geoicl/eval.hpp"

namespace geoicl {

// One manifest drives every stage; command-line flags override fields.
// Stages read prior stages' artifacts from out_dir under fixed names.
struct PipelineConfig {
  std::string dataset_path;
  std::string image_root;   // empty: directory of dataset_path
  std::string out_dir = "out";
  std::string normalizer_table;  // empty: built-in default table

  BaseFeaturizerConfig featurizer;
  TrainerConfig trainer;
  InfoNCEConfig infonce;
  MetaConfig meta;

  int augment_n = 5;
  std::string augment_backend_url;  // empty: deterministic stub

  EvalOptions eval;
  std::string eval_backend_url;  // empty: use eval_mock
  std::string eval_mock = "gold-oracle";
  std::uint64_t eval_seed = 7;

  bool lenient = false;
  bool dry_run = false;

  // Set by `train-retriever --out`: checkpoint location outside out_dir.
  std::string checkpoint_override;

  // Artifact names under out_dir.
  std::filesystem::path canonical_path() const;
  std::filesystem::path normalized_path() const;
  std::filesystem::path pairs_path() const;
  std::filesystem::path checkpoint_path() const;
  std::filesystem::path train_report_path() const;
  std::filesystem::path loss_curve_path() const;
  std::filesystem::path index_path() const;
  std::filesystem::path meta_jsonl_path() const;
  std::filesystem::path meta_image_dir() const;
  std::filesystem::path augmented_path() const;
  std::filesystem::path finetune_config_path() const;
  std::filesystem::path eval_result_path(bool icl) const;

  std::filesystem::path resolved_image_root() const;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void apply_config_json(PipelineConfig& cfg, const nlohmann::json& j);

// Each stage returns a machine-readable summary. With cfg.dry_run the stage
// validates its inputs and reports what it would do without writing.
nlohmann::json stage_ingest(const PipelineConfig& cfg);
nlohmann::json stage_stats(const PipelineConfig& cfg,
                           const std::string& dataset_override = {});
nlohmann::json stage_normalize(const PipelineConfig& cfg, bool audit);
nlohmann::json stage_embed(const PipelineConfig& cfg);
nlohmann::json stage_train(const PipelineConfig& cfg,
                           const std::string& pairs_override = {});
nlohmann::json stage_build_index(const PipelineConfig& cfg);
nlohmann::json stage_build_meta(const PipelineConfig& cfg);
nlohmann::json stage_augment(const PipelineConfig& cfg);
nlohmann::json stage_eval(const PipelineConfig& cfg, bool with_icl);
nlohmann::json stage_compare_icl(const PipelineConfig& cfg);
nlohmann::json stage_emit_finetune_config(const PipelineConfig& cfg);
nlohmann::json stage_query(const PipelineConfig& cfg, const std::string& id,
                           std::size_t k, bool include_self);

// ingest -> normalize -> embed -> train -> index -> meta -> compare-icl,
// all under cfg.out_dir. Returns the per-stage summaries.
nlohmann::json run_full_pipeline(const PipelineConfig& cfg);

// Shared mock construction for CLI and tests.
std::unique_ptr<LMMClient> make_mock_client(const std::string& name,
                                            const Dataset& dataset,
                                            std::uint64_t seed);

}  // namespace geoicl
