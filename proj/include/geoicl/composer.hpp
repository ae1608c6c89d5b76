#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "geoicl/retrieval.hpp"
#include "geoicl/types.hpp"

namespace geoicl {

// Interleaved image/question prompt format. The merged raster is one image,
// so the image token is emitted exactly once, at the top of the prompt;
// every exemplar and the target contribute one question block each.
struct PromptTemplate {
  std::string image_token = "<image>";
  std::string question_prefix = "Question: ";
  std::string solution_prefix = "Solution: ";
  std::string answer_delimiter = "Answer:";
  std::string block_separator = "\n\n";
};

struct MetaConfig {
  int k = 1;                     // context exemplars per sample
  PromptTemplate prompt;
  std::uint8_t pad_value = 255;  // fill for width padding in merged rasters
  bool include_steps = true;     // worked steps inside exemplar blocks
  // With k > 1: true emits k single-exemplar samples per record (the
  // neighbor fan-out used for meta-dataset construction); false emits one
  // sample carrying all k exemplars.
  bool fan_out = true;
};

struct Provenance {
  std::vector<std::string> context_ids;  // retrieval order
  std::string target_id;
};

struct MetaSample {
  std::string prompt;
  ImageRaster merged_image;  // context diagrams stacked above the target's
  std::string target;        // completion: solution steps + final answer
  Provenance provenance;
};

// Stack top-to-bottom in list order: width = max width, height = sum of
// heights, left-aligned, right-padded with pad_value.
ImageRaster merge_vertical(const std::vector<ImageRaster>& images,
                           std::uint8_t pad_value);

using ImageProvider = std::function<ImageRaster(const GeoRecord&)>;

// Answer rendered for prompts: choice letter, numeric value, or the text.
std::string render_answer_text(const AnswerValue& answer);
// Completion the backbone is trained to produce: the solution steps followed
// by "The answer is ...".
std::string render_target_completion(const GeoRecord& rec,
                                     const MetaConfig& cfg);

// Context must come from the train split and exclude the target itself.
MetaSample compose_sample(const GeoRecord& target,
                          const std::vector<GeoRecord>& context,
                          const MetaConfig& cfg, const ImageProvider& images);

// One pass over the train split: each record gets its top-k most similar
// train records (self excluded) as context.
std::vector<MetaSample> build_meta_dataset(const Dataset& train_set,
                                           const SimilarityIndex& index,
                                           const MetaConfig& cfg,
                                           const ImageProvider& images);

// Composition for a val/test target. Retrieval is restricted to records of
// the train set even if the index contains others; with_icl=false composes a
// zero-shot sample.
MetaSample compose_inference_prompt(const GeoRecord& target,
                                    const Eigen::Ref<const Vector>& query,
                                    const SimilarityIndex& index,
                                    const Dataset& train_set,
                                    const MetaConfig& cfg, bool with_icl,
                                    const ImageProvider& images);

// JSON-lines of {prompt, image_path, target, provenance}; merged rasters are
// written as PNGs under image_dir.
void write_meta_dataset(const std::vector<MetaSample>& samples,
                        const std::filesystem::path& jsonl_path,
                        const std::filesystem::path& image_dir);

}  // namespace geoicl
