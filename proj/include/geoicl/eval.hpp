#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geoicl/composer.hpp"
#include "geoicl/embed.hpp"
#include "geoicl/http.hpp"
#include "geoicl/normalize.hpp"
#include "geoicl/retrieval.hpp"
#include "geoicl/types.hpp"

namespace geoicl {

struct LMMRequest {
  std::string prompt;
  std::vector<std::uint8_t> image_png;  // encoded merged image
  int max_new_tokens = 2048;            // hard cap 2048
  // Harness-side provenance for the in-repo mocks; never sent over the wire.
  std::string target_id;
  std::vector<std::string> context_ids;
};

struct LMMResponse {
  std::string text;
};

class LMMClient {
 public:
  virtual ~LMMClient() = default;
  virtual LMMResponse generate(const LMMRequest& request) = 0;
  virtual std::string name() const = 0;
};

// POST /generate {"prompt", "image_b64", "max_new_tokens"} -> {"text"}.
class HttpLMMClient final : public LMMClient {
 public:
  explicit HttpLMMClient(std::string base_url, RetryPolicy policy = {})
      : base_url_(std::move(base_url)), policy_(policy) {}
  LMMResponse generate(const LMMRequest& request) override;
  std::string name() const override { return "http:" + base_url_; }

 private:
  std::string base_url_;
  RetryPolicy policy_;
};

// Always answers with the target's gold answer: the accuracy ceiling.
class GoldOracleClient final : public LMMClient {
 public:
  explicit GoldOracleClient(const Dataset& dataset);
  LMMResponse generate(const LMMRequest& request) override;
  std::string name() const override { return "mock:gold-oracle"; }

 private:
  std::map<std::string, GeoRecord> by_id_;
};

// Parrots the first context exemplar's answer; useless without ICL. Isolates
// how much answer signal the retrieved neighbors carry.
class CopyContextClient final : public LMMClient {
 public:
  explicit CopyContextClient(const Dataset& dataset);
  LMMResponse generate(const LMMRequest& request) override;
  std::string name() const override { return "mock:copy-context"; }

 private:
  std::map<std::string, GeoRecord> by_id_;
};

// Uniform random choice letter, keyed on (prompt, seed) so reruns are
// reproducible while distinct prompts draw independently.
class RandomAnswerClient final : public LMMClient {
 public:
  RandomAnswerClient(const Dataset& dataset, std::uint64_t seed);
  LMMResponse generate(const LMMRequest& request) override;
  std::string name() const override { return "mock:random"; }

 private:
  std::map<std::string, GeoRecord> by_id_;
  std::uint64_t seed_;
};

struct ExtractedAnswer {
  bool found = false;
  AnswerValue value;
  std::string raw;  // answer text as scraped from the generation
};

// Scrapes a final answer out of generated text. Selection: last standalone
// choice letter after an answer cue ("Answer", "the answer is", "答案"),
// falling back to the last standalone letter anywhere. Cloze: the trailing
// text after the last cue, numeric when it parses. Proving: the whole
// generation (graded by target-text match only when proving grading is
// enabled).
ExtractedAnswer extract_answer(const std::string& generated, QuestionType qtype,
                               const std::vector<std::string>& choices = {});

// Numeric gold compares at the gold's relative tolerance; text gold compares
// exactly after trimming.
bool grade_answer(const ExtractedAnswer& extracted, const AnswerValue& gold);

struct EvalItem {
  std::string id;
  std::string predicted;
  std::string gold;
  bool correct = false;
  std::vector<std::string> context_ids;
  std::string error;  // non-empty when the backend failed under lenient mode
};

struct EvalResult {
  std::string dataset_name;
  bool icl = false;
  std::size_t n_total = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  std::vector<EvalItem> items;
};

struct EvalOptions {
  Split split = Split::Test;
  std::string dataset_name = "dataset";
  bool lenient = false;          // record per-item backend errors and continue
  bool include_proving = false;  // proving rows are composed but not graded
  int max_new_tokens = 2048;
};

// Everything needed to embed a query and compose its prompt.
struct EvalContext {
  Dataset dataset;  // all splits
  SymbolTable table = default_symbol_table();
  RetrieverCheckpoint ckpt;
  SimilarityIndex index;  // text-tower embeddings of the train split
  MetaConfig meta;
  ImageProvider images;
};

// Grades every non-synthetic record of the split once. Deterministic given a
// deterministic backend; items are reported in dataset order.
EvalResult run_eval(const EvalContext& ctx, LMMClient& client,
                    const EvalOptions& opts, bool with_icl);

struct IclComparison {
  EvalResult without_icl;
  EvalResult with_icl;
  double delta = 0.0;       // accuracy(ICL) - accuracy(no ICL)
  double mcnemar_p = 1.0;   // exact two-sided McNemar test on discordant pairs
};

IclComparison compare_icl(const EvalContext& ctx, LMMClient& client,
                          const EvalOptions& opts);

// LoRA fine-tune settings for the external training stack.
void emit_finetune_config(const std::filesystem::path& path);

nlohmann::json eval_result_to_json(const EvalResult& result);
std::string eval_result_to_csv(const EvalResult& result);
// Accuracy table, one row per (client, ICL mode), deltas in brackets.
std::string render_results_table(const std::vector<EvalResult>& results,
                                 const std::string& client_name);

}  // namespace geoicl
