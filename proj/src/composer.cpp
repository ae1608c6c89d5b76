#include "geoicl/composer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "geoicl/png_io.hpp"
#include "geoicl/util.hpp"

namespace geoicl {

using nlohmann::ordered_json;

ImageRaster merge_vertical(const std::vector<ImageRaster>& images,
                           std::uint8_t pad_value) {
  if (images.empty()) throw Error("EmptyList", "nothing to merge");
  const int channels = images.front().channels;
  int width = 0;
  long height = 0;
  for (const auto& img : images) {
    if (!img.valid()) throw Error("InvalidArgument", "invalid raster in merge");
    if (img.channels != channels)
      throw Error("ChannelMismatch",
                  "expected " + std::to_string(channels) + " channels, got " +
                      std::to_string(img.channels));
    width = std::max(width, img.width);
    height += img.height;
  }

  ImageRaster out = make_raster(width, static_cast<int>(height), channels,
                                pad_value);
  int y_offset = 0;
  for (const auto& img : images) {
    const std::size_t src_stride =
        static_cast<std::size_t>(img.width) * channels;
    const std::size_t dst_stride = static_cast<std::size_t>(width) * channels;
    for (int y = 0; y < img.height; ++y)
      std::copy_n(img.pixels.data() + y * src_stride, src_stride,
                  out.pixels.data() +
                      static_cast<std::size_t>(y_offset + y) * dst_stride);
    y_offset += img.height;
  }
  return out;
}

std::string render_answer_text(const AnswerValue& answer) {
  switch (answer.kind) {
    case AnswerKind::Choice:
      return std::string(1, static_cast<char>('A' + answer.choice_index));
    case AnswerKind::Numeric:
      return format_double(answer.numeric);
    case AnswerKind::Text:
      return answer.text;
  }
  return {};
}

std::string render_target_completion(const GeoRecord& rec,
                                     const MetaConfig& cfg) {
  std::string out;
  if (cfg.include_steps && !rec.solution_steps.empty())
    out = join(rec.solution_steps, " ");
  const std::string answer = render_answer_text(rec.answer);
  if (!answer.empty()) {
    if (!out.empty()) out += ' ';
    out += "The answer is " + answer + ".";
  }
  return out;
}

namespace {

std::string render_exemplar_block(const GeoRecord& rec, const MetaConfig& cfg) {
  const PromptTemplate& t = cfg.prompt;
  std::string block = t.question_prefix + rec.question() + "\n";
  if (cfg.include_steps && !rec.solution_steps.empty())
    block += t.solution_prefix + join(rec.solution_steps, " ") + "\n";
  block += t.answer_delimiter + " " + render_answer_text(rec.answer);
  block += t.block_separator;
  return block;
}

std::string render_prompt(const GeoRecord& target,
                          const std::vector<GeoRecord>& context,
                          const MetaConfig& cfg) {
  const PromptTemplate& t = cfg.prompt;
  std::string prompt = t.image_token + "\n";
  for (const auto& rec : context) prompt += render_exemplar_block(rec, cfg);
  prompt += t.question_prefix + target.question() + "\n" + t.answer_delimiter;
  return prompt;
}

}  // namespace

MetaSample compose_sample(const GeoRecord& target,
                          const std::vector<GeoRecord>& context,
                          const MetaConfig& cfg, const ImageProvider& images) {
  std::vector<ImageRaster> rasters;
  rasters.reserve(context.size() + 1);
  int channels = 1;
  for (const auto& rec : context) {
    if (rec.id == target.id)
      throw Error("SelfInContext",
                  "record \"" + target.id + "\" retrieved itself");
    if (rec.split != Split::Train)
      throw Error("TestLeak", "context record \"" + rec.id +
                                  "\" is not from the train split");
    rasters.push_back(images(rec));
    channels = std::max(channels, rasters.back().channels);
  }
  rasters.push_back(images(target));
  channels = std::max(channels, rasters.back().channels);
  // Mixed gray/RGB context: promote everything to the widest channel count
  // so the merge stays well-defined.
  for (auto& r : rasters)
    if (r.channels != channels) r = convert_channels(r, channels);

  MetaSample sample;
  sample.prompt = render_prompt(target, context, cfg);
  sample.merged_image = merge_vertical(rasters, cfg.pad_value);
  sample.target = render_target_completion(target, cfg);
  for (const auto& rec : context) sample.provenance.context_ids.push_back(rec.id);
  sample.provenance.target_id = target.id;
  return sample;
}

std::vector<MetaSample> build_meta_dataset(const Dataset& train_set,
                                           const SimilarityIndex& index,
                                           const MetaConfig& cfg,
                                           const ImageProvider& images) {
  if (cfg.k < 0) throw Error("InvalidArgument", "k must be >= 0");
  std::unordered_map<std::string, const GeoRecord*> by_id;
  for (const auto& rec : train_set) {
    if (rec.split != Split::Train)
      throw Error("TestLeak",
                  "meta dataset input contains non-train record \"" + rec.id +
                      "\"");
    by_id.emplace(rec.id, &rec);
  }

  std::vector<MetaSample> samples;
  for (const auto& rec : train_set) {
    if (cfg.k == 0) {
      samples.push_back(compose_sample(rec, {}, cfg, images));
      continue;
    }
    auto row = index.row_of(rec.id);
    if (!row)
      throw Error("UnknownId",
                  "record \"" + rec.id + "\" missing from the index");
    const Vector query =
        index.embeddings().row(static_cast<Eigen::Index>(*row)).transpose();
    const auto neighbors =
        top_k(index, query, static_cast<std::size_t>(cfg.k), rec.id);

    std::vector<GeoRecord> context;
    for (const auto& hit : neighbors) {
      auto it = by_id.find(hit.id);
      if (it == by_id.end())
        throw Error("UnknownId", "index id \"" + hit.id +
                                     "\" missing from the train set");
      context.push_back(*it->second);
    }
    if (cfg.fan_out && context.size() > 1) {
      for (const auto& exemplar : context)
        samples.push_back(compose_sample(rec, {exemplar}, cfg, images));
    } else {
      samples.push_back(compose_sample(rec, context, cfg, images));
    }
  }
  return samples;
}

MetaSample compose_inference_prompt(const GeoRecord& target,
                                    const Eigen::Ref<const Vector>& query,
                                    const SimilarityIndex& index,
                                    const Dataset& train_set,
                                    const MetaConfig& cfg, bool with_icl,
                                    const ImageProvider& images) {
  if (target.split == Split::Train)
    throw Error("InvalidArgument",
                "inference targets come from the val/test splits");
  if (!with_icl || cfg.k == 0)
    return compose_sample(target, {}, cfg, images);

  std::unordered_map<std::string, const GeoRecord*> train_by_id;
  for (const auto& rec : train_set)
    if (rec.split == Split::Train) train_by_id.emplace(rec.id, &rec);
  if (train_by_id.empty())
    throw Error("EmptyIndex", "no train records available for context");

  // Rank everything, then keep the first k hits that are genuine train
  // records; anything else in the index (e.g. a leaked test row) is skipped.
  const auto ranked = top_k(index, query, index.size(), target.id);
  std::vector<GeoRecord> context;
  for (const auto& hit : ranked) {
    if (static_cast<int>(context.size()) == cfg.k) break;
    auto it = train_by_id.find(hit.id);
    if (it == train_by_id.end()) continue;
    context.push_back(*it->second);
  }
  return compose_sample(target, context, cfg, images);
}

namespace {

std::string sanitize_filename(std::string_view id) {
  std::string out;
  out.reserve(id.size());
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out;
}

}  // namespace

void write_meta_dataset(const std::vector<MetaSample>& samples,
                        const std::filesystem::path& jsonl_path,
                        const std::filesystem::path& image_dir) {
  std::filesystem::create_directories(image_dir);
  std::ofstream out(jsonl_path, std::ios::trunc);
  if (!out) throw Error("Io", "cannot write " + jsonl_path.string());

  std::unordered_map<std::string, int> seen;
  for (const auto& sample : samples) {
    std::string stem = sanitize_filename(sample.provenance.target_id);
    const int n = seen[stem]++;
    if (n > 0) stem += "_" + std::to_string(n);  // fan-out duplicates
    const std::string filename = stem + ".png";
    write_png(sample.merged_image, image_dir / filename);

    ordered_json j;
    j["prompt"] = sample.prompt;
    j["image_path"] = filename;
    j["target"] = sample.target;
    j["provenance"] = ordered_json{{"context", sample.provenance.context_ids},
                                   {"target", sample.provenance.target_id}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error("Io", "short write to " + jsonl_path.string());
}

}  // namespace geoicl
