#include "geoicl/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "geoicl/png_io.hpp"
#include "geoicl/util.hpp"

namespace geoicl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

int source_idx(Source s) { return static_cast<int>(s); }
int qtype_idx(QuestionType t) { return static_cast<int>(t); }
int split_idx(Split s) { return static_cast<int>(s); }

AnswerValue answer_from_json(const json& j) {
  if (!j.is_object()) throw Error("InvalidArgument", "answer must be an object");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "choice") {
    auto choices = j.at("choices").get<std::vector<std::string>>();
    return AnswerValue::make_choice(j.at("index").get<int>(),
                                    std::move(choices));
  }
  if (kind == "text") return AnswerValue::make_text(j.at("value").get<std::string>());
  if (kind == "numeric") {
    double tol = j.value("rel_tol", 1e-3);
    return AnswerValue::make_numeric(j.at("value").get<double>(), tol);
  }
  throw Error("InvalidArgument", "unknown answer kind: " + kind);
}

ordered_json answer_to_json(const AnswerValue& a) {
  ordered_json j;
  switch (a.kind) {
    case AnswerKind::Choice:
      j["kind"] = "choice";
      j["index"] = a.choice_index;
      j["choices"] = a.choices;
      break;
    case AnswerKind::Text:
      j["kind"] = "text";
      j["value"] = a.text;
      break;
    case AnswerKind::Numeric:
      j["kind"] = "numeric";
      j["value"] = a.numeric;
      j["rel_tol"] = a.rel_tol;
      break;
  }
  return j;
}

ImageRef image_from_json(const json& j) {
  ImageRef ref;
  if (j.is_string()) {
    ref.path = j.get<std::string>();
  } else if (j.is_object() && j.contains("b64")) {
    ref.inline_b64 = j.at("b64").get<std::string>();
  } else {
    throw Error("InvalidArgument",
                "image must be a relative path or {\"b64\": ...}");
  }
  if (ref.empty()) throw Error("InvalidArgument", "empty image reference");
  return ref;
}

GeoRecord record_from_json(const json& j) {
  GeoRecord rec;
  rec.id = j.at("id").get<std::string>();
  if (rec.id.empty()) throw Error("InvalidArgument", "empty id");
  rec.question_raw = j.at("question").get<std::string>();
  rec.question_norm = j.value("question_norm", std::string());
  rec.image = image_from_json(j.at("image"));
  if (j.contains("steps"))
    rec.solution_steps = j.at("steps").get<std::vector<std::string>>();
  rec.answer = answer_from_json(j.at("answer"));
  rec.qtype = qtype_from_string(j.at("qtype").get<std::string>());
  rec.split = split_from_string(j.at("split").get<std::string>());
  rec.source = source_from_string(j.at("source").get<std::string>());
  rec.language = language_from_string(j.at("lang").get<std::string>());
  rec.synthetic = j.value("synthetic", false);

  // Cross-field invariants.
  switch (rec.qtype) {
    case QuestionType::Selection:
      if (rec.answer.kind != AnswerKind::Choice)
        throw Error("InvalidArgument", "selection answer must be a choice");
      break;
    case QuestionType::Cloze:
      if (rec.answer.kind == AnswerKind::Choice)
        throw Error("InvalidArgument", "cloze answer must be text or numeric");
      if (rec.answer.kind == AnswerKind::Text && rec.answer.text.empty())
        throw Error("InvalidArgument", "cloze answer must be non-empty");
      break;
    case QuestionType::Proving:
      if (rec.answer.kind != AnswerKind::Text)
        throw Error("InvalidArgument", "proving answer must be text");
      break;
  }
  return rec;
}

void check_image_present(const GeoRecord& rec,
                         const std::filesystem::path& image_root) {
  if (rec.image.is_inline()) {
    auto bytes = base64_decode(rec.image.inline_b64);
    if (bytes.size() < 8 ||
        !(bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' &&
          bytes[3] == 'G'))
      throw Error("MissingImage", "id " + rec.id + ": inline data is not PNG");
    return;
  }
  auto p = image_root / rec.image.path;
  if (!std::filesystem::exists(p))
    throw Error("MissingImage", "id " + rec.id + ": " + p.string());
}

}  // namespace

LoadResult load_dataset(const std::filesystem::path& path,
                        std::string_view schema_version,
                        const LoadOptions& opts) {
  if (schema_version != kDatasetSchemaVersion)
    throw Error("Schema",
                "unsupported dataset schema version: " + std::string(schema_version));
  std::ifstream in(path);
  if (!in) throw Error("Io", "cannot open " + path.string());

  const std::filesystem::path image_root =
      opts.image_root.empty() ? path.parent_path()
                              : std::filesystem::path(opts.image_root);

  LoadResult result;
  std::unordered_map<std::string, std::size_t> first_line_of_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw Error("InvalidArgument", e.what());
      }
      GeoRecord rec;
      try {
        rec = record_from_json(j);
      } catch (const json::exception& e) {
        throw Error("InvalidArgument", e.what());
      }
      if (auto it = first_line_of_id.find(rec.id); it != first_line_of_id.end())
        throw Error("DuplicateId", "id \"" + rec.id + "\" on lines " +
                                       std::to_string(it->second) + "," +
                                       std::to_string(line_no));
      check_image_present(rec, image_root);
      first_line_of_id.emplace(rec.id, line_no);
      result.records.push_back(std::move(rec));
    } catch (const Error& e) {
      if (e.kind() == "DuplicateId") {
        if (!opts.lenient) throw;
        result.skipped.push_back({line_no, e.what()});
      } else if (e.kind() == "MissingImage") {
        Error err("MissingImage", "line " + std::to_string(line_no) + ": " +
                                      e.message());
        if (!opts.lenient) throw err;
        result.skipped.push_back({line_no, err.what()});
      } else {
        MalformedRecordError err(line_no, e.what());
        if (!opts.lenient) throw err;
        result.skipped.push_back({line_no, err.what()});
      }
    }
  }
  return result;
}

std::string record_to_json_line(const GeoRecord& rec) {
  ordered_json j;
  j["id"] = rec.id;
  j["question"] = rec.question_raw;
  if (!rec.question_norm.empty()) j["question_norm"] = rec.question_norm;
  if (rec.image.is_inline())
    j["image"] = ordered_json{{"b64", rec.image.inline_b64}};
  else
    j["image"] = rec.image.path;
  j["steps"] = rec.solution_steps;
  j["answer"] = answer_to_json(rec.answer);
  j["qtype"] = to_string(rec.qtype);
  j["split"] = to_string(rec.split);
  j["source"] = to_string(rec.source);
  j["lang"] = to_string(rec.language);
  if (rec.synthetic) j["synthetic"] = true;
  return j.dump();
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("Io", "cannot write " + path.string());
  for (const auto& rec : dataset) out << record_to_json_line(rec) << '\n';
  if (!out) throw Error("Io", "short write to " + path.string());
}

Dataset filter_split(const Dataset& dataset, Split split) {
  Dataset out;
  for (const auto& rec : dataset)
    if (rec.split == split) out.push_back(rec);
  return out;
}

std::size_t DatasetStats::count(Source s, QuestionType t) const {
  const auto& row = counts[source_idx(s)][qtype_idx(t)];
  return row[0] + row[1] + row[2];
}

std::size_t DatasetStats::count_test(Source s, QuestionType t) const {
  return counts[source_idx(s)][qtype_idx(t)][split_idx(Split::Test)];
}

DatasetStats compute_stats(const Dataset& dataset) {
  DatasetStats stats;
  std::array<std::set<std::string>, DatasetStats::kSources> images;
  std::array<std::set<std::string>, DatasetStats::kSources> images_test;
  for (const auto& rec : dataset) {
    if (rec.synthetic) {
      ++stats.synthetic;
      continue;
    }
    ++stats.total;
    ++stats.counts[source_idx(rec.source)][qtype_idx(rec.qtype)]
                  [split_idx(rec.split)];
    const std::string key = rec.image.is_inline()
                                ? "\x01" + rec.image.inline_b64
                                : rec.image.path;
    images[source_idx(rec.source)].insert(key);
    if (rec.split == Split::Test) images_test[source_idx(rec.source)].insert(key);
  }
  for (int s = 0; s < DatasetStats::kSources; ++s) {
    stats.image_text_pairs[s] = images[s].size();
    stats.image_text_pairs_test[s] = images_test[s].size();
  }
  return stats;
}

namespace {

std::string cell(std::size_t n, std::size_t test) {
  if (n == 0) return "-";
  std::string s = std::to_string(n);
  if (test > 0) s += "(" + std::to_string(test) + ")";
  return s;
}

}  // namespace

std::string render_stats_table(const DatasetStats& stats) {
  static constexpr Source kOrder[] = {Source::GeoQAPlus, Source::PGPS9K,
                                      Source::UniGeo, Source::GeoMath};
  static constexpr QuestionType kTypes[] = {
      QuestionType::Selection, QuestionType::Cloze, QuestionType::Proving};
  static constexpr const char* kTypeNames[] = {"QA-selection", "QA-cloze",
                                               "QA-proving"};
  std::ostringstream out;
  const int w = 14;
  out << std::left;
  out.width(18);
  out << "Stat. type";
  for (Source s : kOrder) {
    out.width(w);
    out << to_string(s);
  }
  out << '\n' << std::string(18 + 4 * w, '-') << '\n';
  for (int t = 0; t < 3; ++t) {
    out.width(18);
    out << kTypeNames[t];
    for (Source s : kOrder) {
      out.width(w);
      out << cell(stats.count(s, kTypes[t]), stats.count_test(s, kTypes[t]));
    }
    out << '\n';
  }
  out.width(18);
  out << "Image-text pairs";
  for (Source s : kOrder) {
    out.width(w);
    out << cell(stats.image_text_pairs[source_idx(s)],
                stats.image_text_pairs_test[source_idx(s)]);
  }
  out << '\n';
  return out.str();
}

ImageRaster load_image(const GeoRecord& rec,
                       const std::filesystem::path& image_root) {
  if (rec.image.is_inline()) {
    auto bytes = base64_decode(rec.image.inline_b64);
    return decode_png(bytes.data(), bytes.size());
  }
  auto p = image_root / rec.image.path;
  if (!std::filesystem::exists(p))
    throw Error("MissingImage", "id " + rec.id + ": " + p.string());
  return read_png(p);
}

}  // namespace geoicl
