#include "geoicl/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "geoicl/corpus.hpp"
#include "geoicl/png_io.hpp"
#include "geoicl/util.hpp"

namespace geoicl {

using nlohmann::json;
using nlohmann::ordered_json;

LMMResponse HttpLMMClient::generate(const LMMRequest& request) {
  if (request.max_new_tokens < 1 || request.max_new_tokens > 2048)
    throw Error("InvalidArgument", "max_new_tokens must be in [1, 2048]");
  json body{{"prompt", request.prompt},
            {"image_b64", base64_encode(request.image_png)},
            {"max_new_tokens", request.max_new_tokens}};
  auto response = post_json(base_url_, "/generate", body, policy_);
  try {
    return {response.at("text").get<std::string>()};
  } catch (const json::exception& e) {
    throw Error("BackendUnavailable",
                std::string("bad generate response: ") + e.what());
  }
}

namespace {

std::map<std::string, GeoRecord> index_records(const Dataset& dataset) {
  std::map<std::string, GeoRecord> by_id;
  for (const auto& rec : dataset) by_id.emplace(rec.id, rec);
  return by_id;
}

const GeoRecord& record_or_throw(const std::map<std::string, GeoRecord>& by_id,
                                 const std::string& id) {
  auto it = by_id.find(id);
  if (it == by_id.end())
    throw Error("UnknownId", "mock has no record for id \"" + id + "\"");
  return it->second;
}

std::string answer_sentence(const GeoRecord& rec) {
  MetaConfig cfg;  // default completion format
  std::string completion = render_target_completion(rec, cfg);
  return completion.empty() ? "No answer." : completion;
}

}  // namespace

GoldOracleClient::GoldOracleClient(const Dataset& dataset)
    : by_id_(index_records(dataset)) {}

LMMResponse GoldOracleClient::generate(const LMMRequest& request) {
  return {answer_sentence(record_or_throw(by_id_, request.target_id))};
}

CopyContextClient::CopyContextClient(const Dataset& dataset)
    : by_id_(index_records(dataset)) {}

LMMResponse CopyContextClient::generate(const LMMRequest& request) {
  if (request.context_ids.empty()) return {"I cannot determine."};
  const GeoRecord& exemplar =
      record_or_throw(by_id_, request.context_ids.front());
  return {"The answer is " + render_answer_text(exemplar.answer) + "."};
}

RandomAnswerClient::RandomAnswerClient(const Dataset& dataset,
                                       std::uint64_t seed)
    : by_id_(index_records(dataset)), seed_(seed) {}

LMMResponse RandomAnswerClient::generate(const LMMRequest& request) {
  const GeoRecord& rec = record_or_throw(by_id_, request.target_id);
  std::uint64_t h = fnv1a64(request.prompt) ^ seed_;
  // xorshift-style mix so consecutive prompts decorrelate
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  if (rec.qtype == QuestionType::Selection) {
    const auto n = rec.answer.choices.size();
    const char letter = static_cast<char>('A' + (n ? h % n : 0));
    return {std::string("The answer is ") + letter + "."};
  }
  return {"The answer is " + std::to_string(h % 100) + "."};
}

namespace {

bool iequal_at(const std::string& haystack, std::size_t pos,
               const std::string& needle) {
  if (pos + needle.size() > haystack.size()) return false;
  for (std::size_t i = 0; i < needle.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(haystack[pos + i])) !=
        std::tolower(static_cast<unsigned char>(needle[i])))
      return false;
  return true;
}

// Start offset just past the last answer cue, or npos.
std::size_t after_last_cue(const std::string& text) {
  static const std::vector<std::string> kCues = {"the answer is", "answer",
                                                 "答案"};
  std::size_t best = std::string::npos;
  std::size_t best_end = std::string::npos;
  for (const auto& cue : kCues) {
    if (text.size() < cue.size()) continue;
    for (std::size_t pos = 0; pos + cue.size() <= text.size(); ++pos) {
      if (!iequal_at(text, pos, cue)) continue;
      if (best == std::string::npos || pos > best ||
          (pos == best && pos + cue.size() > best_end)) {
        best = pos;
        best_end = pos + cue.size();
      }
    }
  }
  return best == std::string::npos ? std::string::npos : best_end;
}

std::optional<int> last_choice_letter(const std::string& text, std::size_t from,
                                      std::size_t n_choices) {
  std::optional<int> found;
  const auto is_word = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c));
  };
  for (std::size_t i = from; i < text.size(); ++i) {
    char c = text[i];
    const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (upper < 'A' || upper >= static_cast<char>('A' + n_choices)) continue;
    const bool left_ok = i == 0 || !is_word(text[i - 1]);
    const bool right_ok = i + 1 == text.size() || !is_word(text[i + 1]);
    if (left_ok && right_ok) found = upper - 'A';
  }
  return found;
}

std::string strip_answer_tail(std::string_view tail) {
  std::string s(trim(tail));
  // Leading "is"/":"/"=" left over from cue variants.
  while (!s.empty() && (s.front() == ':' || s.front() == '='))
    s.erase(s.begin());
  if (s.rfind("is ", 0) == 0) s.erase(0, 3);
  std::string_view sv = trim(s);
  // Trailing sentence punctuation.
  while (!sv.empty() && (sv.back() == '.' || sv.back() == '!' ||
                         sv.back() == ',' || sv.back() == ';'))
    sv.remove_suffix(1);
  return std::string(trim(sv));
}

std::optional<double> parse_full_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> last_number_in(const std::string& s) {
  auto nums = numeric_literals(s);
  if (nums.empty()) return std::nullopt;
  return std::strtod(nums.back().c_str(), nullptr);
}

}  // namespace

ExtractedAnswer extract_answer(const std::string& generated, QuestionType qtype,
                               const std::vector<std::string>& choices) {
  if (trim(generated).empty())
    throw Error("InvalidArgument", "empty generation");
  ExtractedAnswer out;

  if (qtype == QuestionType::Selection) {
    const std::size_t n = choices.empty() ? 8 : choices.size();
    const std::size_t cue = after_last_cue(generated);
    std::optional<int> idx;
    if (cue != std::string::npos) idx = last_choice_letter(generated, cue, n);
    if (!idx) idx = last_choice_letter(generated, 0, n);
    if (!idx) return out;  // NoAnswerFound
    out.found = true;
    out.raw = std::string(1, static_cast<char>('A' + *idx));
    out.value.kind = AnswerKind::Choice;
    out.value.choice_index = *idx;
    return out;
  }

  if (qtype == QuestionType::Proving) {
    out.found = true;
    out.raw = std::string(trim(generated));
    out.value = AnswerValue::make_text(out.raw);
    return out;
  }

  // Cloze: the trailing text after the last cue.
  const std::size_t cue = after_last_cue(generated);
  if (cue == std::string::npos) return out;
  const std::string tail = strip_answer_tail(
      std::string_view(generated).substr(cue));
  if (tail.empty()) return out;
  out.found = true;
  out.raw = tail;
  if (auto num = parse_full_number(tail))
    out.value = AnswerValue::make_numeric(*num);
  else
    out.value = AnswerValue::make_text(tail);
  return out;
}

bool grade_answer(const ExtractedAnswer& extracted, const AnswerValue& gold) {
  if (!extracted.found) return false;
  switch (gold.kind) {
    case AnswerKind::Choice:
      return extracted.value.kind == AnswerKind::Choice &&
             extracted.value.choice_index == gold.choice_index;
    case AnswerKind::Numeric: {
      std::optional<double> predicted;
      if (extracted.value.kind == AnswerKind::Numeric)
        predicted = extracted.value.numeric;
      else if (extracted.value.kind == AnswerKind::Text)
        predicted = last_number_in(extracted.value.text);
      if (!predicted) return false;
      const double tol = gold.rel_tol;
      if (gold.numeric == 0.0) return std::abs(*predicted) <= tol;
      return std::abs(*predicted - gold.numeric) <=
             tol * std::abs(gold.numeric);
    }
    case AnswerKind::Text: {
      if (extracted.value.kind == AnswerKind::Numeric)
        return format_double(extracted.value.numeric) ==
               std::string(trim(gold.text));
      return std::string(trim(extracted.value.text)) ==
             std::string(trim(gold.text));
    }
  }
  return false;
}

namespace {

std::string predicted_string(const ExtractedAnswer& extracted) {
  if (!extracted.found) return "";
  return extracted.raw;
}

}  // namespace

EvalResult run_eval(const EvalContext& ctx, LMMClient& client,
                    const EvalOptions& opts, bool with_icl) {
  EvalResult result;
  result.dataset_name = opts.dataset_name;
  result.icl = with_icl;

  Dataset train_split = filter_split(ctx.dataset, Split::Train);
  std::vector<const GeoRecord*> targets;
  for (const auto& rec : ctx.dataset) {
    if (rec.split != opts.split) continue;
    if (rec.synthetic) continue;  // synthetic never enters the denominator
    if (rec.qtype == QuestionType::Proving && !opts.include_proving) continue;
    targets.push_back(&rec);
  }
  if (targets.empty())
    throw Error("InvalidArgument",
                "no evaluable records in split " +
                    std::string(to_string(opts.split)));

  for (const GeoRecord* rec_ptr : targets) {
    const GeoRecord& rec = *rec_ptr;
    EvalItem item;
    item.id = rec.id;
    item.gold = render_answer_text(rec.answer);
    try {
      const std::string question_norm = rec.question_norm.empty()
                                            ? normalize(rec.question_raw, ctx.table)
                                            : rec.question_norm;
      const Vector query = adapter_forward(
          ctx.ckpt.text,
          text_base_embed(question_norm, ctx.ckpt.featurizer.text));
      const MetaSample sample =
          compose_inference_prompt(rec, query, ctx.index, train_split, ctx.meta,
                                   with_icl, ctx.images);
      item.context_ids = sample.provenance.context_ids;

      LMMRequest request;
      request.prompt = sample.prompt;
      request.image_png = encode_png(sample.merged_image);
      request.max_new_tokens = opts.max_new_tokens;
      request.target_id = rec.id;
      request.context_ids = sample.provenance.context_ids;

      const LMMResponse response = client.generate(request);
      const ExtractedAnswer extracted =
          extract_answer(response.text, rec.qtype, rec.answer.choices);
      item.predicted = predicted_string(extracted);
      if (!extracted.found) item.error = "NoAnswerFound";
      item.correct = grade_answer(extracted, rec.answer);
    } catch (const Error& e) {
      if (!opts.lenient) throw;
      item.error = e.what();
      item.correct = false;
    }
    if (item.correct) ++result.n_correct;
    result.items.push_back(std::move(item));
  }
  result.n_total = result.items.size();
  result.accuracy =
      static_cast<double>(result.n_correct) / static_cast<double>(result.n_total);
  return result;
}

namespace {

// Exact two-sided McNemar test: under H0 the b discordant wins and c
// discordant losses are Binomial(b+c, 1/2).
double mcnemar_exact_p(std::size_t b, std::size_t c) {
  const std::size_t n = b + c;
  if (n == 0) return 1.0;
  const std::size_t m = std::min(b, c);
  // log C(n, i) via lgamma for numerical range.
  auto log_choose = [&](std::size_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
  };
  double tail = 0.0;
  for (std::size_t i = 0; i <= m; ++i)
    tail += std::exp(log_choose(i) - static_cast<double>(n) * std::log(2.0));
  return std::min(1.0, 2.0 * tail);
}

}  // namespace

IclComparison compare_icl(const EvalContext& ctx, LMMClient& client,
                          const EvalOptions& opts) {
  IclComparison cmp;
  cmp.without_icl = run_eval(ctx, client, opts, false);
  cmp.with_icl = run_eval(ctx, client, opts, true);
  cmp.delta = cmp.with_icl.accuracy - cmp.without_icl.accuracy;

  std::size_t icl_only = 0, noicl_only = 0;
  for (std::size_t i = 0; i < cmp.with_icl.items.size(); ++i) {
    const bool a = cmp.with_icl.items[i].correct;
    const bool b = cmp.without_icl.items[i].correct;
    if (a && !b) ++icl_only;
    if (!a && b) ++noicl_only;
  }
  cmp.mcnemar_p = mcnemar_exact_p(icl_only, noicl_only);
  return cmp;
}

void emit_finetune_config(const std::filesystem::path& path) {
  ordered_json j;
  j["schema"] = "geoicl/finetune/v1";
  j["learning_rate"] = 2e-4;
  j["scheduler"] = "cosine";
  j["epochs"] = 5;
  j["max_length"] = 2048;
  j["per_device_batch"] = 4;
  j["grad_accum"] = 4;
  j["adapter_method"] = "LoRA";
  j["lora_rank"] = 16;  // not fixed upstream; documented default
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("Io", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json eval_result_to_json(const EvalResult& result) {
  ordered_json items = ordered_json::array();
  for (const auto& item : result.items) {
    ordered_json j{{"id", item.id},
                   {"predicted", item.predicted},
                   {"gold", item.gold},
                   {"correct", item.correct},
                   {"context", item.context_ids}};
    if (!item.error.empty()) j["error"] = item.error;
    items.push_back(std::move(j));
  }
  return ordered_json{{"schema", "geoicl/eval/v1"},
                      {"dataset", result.dataset_name},
                      {"icl", result.icl},
                      {"n_total", result.n_total},
                      {"n_correct", result.n_correct},
                      {"accuracy", result.accuracy},
                      {"items", items}};
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string eval_result_to_csv(const EvalResult& result) {
  std::ostringstream out;
  out << "id,correct,predicted,gold,context\n";
  for (const auto& item : result.items)
    out << csv_escape(item.id) << ',' << (item.correct ? 1 : 0) << ','
        << csv_escape(item.predicted) << ',' << csv_escape(item.gold) << ','
        << csv_escape(join(item.context_ids, ";")) << '\n';
  return out.str();
}

std::string render_results_table(const std::vector<EvalResult>& results,
                                 const std::string& client_name) {
  std::ostringstream out;
  out << std::left;
  out.width(42);
  out << "Model";
  out.width(16);
  out << "Dataset";
  out << "Accuracy (%)\n";
  out << std::string(74, '-') << '\n';
  double prev = 0.0;
  bool have_prev = false;
  for (const auto& r : results) {
    std::ostringstream name;
    name << client_name << (r.icl ? " (with ICL)" : " (w/o ICL)");
    out.width(42);
    out << name.str();
    out.width(16);
    out << r.dataset_name;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * r.accuracy);
    out << buf;
    if (have_prev) {
      std::snprintf(buf, sizeof(buf), " (%+.2f)", 100.0 * (r.accuracy - prev));
      out << buf;
    }
    out << '\n';
    prev = r.accuracy;
    have_prev = true;
  }
  return out.str();
}

}  // namespace geoicl
