#include "geoicl/augment.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "geoicl/util.hpp"

namespace geoicl {

namespace {

std::string apply_synonyms(std::string text) {
  // Lower-case word swaps only; protected content is never alphabetic.
  static const std::vector<std::pair<std::string, std::string>> kSwaps = {
      {"find ", "determine "},
      {"calculate ", "compute "},
      {"as shown in the figure", "as the figure shows"},
  };
  for (const auto& [from, to] : kSwaps) {
    auto pos = text.find(from);
    if (pos != std::string::npos) text.replace(pos, from.size(), to);
  }
  return text;
}

std::string spelled_number(int k) {
  static const char* kWords[] = {"one", "two",   "three", "four", "five",
                                 "six", "seven", "eight", "nine", "ten"};
  if (k < 10) return kWords[k];
  return spelled_number(k / 10 - 1) + " " + kWords[k % 10];
}

}  // namespace

std::vector<std::string> StubParaphraseClient::rephrase(const std::string& text,
                                                        int n, Language) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(std::max(0, n)));
  for (int k = 0; k < n; ++k) {
    switch (k) {
      case 0:
        out.push_back("Consider the following problem. " + text);
        break;
      case 1:
        out.push_back(text + " Work out the answer.");
        break;
      case 2:
        out.push_back("Here is a geometry question: " + apply_synonyms(text));
        break;
      case 3:
        out.push_back("Solve this: " + text);
        break;
      case 4:
        out.push_back("Read the problem carefully and answer it. " + text);
        break;
      default:
        // Digit-free numbering keeps the numeric-literal validator happy.
        out.push_back("Restated (version " + spelled_number(k - 5) + "): " +
                      text);
        break;
    }
  }
  return out;
}

std::vector<std::string> HttpParaphraseClient::rephrase(const std::string& text,
                                                        int n, Language lang) {
  nlohmann::json body{{"text", text}, {"n", n}, {"lang", to_string(lang)}};
  auto response = post_json(base_url_, "/paraphrase", body, policy_);
  try {
    return response.at("variants").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("BackendUnavailable",
                std::string("bad paraphrase response: ") + e.what());
  }
}

std::optional<std::string> variant_violation(const std::string& source,
                                             const std::string& variant) {
  if (trim(variant).empty()) return "empty variant";

  auto source_nums = numeric_literals(source);
  auto variant_nums = numeric_literals(variant);
  std::multiset<std::string> a(source_nums.begin(), source_nums.end());
  std::multiset<std::string> b(variant_nums.begin(), variant_nums.end());
  if (a != b) return "numeric literals altered";

  auto source_letters = choice_letters(source);
  auto variant_letters = choice_letters(variant);
  std::multiset<char> la(source_letters.begin(), source_letters.end());
  std::multiset<char> lb(variant_letters.begin(), variant_letters.end());
  if (la != lb) return "choice letters altered";
  return std::nullopt;
}

std::vector<std::string> paraphrase(const std::string& text, int n,
                                    ParaphraseClient& client, Language lang) {
  if (n < 0) throw Error("InvalidArgument", "n must be >= 0");
  if (n == 0) return {};
  auto variants = client.rephrase(text, n, lang);
  if (static_cast<int>(variants.size()) != n)
    throw Error("BackendUnavailable",
                "requested " + std::to_string(n) + " variants, got " +
                    std::to_string(variants.size()));
  std::set<std::string> unique;
  for (const auto& v : variants) {
    if (auto reason = variant_violation(text, v))
      throw ValidationFailedError(v, *reason);
    if (!unique.insert(v).second)
      throw ValidationFailedError(v, "duplicate variant");
  }
  return variants;
}

Dataset augment_dataset(const Dataset& dataset, int n,
                        ParaphraseClient& client) {
  Dataset out;
  out.reserve(dataset.size() * static_cast<std::size_t>(n + 1));
  for (const auto& rec : dataset) {
    out.push_back(rec);
    if (n == 0) continue;
    auto variants = paraphrase(rec.question_raw, n, client, rec.language);
    for (int k = 0; k < n; ++k) {
      GeoRecord copy = rec;
      copy.id = rec.id + "#p" + std::to_string(k + 1);
      copy.question_raw = variants[static_cast<std::size_t>(k)];
      copy.question_norm.clear();  // re-normalized downstream
      copy.synthetic = true;
      out.push_back(std::move(copy));
    }
  }
  return out;
}

}  // namespace geoicl
