#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geoicl/http.hpp"
#include "geoicl/types.hpp"

namespace geoicl {

class ParaphraseClient {
 public:
  virtual ~ParaphraseClient() = default;
  virtual std::vector<std::string> rephrase(const std::string& text, int n,
                                            Language lang) = 0;
};

// Deterministic offline paraphraser: fixed rewrite templates plus a small
// synonym pass. Never touches numbers or choice letters.
class StubParaphraseClient final : public ParaphraseClient {
 public:
  std::vector<std::string> rephrase(const std::string& text, int n,
                                    Language lang) override;
};

// POST /paraphrase {"text", "n", "lang"} -> {"variants": [...]}.
class HttpParaphraseClient final : public ParaphraseClient {
 public:
  explicit HttpParaphraseClient(std::string base_url, RetryPolicy policy = {})
      : base_url_(std::move(base_url)), policy_(policy) {}
  std::vector<std::string> rephrase(const std::string& text, int n,
                                    Language lang) override;

 private:
  std::string base_url_;
  RetryPolicy policy_;
};

// Reason a variant is unacceptable, or nullopt. A paraphrase must keep every
// numeric literal and every standalone choice letter of the source intact;
// changing "12 cm" to "13 cm" silently corrupts the label.
std::optional<std::string> variant_violation(const std::string& source,
                                             const std::string& variant);

// n validated variants of text. Throws ValidationFailed on the first variant
// that alters protected content, duplicates another, or is empty.
std::vector<std::string> paraphrase(const std::string& text, int n,
                                    ParaphraseClient& client,
                                    Language lang = Language::En);

// Expands the corpus to (n+1) x |dataset|: each record is followed by its n
// paraphrase records. Variants copy everything except the question text, are
// flagged synthetic, and get ids "{id}#p{k}".
Dataset augment_dataset(const Dataset& dataset, int n,
                        ParaphraseClient& client);

}  // namespace geoicl
