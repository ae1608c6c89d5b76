#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace geoicl {

// All library failures derive from Error and carry a short machine-readable
// kind ("DuplicateId", "DimMismatch", ...) next to the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string_view kind, std::string_view message)
      : std::runtime_error(std::string(kind) + ": " + std::string(message)),
        kind_(kind),
        message_(message) {}
  const std::string& kind() const noexcept { return kind_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string kind_;
  std::string message_;
};

struct MalformedRecordError final : Error {
  MalformedRecordError(std::size_t line_no, std::string_view reason)
      : Error("MalformedRecord",
              "line " + std::to_string(line_no) + ": " + std::string(reason)),
        line(line_no) {}
  std::size_t line;
};

struct ValidationFailedError final : Error {
  ValidationFailedError(std::string_view variant_text, std::string_view reason)
      : Error("ValidationFailed", std::string(reason) + " (variant: \"" +
                                      std::string(variant_text) + "\")"),
        variant(variant_text),
        reason(reason) {}
  std::string variant;
  std::string reason;
};

enum class QuestionType { Selection, Cloze, Proving };
enum class Split { Train, Val, Test };
enum class Source { GeoQAPlus, PGPS9K, UniGeo, GeoMath };
enum class Language { En, Zh };

std::string_view to_string(QuestionType t);
std::string_view to_string(Split s);
std::string_view to_string(Source s);
std::string_view to_string(Language l);
QuestionType qtype_from_string(std::string_view s);
Split split_from_string(std::string_view s);
Source source_from_string(std::string_view s);
Language language_from_string(std::string_view s);

enum class AnswerKind { Choice, Text, Numeric };

// Exactly one payload is populated, matching kind. Built through the
// factories so the invariant holds by construction.
struct AnswerValue {
  AnswerKind kind = AnswerKind::Text;
  int choice_index = -1;             // Choice
  std::vector<std::string> choices;  // Choice: ordered option texts
  std::string text;                  // Text
  double numeric = 0.0;              // Numeric
  double rel_tol = 1e-3;             // Numeric: relative grading tolerance

  static AnswerValue make_choice(int index, std::vector<std::string> choices);
  static AnswerValue make_text(std::string value);
  static AnswerValue make_numeric(double value, double rel_tol = 1e-3);

  bool operator==(const AnswerValue&) const = default;
};

// Relative path into the image root, or an inline base64 PNG (fixtures).
struct ImageRef {
  std::string path;
  std::string inline_b64;
  bool is_inline() const { return !inline_b64.empty(); }
  bool empty() const { return path.empty() && inline_b64.empty(); }
  bool operator==(const ImageRef&) const = default;
};

// 8-bit row-major raster, 1 (gray) or 3 (RGB) channels.
struct ImageRaster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c = 0) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  std::uint8_t& at(int y, int x, int c = 0) {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  bool valid() const {
    return width >= 1 && height >= 1 && (channels == 1 || channels == 3) &&
           pixels.size() == static_cast<std::size_t>(width) * height * channels;
  }
  bool operator==(const ImageRaster&) const = default;
};

ImageRaster make_raster(int width, int height, int channels,
                        std::uint8_t fill = 0);
// Channel conversion: 1->3 replicates, 3->1 averages.
ImageRaster convert_channels(const ImageRaster& img, int channels);

struct GeoRecord {
  std::string id;
  std::string question_raw;
  std::string question_norm;  // filled by the normalizer; empty until then
  ImageRef image;
  std::vector<std::string> solution_steps;
  AnswerValue answer;
  QuestionType qtype = QuestionType::Selection;
  Split split = Split::Train;
  Source source = Source::GeoMath;
  Language language = Language::En;
  bool synthetic = false;  // paraphrase-derived; never counted in eval totals

  // Normalized question when present, else the raw text.
  const std::string& question() const {
    return question_norm.empty() ? question_raw : question_norm;
  }
};

using Dataset = std::vector<GeoRecord>;

// "q12#p3" -> "q12"; ids without a paraphrase suffix map to themselves.
std::string source_id_of(std::string_view id);

}  // namespace geoicl
