#include "geoicl/types.hpp"

#include <cctype>

namespace geoicl {

std::string_view to_string(QuestionType t) {
  switch (t) {
    case QuestionType::Selection: return "selection";
    case QuestionType::Cloze: return "cloze";
    case QuestionType::Proving: return "proving";
  }
  return "selection";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::GeoQAPlus: return "GeoQA+";
    case Source::PGPS9K: return "PGPS9K";
    case Source::UniGeo: return "UniGeo";
    case Source::GeoMath: return "GeoMath";
  }
  return "GeoMath";
}

std::string_view to_string(Language l) {
  return l == Language::Zh ? "zh" : "en";
}

QuestionType qtype_from_string(std::string_view s) {
  if (s == "selection") return QuestionType::Selection;
  if (s == "cloze") return QuestionType::Cloze;
  if (s == "proving") return QuestionType::Proving;
  throw Error("InvalidArgument", "unknown question type: " + std::string(s));
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error("InvalidArgument", "unknown split: " + std::string(s));
}

Source source_from_string(std::string_view s) {
  if (s == "GeoQA+") return Source::GeoQAPlus;
  if (s == "PGPS9K") return Source::PGPS9K;
  if (s == "UniGeo") return Source::UniGeo;
  if (s == "GeoMath") return Source::GeoMath;
  throw Error("InvalidArgument", "unknown source: " + std::string(s));
}

Language language_from_string(std::string_view s) {
  if (s == "en") return Language::En;
  if (s == "zh") return Language::Zh;
  throw Error("InvalidArgument", "unknown language: " + std::string(s));
}

AnswerValue AnswerValue::make_choice(int index,
                                     std::vector<std::string> choices) {
  if (choices.size() < 2 || choices.size() > 8)
    throw Error("InvalidArgument", "selection needs 2-8 choices, got " +
                                       std::to_string(choices.size()));
  if (index < 0 || index >= static_cast<int>(choices.size()))
    throw Error("InvalidArgument",
                "choice index " + std::to_string(index) + " out of range");
  AnswerValue v;
  v.kind = AnswerKind::Choice;
  v.choice_index = index;
  v.choices = std::move(choices);
  return v;
}

AnswerValue AnswerValue::make_text(std::string value) {
  AnswerValue v;
  v.kind = AnswerKind::Text;
  v.text = std::move(value);
  return v;
}

AnswerValue AnswerValue::make_numeric(double value, double rel_tol) {
  AnswerValue v;
  v.kind = AnswerKind::Numeric;
  v.numeric = value;
  v.rel_tol = rel_tol;
  return v;
}

ImageRaster make_raster(int width, int height, int channels,
                        std::uint8_t fill) {
  ImageRaster img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.pixels.assign(static_cast<std::size_t>(width) * height * channels, fill);
  return img;
}

ImageRaster convert_channels(const ImageRaster& img, int channels) {
  if (img.channels == channels) return img;
  ImageRaster out = make_raster(img.width, img.height, channels);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (img.channels == 1 && channels == 3) {
    for (std::size_t i = 0; i < n; ++i)
      out.pixels[i * 3] = out.pixels[i * 3 + 1] = out.pixels[i * 3 + 2] =
          img.pixels[i];
  } else if (img.channels == 3 && channels == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      int sum = img.pixels[i * 3] + img.pixels[i * 3 + 1] + img.pixels[i * 3 + 2];
      out.pixels[i] = static_cast<std::uint8_t>((sum + 1) / 3);
    }
  } else {
    throw Error("ChannelMismatch", "unsupported channel conversion");
  }
  return out;
}

std::string source_id_of(std::string_view id) {
  auto pos = id.rfind("#p");
  if (pos == std::string_view::npos || pos + 2 >= id.size())
    return std::string(id);
  for (std::size_t i = pos + 2; i < id.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(id[i])))
      return std::string(id);
  return std::string(id.substr(0, pos));
}

}  // namespace geoicl
