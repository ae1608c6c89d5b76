#include "geoicl/normalize.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "geoicl/util.hpp"

namespace geoicl {

SymbolTable::SymbolTable(std::vector<SymbolMapping> mappings)
    : mappings_(std::move(mappings)) {
  for (const auto& m : mappings_) {
    if (m.pattern.empty())
      throw Error("InvalidArgument", "empty symbol pattern");
    if (m.replacement.empty())
      throw Error("InvalidArgument",
                  "empty replacement for pattern \"" + m.pattern + "\"");
    const unsigned char first = static_cast<unsigned char>(m.pattern.front());
    if (std::isalnum(first) || first == ' ')
      throw Error("InvalidArgument",
                  "pattern \"" + m.pattern +
                      "\" must not start with a letter, digit or space");
    for (char c : m.replacement) {
      const unsigned char uc = static_cast<unsigned char>(c);
      if (uc > 0x7e || (uc < 0x20))
        throw Error("InvalidArgument",
                    "replacement for \"" + m.pattern +
                        "\" must be printable ASCII words");
    }
  }
  // Longest pattern first so e.g. "\\sim" never shadows "\\simeq".
  std::stable_sort(mappings_.begin(), mappings_.end(),
                   [](const SymbolMapping& a, const SymbolMapping& b) {
                     return a.pattern.size() > b.pattern.size();
                   });
  for (std::size_t i = 0; i + 1 < mappings_.size(); ++i)
    for (std::size_t j = i + 1; j < mappings_.size(); ++j)
      if (mappings_[i].pattern == mappings_[j].pattern)
        throw Error("DuplicateId",
                    "duplicate symbol pattern \"" + mappings_[i].pattern + "\"");
  for (const auto& m : mappings_)
    for (const auto& other : mappings_)
      if (m.replacement.find(other.pattern) != std::string::npos)
        throw Error("InvalidArgument",
                    "replacement for \"" + m.pattern +
                        "\" contains pattern \"" + other.pattern +
                        "\"; normalization would not be idempotent");
}

SymbolTable default_symbol_table() {
  return SymbolTable({
      {"△", "triangle"},
      {"⊥", "perpendicular to"},
      {"∠", "angle"},
      {"∥", "parallel to"},
      {"≌", "congruent to"},
      {"∽", "similar to"},
      {"°", "degrees"},
      {"π", "pi"},
      {"√", "square root of"},
      {"≈", "approximately"},
      {"≤", "less than or equal to"},
      {"≥", "greater than or equal to"},
      {"²", "squared"},
      {"³", "cubed"},
      {"\\triangle", "triangle"},
      {"\\perp", "perpendicular to"},
      {"\\angle", "angle"},
      {"\\parallel", "parallel to"},
      {"\\cong", "congruent to"},
      {"\\sim", "similar to"},
      {"\\sqrt", "square root of"},
      {"\\pi", "pi"},
  });
}

SymbolTable load_symbol_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("Io", "cannot open " + path.string());
  std::vector<SymbolMapping> mappings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error("InvalidArgument", "symbol table line " +
                                         std::to_string(line_no) +
                                         ": expected pattern<TAB>replacement");
    mappings.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return SymbolTable(std::move(mappings));
}

std::string normalize(std::string_view text, const SymbolTable& table) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const SymbolMapping* hit = nullptr;
    for (const auto& m : table.mappings()) {
      if (text.compare(i, m.pattern.size(), m.pattern) == 0) {
        hit = &m;
        break;  // mappings are longest-first
      }
    }
    if (!hit) {
      out += text[i++];
      continue;
    }
    if (!out.empty() && !is_ascii_space(out.back())) out += ' ';
    out += hit->replacement;
    i += hit->pattern.size();
    if (i < text.size() && !is_ascii_space(text[i])) out += ' ';
  }
  return out;
}

Dataset normalize_dataset(Dataset dataset, const SymbolTable& table) {
  for (auto& rec : dataset) rec.question_norm = normalize(rec.question_raw, table);
  return dataset;
}

std::vector<SymbolCount> audit_vocabulary(const Dataset& dataset,
                                          const SymbolTable& table) {
  std::map<char32_t, std::size_t> counts;
  for (const auto& rec : dataset) {
    const std::string cleaned = normalize(rec.question_raw, table);
    std::size_t pos = 0;
    while (pos < cleaned.size()) {
      char32_t cp = utf8_next(cleaned, pos);
      if (cp > 0x7f) ++counts[cp];
    }
  }
  std::vector<SymbolCount> out;
  out.reserve(counts.size());
  for (const auto& [cp, n] : counts) out.push_back({utf8_encode(cp), n});
  std::stable_sort(out.begin(), out.end(),
                   [](const SymbolCount& a, const SymbolCount& b) {
                     return a.count > b.count;
                   });
  return out;
}

}  // namespace geoicl
