#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "geoicl/types.hpp"

namespace geoicl {

struct SymbolMapping {
  std::string pattern;      // literal byte sequence (UTF-8)
  std::string replacement;  // plain words and spaces
};

// Ordered longest-pattern-first. Construction validates that replacements
// contain no pattern and that no pattern starts with a letter, digit or
// space; together these make normalize() idempotent.
class SymbolTable {
 public:
  explicit SymbolTable(std::vector<SymbolMapping> mappings);
  const std::vector<SymbolMapping>& mappings() const { return mappings_; }
  bool empty() const { return mappings_.empty(); }

 private:
  std::vector<SymbolMapping> mappings_;
};

// Covers the common plane/solid geometry symbols and their LaTeX escapes.
// Only the triangle and perpendicular mappings are canonical; the rest is a
// documented extrapolation, overridable via a TSV table file.
SymbolTable default_symbol_table();

// Two-column TSV: pattern<TAB>replacement. '#' lines are comments.
SymbolTable load_symbol_table(const std::filesystem::path& path);

// Single pass, left to right, longest match first. Replacements are
// separated from adjacent non-space text by inserted spaces, so
// "△ABC" -> "triangle ABC". Unknown symbols pass through.
std::string normalize(std::string_view text, const SymbolTable& table);

// Fills question_norm on every record.
Dataset normalize_dataset(Dataset dataset, const SymbolTable& table);

struct SymbolCount {
  std::string symbol;  // UTF-8 encoding of one codepoint
  std::size_t count = 0;
};

// Non-ASCII codepoints that survive normalization of any question, with
// frequencies, most frequent first (ties by codepoint).
std::vector<SymbolCount> audit_vocabulary(const Dataset& dataset,
                                          const SymbolTable& table);

}  // namespace geoicl
