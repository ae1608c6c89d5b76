#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace geoicl {

// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Double in [0, 1) from the top 53 bits of a 64-bit draw. Used instead of
// std::uniform_real_distribution, whose output is not pinned down by the
// standard; checkpoints must be reproducible from a seed alone.
template <class Rng>
double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string_view trim(std::string_view s);

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Decodes the UTF-8 sequence starting at pos and advances it. Invalid bytes
// decode as their own value so audits never abort on dirty input.
char32_t utf8_next(std::string_view s, std::size_t& pos);
std::string utf8_encode(char32_t cp);

// Numeric literals ("12", "3.14") as written, in order of appearance.
std::vector<std::string> numeric_literals(std::string_view text);

// Standalone capital letters A-H, the choice-label alphabet.
std::vector<char> choice_letters(std::string_view text);

// Shortest round-trip decimal form of a double ("3.14", not "3.140000...").
std::string format_double(double v);

}  // namespace geoicl
