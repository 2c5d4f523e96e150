#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/ustring.h>

#include "tagevo/error.hpp"

namespace tagevo {

// Canonicalization switches for raw tag strings. The default is the usual
// folksonomy convention: case-folded, trimmed, NFC composed.
struct NormalizeOptions {
  bool case_fold = true;
  bool trim = true;
  bool compose = true;

  friend bool operator==(const NormalizeOptions&, const NormalizeOptions&) = default;
};

namespace detail {

inline bool is_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string normalize_ascii(std::string_view raw, const NormalizeOptions& opt) {
  if (opt.trim) {
    while (!raw.empty() && is_ascii_space(raw.front())) raw.remove_prefix(1);
    while (!raw.empty() && is_ascii_space(raw.back())) raw.remove_suffix(1);
  }
  std::string out(raw);
  if (opt.case_fold) {
    for (char& c : out) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
  }
  return out;
}

}  // namespace detail

// Returns the canonical form of a raw tag, or std::nullopt when nothing is
// left (the record should be skipped). Throws InputError if `raw` is not
// well-formed UTF-8.
inline std::optional<std::string> normalize_tag(std::string_view raw,
                                                const NormalizeOptions& opt = {}) {
  if (detail::is_ascii(raw)) {
    std::string out = detail::normalize_ascii(raw, opt);
    if (out.empty()) return std::nullopt;
    return out;
  }

  UErrorCode status = U_ZERO_ERROR;
  std::vector<UChar> units(raw.size() + 1);
  int32_t length = 0;
  u_strFromUTF8(units.data(), static_cast<int32_t>(units.size()), &length, raw.data(),
                static_cast<int32_t>(raw.size()), &status);
  if (U_FAILURE(status)) throw InputError("invalid UTF-8 in tag");

  icu::UnicodeString text(units.data(), length);
  if (opt.case_fold) text.foldCase(U_FOLD_CASE_DEFAULT);
  if (opt.compose) {
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
    text = nfc->normalize(text, status);
    if (U_FAILURE(status)) throw InputError("tag normalization failed");
  }
  if (opt.trim) text.trim();

  std::string out;
  text.toUTF8String(out);
  if (out.empty()) return std::nullopt;
  return out;
}

}  // namespace tagevo
