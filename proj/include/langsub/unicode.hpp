#pragma once

#include <string>
#include <string_view>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/utypes.h>

#include "langsub/error.hpp"

namespace langsub::unicode {

/// NFC form of a UTF-8 string. Pure ASCII input is returned unchanged
/// without touching ICU.
inline std::string nfc(std::string_view utf8) {
  bool ascii = true;
  for (unsigned char c : utf8) {
    if (c >= 0x80) {
      ascii = false;
      break;
    }
  }
  if (ascii) return std::string(utf8);

  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) fail(ErrorCode::invariant_violation, "ICU NFC normalizer unavailable");
  icu::UnicodeString source = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  icu::UnicodeString normalized = normalizer->normalize(source, status);
  if (U_FAILURE(status)) fail(ErrorCode::invariant_violation, "NFC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

/// Locale-independent lowercase of a UTF-8 string, NFC-normalized.
inline std::string lower(std::string_view utf8) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  s.toLower(icu::Locale::getRoot());
  std::string out;
  s.toUTF8String(out);
  return nfc(out);
}

}  // namespace langsub::unicode
