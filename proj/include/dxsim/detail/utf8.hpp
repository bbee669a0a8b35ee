#pragma once

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <cstdint>
#include <string>
#include <string_view>

namespace dxsim::detail {

/// Decodes one code point starting at `pos`, advancing it. Ill-formed
/// sequences decode as a negative value and advance by at least one byte.
inline UChar32 next_code_point(std::string_view s, std::int32_t& pos) {
  UChar32 c = 0;
  U8_NEXT(s.data(), pos, static_cast<std::int32_t>(s.size()), c);
  return c;
}

inline void append_code_point(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  std::int32_t len = 0;
  UBool error = false;
  U8_APPEND(buf, len, U8_MAX_LENGTH, c, error);
  if (!error) out.append(buf, static_cast<std::size_t>(len));
}

inline bool is_space(UChar32 c) { return c >= 0 && u_isUWhiteSpace(c); }

inline bool is_valid_utf8(std::string_view s) {
  std::int32_t pos = 0;
  while (pos < static_cast<std::int32_t>(s.size())) {
    if (next_code_point(s, pos) < 0) return false;
  }
  return true;
}

inline bool is_blank(std::string_view s) {
  std::int32_t pos = 0;
  while (pos < static_cast<std::int32_t>(s.size())) {
    if (!is_space(next_code_point(s, pos))) return false;
  }
  return true;
}

/// Terminal column width: East Asian wide and fullwidth characters count 2.
inline std::size_t display_width(std::string_view s) {
  std::size_t width = 0;
  std::int32_t pos = 0;
  while (pos < static_cast<std::int32_t>(s.size())) {
    UChar32 c = next_code_point(s, pos);
    if (c < 0) {
      ++width;
      continue;
    }
    if (u_getCombiningClass(c) != 0) continue;
    auto ea = u_getIntPropertyValue(c, UCHAR_EAST_ASIAN_WIDTH);
    width += (ea == U_EA_WIDE || ea == U_EA_FULLWIDTH) ? 2 : 1;
  }
  return width;
}

}  // namespace dxsim::detail
