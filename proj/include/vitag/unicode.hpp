#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vitag::uni {

// Decodes UTF-8 into codepoints; malformed byte sequences raise ParseError.
std::vector<uint32_t> utf8_decode(std::string_view s);

void utf8_append(std::string& out, uint32_t cp);
std::string utf8_encode(std::span<const uint32_t> cps);

// Canonical composition (NFC) over the Latin + combining-mark ranges the
// table generator covers — enough to give Vietnamese diacritics a single
// byte representation. Codepoints outside the tables pass through.
std::vector<uint32_t> nfc(std::vector<uint32_t> cps);
std::string nfc_string(std::string_view s);

uint32_t to_lower(uint32_t cp);
std::string lower_string(std::string_view s);

bool is_space(uint32_t cp);

}  // namespace vitag::uni
