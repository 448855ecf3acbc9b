#include "vitag/unicode.hpp"

#include <algorithm>
#include <cstddef>

#include "vitag/error.hpp"

namespace vitag::uni {

namespace {

#include "unicode_tables.inc"

const DecompEntry* find_decomposition(uint32_t cp) {
    auto it = std::lower_bound(
        std::begin(kDecompositions), std::end(kDecompositions), cp,
        [](const DecompEntry& e, uint32_t v) { return e.cp < v; });
    if (it != std::end(kDecompositions) && it->cp == cp) return &*it;
    return nullptr;
}

uint8_t combining_class(uint32_t cp) {
    auto it = std::lower_bound(
        std::begin(kCombiningClasses), std::end(kCombiningClasses), cp,
        [](const CccEntry& e, uint32_t v) { return e.cp < v; });
    if (it != std::end(kCombiningClasses) && it->cp == cp) return it->ccc;
    return 0;
}

uint32_t compose_pair(uint32_t first, uint32_t second) {
    for (const auto& e : kCompositions) {
        if (e.first == first && e.second == second) return e.composed;
    }
    return 0;
}

}  // namespace

std::vector<uint32_t> utf8_decode(std::string_view s) {
    std::vector<uint32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        uint32_t cp = 0;
        size_t len = 0;
        if (b0 < 0x80) {
            cp = b0;
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            len = 2;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            len = 3;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            len = 4;
        } else {
            throw ParseError("invalid UTF-8 lead byte at offset " +
                             std::to_string(i));
        }
        if (i + len > s.size()) {
            throw ParseError("truncated UTF-8 sequence at offset " +
                             std::to_string(i));
        }
        for (size_t j = 1; j < len; ++j) {
            const auto bj = static_cast<unsigned char>(s[i + j]);
            if ((bj & 0xC0) != 0x80) {
                throw ParseError("invalid UTF-8 continuation at offset " +
                                 std::to_string(i + j));
            }
            cp = (cp << 6) | (bj & 0x3F);
        }
        // reject overlong encodings and surrogate range
        static constexpr uint32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
        if (len > 1 && cp < kMin[len]) {
            throw ParseError("overlong UTF-8 sequence at offset " +
                             std::to_string(i));
        }
        if ((cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
            throw ParseError("invalid codepoint at offset " +
                             std::to_string(i));
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

void utf8_append(std::string& out, uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string utf8_encode(std::span<const uint32_t> cps) {
    std::string out;
    out.reserve(cps.size() * 2);
    for (uint32_t cp : cps) utf8_append(out, cp);
    return out;
}

std::vector<uint32_t> nfc(std::vector<uint32_t> cps) {
    // 1. full canonical decomposition
    std::vector<uint32_t> dec;
    dec.reserve(cps.size() + 8);
    std::vector<uint32_t> pending;
    for (uint32_t cp : cps) {
        pending.assign(1, cp);
        while (!pending.empty()) {
            const uint32_t c = pending.back();
            pending.pop_back();
            if (const DecompEntry* e = find_decomposition(c)) {
                // push in reverse so `first` is processed before `second`
                if (e->second != 0) pending.push_back(e->second);
                pending.push_back(e->first);
            } else {
                dec.push_back(c);
            }
        }
    }
    // 2. canonical ordering of combining marks (stable bubble over runs)
    for (size_t i = 1; i < dec.size(); ++i) {
        const uint8_t ccc = combining_class(dec[i]);
        if (ccc == 0) continue;
        size_t j = i;
        while (j > 0 && combining_class(dec[j - 1]) > ccc) {
            std::swap(dec[j - 1], dec[j]);
            --j;
        }
    }
    // 3. canonical composition
    std::vector<uint32_t> out;
    out.reserve(dec.size());
    // index into `out` of the last starter (ccc == 0), or npos
    size_t starter = static_cast<size_t>(-1);
    uint8_t last_ccc = 255;  // blocks composition until a starter appears
    for (uint32_t cp : dec) {
        const uint8_t ccc = combining_class(cp);
        if (starter != static_cast<size_t>(-1) &&
            (last_ccc < ccc || last_ccc == 255)) {
            if (uint32_t comp = compose_pair(out[starter], cp)) {
                out[starter] = comp;
                continue;  // last_ccc unchanged; cp was absorbed
            }
        }
        if (ccc == 0) {
            starter = out.size();
            last_ccc = 255;  // fresh starter: next mark is unblocked
        } else {
            last_ccc = ccc;
        }
        out.push_back(cp);
    }
    return out;
}

std::string nfc_string(std::string_view s) {
    return utf8_encode(nfc(utf8_decode(s)));
}

uint32_t to_lower(uint32_t cp) {
    auto it = std::lower_bound(
        std::begin(kLowercaseMap), std::end(kLowercaseMap), cp,
        [](const LowerEntry& e, uint32_t v) { return e.cp < v; });
    if (it != std::end(kLowercaseMap) && it->cp == cp) return it->lower;
    return cp;
}

std::string lower_string(std::string_view s) {
    auto cps = utf8_decode(s);
    for (auto& cp : cps) cp = to_lower(cp);
    return utf8_encode(cps);
}

bool is_space(uint32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' ||
           cp == '\f' || cp == '\v' || cp == 0x00A0;
}

}  // namespace vitag::uni
