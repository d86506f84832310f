#include "pgnet/unicode.hpp"

#include <algorithm>
#include <cstdint>
#include <iterator>

#include "pgnet/errors.hpp"

namespace pgnet::uni {

namespace {

#include "unicode_tables.inc"

// Hangul syllable composition constants (UAX #15 §3.12).
constexpr char32_t kHangulSBase = 0xAC00;
constexpr char32_t kHangulLBase = 0x1100;
constexpr char32_t kHangulVBase = 0x1161;
constexpr char32_t kHangulTBase = 0x11A7;
constexpr char32_t kHangulLCount = 19;
constexpr char32_t kHangulVCount = 21;
constexpr char32_t kHangulTCount = 28;
constexpr char32_t kHangulNCount = kHangulVCount * kHangulTCount;
constexpr char32_t kHangulSCount = kHangulLCount * kHangulNCount;

const DecompEntry* find_decomposition(char32_t cp) {
    const DecompEntry* first = std::begin(kDecompositions);
    const DecompEntry* last = std::end(kDecompositions);
    const DecompEntry* it = std::lower_bound(
        first, last, cp, [](const DecompEntry& e, char32_t c) { return e.cp < c; });
    return (it != last && it->cp == cp) ? it : nullptr;
}

char32_t compose_pair(char32_t lead, char32_t trail) {
    // Hangul LV / LVT composition.
    if (lead >= kHangulLBase && lead < kHangulLBase + kHangulLCount && trail >= kHangulVBase &&
        trail < kHangulVBase + kHangulVCount) {
        return kHangulSBase + ((lead - kHangulLBase) * kHangulVCount + (trail - kHangulVBase)) *
                                  kHangulTCount;
    }
    if (lead >= kHangulSBase && lead < kHangulSBase + kHangulSCount &&
        (lead - kHangulSBase) % kHangulTCount == 0 && trail > kHangulTBase &&
        trail < kHangulTBase + kHangulTCount) {
        return lead + (trail - kHangulTBase);
    }
    const std::uint64_t key = (static_cast<std::uint64_t>(lead) << 21) | trail;
    const CompEntry* first = std::begin(kCompositions);
    const CompEntry* last = std::end(kCompositions);
    const CompEntry* it = std::lower_bound(
        first, last, key, [](const CompEntry& e, std::uint64_t k) { return e.key < k; });
    return (it != last && it->key == key) ? it->composed : 0;
}

void decompose_one(char32_t cp, std::u32string& out) {
    if (cp >= kHangulSBase && cp < kHangulSBase + kHangulSCount) {
        const char32_t s = cp - kHangulSBase;
        out.push_back(kHangulLBase + s / kHangulNCount);
        out.push_back(kHangulVBase + (s % kHangulNCount) / kHangulTCount);
        if (s % kHangulTCount != 0) out.push_back(kHangulTBase + s % kHangulTCount);
        return;
    }
    if (const DecompEntry* e = find_decomposition(cp)) {
        for (unsigned char i = 0; i < e->len; ++i) out.push_back(e->out[i]);
        return;
    }
    out.push_back(cp);
}

void canonical_reorder(std::u32string& s) {
    // Stable insertion sort over runs of nonzero combining class.
    for (std::size_t i = 1; i < s.size(); ++i) {
        const unsigned char cc = combining_class(s[i]);
        if (cc == 0) continue;
        std::size_t j = i;
        while (j > 0 && combining_class(s[j - 1]) > cc) {
            std::swap(s[j - 1], s[j]);
            --j;
        }
    }
}

}  // namespace

unsigned char combining_class(char32_t cp) {
    const CccEntry* first = std::begin(kCombiningClasses);
    const CccEntry* last = std::end(kCombiningClasses);
    const CccEntry* it = std::lower_bound(
        first, last, cp, [](const CccEntry& e, char32_t c) { return e.cp < c; });
    return (it != last && it->cp == cp) ? it->ccc : 0;
}

bool is_format_control(char32_t cp) {
    return std::binary_search(std::begin(kFormatControls), std::end(kFormatControls), cp);
}

bool is_control(char32_t cp) { return cp < 0x20 || (cp >= 0x7F && cp <= 0x9F); }

bool is_space(char32_t cp) {
    if (cp == 0x09 || cp == 0x0A || cp == 0x0B || cp == 0x0C || cp == 0x0D || cp == 0x20 ||
        cp == 0x85 || cp == 0xA0) {
        return true;
    }
    return std::binary_search(std::begin(kSpaceSeparators), std::end(kSpaceSeparators), cp);
}

std::u32string decode_utf8(std::string_view text) {
    std::u32string out;
    out.reserve(text.size());
    std::size_t i = 0;
    const auto fail = [&](const char* why, std::size_t at) -> char32_t {
        throw EncodingError(std::string("invalid UTF-8 (") + why + ") at byte offset " +
                                std::to_string(at),
                            at);
    };
    while (i < text.size()) {
        const std::size_t start = i;
        const unsigned char b0 = static_cast<unsigned char>(text[i]);
        char32_t cp = 0;
        int extra = 0;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            extra = 1;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            extra = 2;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            extra = 3;
        } else {
            fail("bad lead byte", start);
        }
        if (i + static_cast<std::size_t>(extra) >= text.size()) fail("truncated sequence", start);
        for (int k = 1; k <= extra; ++k) {
            const unsigned char b = static_cast<unsigned char>(text[i + static_cast<std::size_t>(k)]);
            if ((b & 0xC0) != 0x80) fail("bad continuation byte", i + static_cast<std::size_t>(k));
            cp = (cp << 6) | (b & 0x3F);
        }
        static constexpr char32_t kMinByLen[4] = {0, 0x80, 0x800, 0x10000};
        if (extra > 0 && cp < kMinByLen[extra]) fail("overlong encoding", start);
        if (cp >= 0xD800 && cp <= 0xDFFF) fail("surrogate code point", start);
        if (cp > 0x10FFFF) fail("code point above U+10FFFF", start);
        out.push_back(cp);
        i += static_cast<std::size_t>(extra) + 1;
    }
    return out;
}

std::string encode_utf8(std::u32string_view codepoints) {
    std::string out;
    out.reserve(codepoints.size() * 2);
    for (char32_t cp : codepoints) {
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
    return out;
}

std::u32string nfc(std::u32string_view codepoints) {
    std::u32string decomposed;
    decomposed.reserve(codepoints.size() + codepoints.size() / 2);
    for (char32_t cp : codepoints) decompose_one(cp, decomposed);
    canonical_reorder(decomposed);

    // Primary composition (UAX #15 algorithm).
    std::u32string out;
    out.reserve(decomposed.size());
    std::ptrdiff_t last_starter = -1;
    unsigned char prev_cc = 0;
    for (char32_t cp : decomposed) {
        const unsigned char cc = combining_class(cp);
        if (last_starter >= 0 && (prev_cc == 0 || prev_cc < cc)) {
            if (const char32_t comp = compose_pair(out[static_cast<std::size_t>(last_starter)], cp)) {
                out[static_cast<std::size_t>(last_starter)] = comp;
                // prev_cc stays: the combining run continues past the absorbed mark.
                continue;
            }
        }
        if (cc == 0) {
            last_starter = static_cast<std::ptrdiff_t>(out.size());
        }
        prev_cc = cc;
        out.push_back(cp);
    }
    return out;
}

}  // namespace pgnet::uni
