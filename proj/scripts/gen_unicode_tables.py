#!/usr/bin/env python3
"""Regenerates core/src/unicode_tables.inc from Python's unicodedata.

The C++ normalizer needs four tables: full canonical (NFD) decompositions,
nonzero canonical combining classes, primary composition pairs, and the
format-control / space-separator category sets. Hangul syllables are handled
algorithmically at runtime and are excluded here.

Usage: python3 scripts/gen_unicode_tables.py > core/src/unicode_tables.inc
"""

import sys
import unicodedata

HANGUL_S_BASE = 0xAC00
HANGUL_S_COUNT = 11172


def code_points():
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        yield cp


def canonical_pair(cp):
    d = unicodedata.decomposition(chr(cp))
    if not d or d.startswith("<"):
        return None
    return [int(x, 16) for x in d.split()]


def main():
    out = sys.stdout

    decomp = []
    for cp in code_points():
        if HANGUL_S_BASE <= cp < HANGUL_S_BASE + HANGUL_S_COUNT:
            continue
        nfd = unicodedata.normalize("NFD", chr(cp))
        if nfd != chr(cp):
            cps = [ord(c) for c in nfd]
            assert 1 <= len(cps) <= 4, hex(cp)
            decomp.append((cp, cps))

    ccc = []
    for cp in code_points():
        k = unicodedata.combining(chr(cp))
        if k:
            ccc.append((cp, k))

    comp = []
    for cp in code_points():
        if HANGUL_S_BASE <= cp < HANGUL_S_BASE + HANGUL_S_COUNT:
            continue
        d = canonical_pair(cp)
        if d and len(d) == 2:
            lead, trail = d
            if unicodedata.combining(chr(lead)) == 0:
                # Recomposing under NFC filters out the composition exclusions.
                if unicodedata.normalize("NFC", chr(lead) + chr(trail)) == chr(cp):
                    comp.append(((lead << 21) | trail, cp))
    comp.sort()

    cf = [cp for cp in code_points() if unicodedata.category(chr(cp)) == "Cf"]
    zs = [cp for cp in code_points() if unicodedata.category(chr(cp)) in ("Zs", "Zl", "Zp")]

    out.write("// Generated by scripts/gen_unicode_tables.py "
              f"(Unicode {unicodedata.unidata_version}). Do not edit.\n\n")

    out.write("struct DecompEntry { char32_t cp; unsigned char len; char32_t out[4]; };\n")
    out.write(f"inline constexpr DecompEntry kDecompositions[{len(decomp)}] = {{\n")
    for cp, cps in decomp:
        padded = cps + [0] * (4 - len(cps))
        vals = ",".join(f"0x{v:X}" for v in padded)
        out.write(f"  {{0x{cp:X},{len(cps)},{{{vals}}}}},\n")
    out.write("};\n\n")

    out.write("struct CccEntry { char32_t cp; unsigned char ccc; };\n")
    out.write(f"inline constexpr CccEntry kCombiningClasses[{len(ccc)}] = {{\n")
    for cp, k in ccc:
        out.write(f"  {{0x{cp:X},{k}}},\n")
    out.write("};\n\n")

    out.write("struct CompEntry { unsigned long long key; char32_t composed; };\n")
    out.write(f"inline constexpr CompEntry kCompositions[{len(comp)}] = {{\n")
    for key, cp in comp:
        out.write(f"  {{0x{key:X}ULL,0x{cp:X}}},\n")
    out.write("};\n\n")

    out.write(f"inline constexpr char32_t kFormatControls[{len(cf)}] = {{\n  ")
    out.write(",".join(f"0x{cp:X}" for cp in cf))
    out.write("\n};\n\n")

    out.write(f"inline constexpr char32_t kSpaceSeparators[{len(zs)}] = {{\n  ")
    out.write(",".join(f"0x{cp:X}" for cp in zs))
    out.write("\n};\n")


if __name__ == "__main__":
    main()
