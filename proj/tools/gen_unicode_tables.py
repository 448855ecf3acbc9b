#!/usr/bin/env python3
"""Regenerates src/unicode_tables.inc from the Python unicodedata database.

Covers the Latin ranges (Basic Latin supplements through Latin Extended
Additional) plus the combining diacritical marks block, which is enough for
Vietnamese and Western European text. Codepoints outside these ranges pass
through normalization unchanged.
"""

import sys
import unicodedata

RANGES = (
    list(range(0x00A0, 0x0250))      # Latin-1 Supplement .. Latin Extended-B
    + list(range(0x0300, 0x0370))    # Combining Diacritical Marks
    + list(range(0x1E00, 0x1F00))    # Latin Extended Additional (Vietnamese)
)


def main(out=sys.stdout):
    decomp = {}
    for cp in RANGES:
        d = unicodedata.decomposition(chr(cp))
        if d and not d.startswith("<"):
            decomp[cp] = [int(x, 16) for x in d.split()]

    comp = {}
    for cp, parts in decomp.items():
        if len(parts) == 2:
            if unicodedata.normalize("NFC", "".join(map(chr, parts))) == chr(cp):
                comp[(parts[0], parts[1])] = cp

    ccc = {cp: unicodedata.combining(chr(cp)) for cp in RANGES
           if unicodedata.combining(chr(cp))}

    lower = {cp: cp + 32 for cp in range(0x41, 0x5B)}
    for cp in RANGES:
        lc = chr(cp).lower()
        if len(lc) == 1 and ord(lc) != cp:
            lower[cp] = ord(lc)

    w = out.write
    w("// Generated by tools/gen_unicode_tables.py -- do not edit by hand.\n\n")

    w("struct DecompEntry { uint32_t cp; uint32_t first; uint32_t second; };\n")
    w("static const DecompEntry kDecompositions[] = {\n")
    for cp in sorted(decomp):
        parts = decomp[cp]
        first = parts[0]
        second = parts[1] if len(parts) == 2 else 0
        w("    {0x%04X, 0x%04X, 0x%04X},\n" % (cp, first, second))
    w("};\n\n")

    w("struct CompEntry { uint32_t first; uint32_t second; uint32_t composed; };\n")
    w("static const CompEntry kCompositions[] = {\n")
    for (a, b) in sorted(comp):
        w("    {0x%04X, 0x%04X, 0x%04X},\n" % (a, b, comp[(a, b)]))
    w("};\n\n")

    w("struct CccEntry { uint32_t cp; uint8_t ccc; };\n")
    w("static const CccEntry kCombiningClasses[] = {\n")
    for cp in sorted(ccc):
        w("    {0x%04X, %d},\n" % (cp, ccc[cp]))
    w("};\n\n")

    w("struct LowerEntry { uint32_t cp; uint32_t lower; };\n")
    w("static const LowerEntry kLowercaseMap[] = {\n")
    for cp in sorted(lower):
        w("    {0x%04X, 0x%04X},\n" % (cp, lower[cp]))
    w("};\n")


if __name__ == "__main__":
    main()
