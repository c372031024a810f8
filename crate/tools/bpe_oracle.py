#!/usr/bin/env python3
"""Reference byte-level BPE (GPT-2 encoder algorithm) over the shipped merges.

Used once to freeze expected segmentations into the Rust test suite.
usage: bpe_oracle.py merges.txt token [token ...]
"""
import sys

import regex as re  # noqa: F401  (falls back below if missing)


def bytes_to_unicode():
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(ord("¡"), ord("¬") + 1)) + list(range(ord("®"), ord("ÿ") + 1))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, map(chr, cs)))


PAT = re.compile(r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+""")


def get_pairs(word):
    return {(word[i], word[i + 1]) for i in range(len(word) - 1)}


def bpe(ranks, token):
    word = tuple(token)
    pairs = get_pairs(word)
    if not pairs:
        return [token]
    while True:
        bigram = min(pairs, key=lambda p: ranks.get(p, float("inf")))
        if bigram not in ranks:
            break
        first, second = bigram
        new_word = []
        i = 0
        while i < len(word):
            try:
                j = word.index(first, i)
                new_word.extend(word[i:j])
                i = j
            except ValueError:
                new_word.extend(word[i:])
                break
            if word[i] == first and i < len(word) - 1 and word[i + 1] == second:
                new_word.append(first + second)
                i += 2
            else:
                new_word.append(word[i])
                i += 1
        word = tuple(new_word)
        if len(word) == 1:
            break
        pairs = get_pairs(word)
    return list(word)


def main():
    with open(sys.argv[1], encoding="utf-8") as fh:
        lines = [l.rstrip("\n") for l in fh if l.strip() and not l.startswith("#")]
    ranks = {tuple(l.split(" ")): i for i, l in enumerate(lines)}
    enc = bytes_to_unicode()
    dec = {v: k for k, v in enc.items()}
    for text in sys.argv[2:]:
        out = []
        for piece in PAT.findall(text):
            mapped = "".join(enc[b] for b in piece.encode("utf-8"))
            for sub in bpe(ranks, mapped):
                out.append(bytes(dec[c] for c in sub).decode("utf-8", errors="backslashreplace"))
        print(repr(text), "->", out)


if __name__ == "__main__":
    main()
