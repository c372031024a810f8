#!/usr/bin/env python3
"""Regenerate crates/core/data/{vocab.txt,merges.txt} from GPT-2 r50k_base ranks.

RoBERTa shares GPT-2's byte-level BPE merges. Its vocabulary adds four leading
specials, three fairseq padding words and <mask>, which gives 50,265 entries.
Ids here follow GPT-2 rank order offset by the leading specials; they are not
RoBERTa's frequency-ordered ids.

usage: gen_bpe_data.py path/to/r50k_base.tiktoken out_dir
"""
import base64
import sys


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


def split_at_rank(ranks, token, max_rank):
    parts = [bytes([b]) for b in token]
    while True:
        best = None
        for i in range(len(parts) - 1):
            r = ranks.get(parts[i] + parts[i + 1])
            if r is not None and r < max_rank and (best is None or r < best[0]):
                best = (r, i)
        if best is None:
            break
        i = best[1]
        parts = parts[:i] + [parts[i] + parts[i + 1]] + parts[i + 2:]
    return parts


def main():
    src, out = sys.argv[1], sys.argv[2]
    ranks = {}
    with open(src, "rb") as fh:
        for line in fh:
            if line.strip():
                tok, rank = line.split()
                ranks[base64.b64decode(tok)] = int(rank)
    enc = bytes_to_unicode()
    show = lambda b: "".join(enc[x] for x in b)
    by_rank = sorted(ranks.items(), key=lambda kv: kv[1])

    merges = []
    for tok, rank in by_rank:
        if len(tok) == 1:
            continue
        parts = split_at_rank(ranks, tok, rank)
        assert len(parts) == 2, (tok, parts)
        merges.append(f"{show(parts[0])} {show(parts[1])}")

    vocab = ["<s>", "<pad>", "</s>", "<unk>"]
    vocab += [show(tok) for tok, _ in by_rank]
    vocab += ["<|endoftext|>", "madeupword0000", "madeupword0001", "madeupword0002", "<mask>"]

    with open(f"{out}/merges.txt", "w", encoding="utf-8") as fh:
        fh.write("#version: 0.2\n")
        fh.write("\n".join(merges) + "\n")
    with open(f"{out}/vocab.txt", "w", encoding="utf-8") as fh:
        for i, tok in enumerate(vocab):
            fh.write(f"{tok}\t{i}\n")
    print(len(vocab), "vocab entries,", len(merges), "merges")


if __name__ == "__main__":
    main()
