"""Freezes 20 random corpora and their BLEU scores into tests/data/bleu.json.

k = 0 values come from nltk's corpus_bleu without smoothing. For k > 0 the
trivially shared n-grams (top-k over orders 1..4 of the references, ties by
key) are removed from candidate and reference counts before clipping; that
path is checked against nltk by confirming it reproduces nltk at k = 0.
Candidates keep at least four tokens: nltk floors each sentence's n-gram
denominator at 1, which only differs from plain corpus BLEU below that length.
"""
import json
import math
import pathlib
import random
import warnings
from collections import Counter

from nltk.translate.bleu_score import corpus_bleu

ROOT = pathlib.Path(__file__).resolve().parent.parent
SEP = "\x1f"


def grams(tokens, n):
    return Counter(SEP.join(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def shared(refs, k):
    pooled = Counter()
    for r in refs:
        for n in range(1, 5):
            pooled.update(grams(r, n))
    ranked = sorted(pooled.items(), key=lambda kv: (-kv[1], kv[0]))
    return {g for g, _ in ranked[:k]}


def crystal(cands, refs, k):
    ignore = shared(refs, k) if k else set()
    num = [0] * 4
    den = [0] * 4
    c_len = sum(len(c) for c in cands)
    r_len = sum(len(r) for r in refs)
    for c, r in zip(cands, refs):
        for n in range(1, 5):
            cg = {g: v for g, v in grams(c, n).items() if g not in ignore}
            rg = grams(r, n)
            num[n - 1] += sum(min(v, rg.get(g, 0)) for g, v in cg.items())
            den[n - 1] += sum(cg.values())
    if min(num) == 0 or min(den) == 0:
        return 0.0
    log_p = sum(math.log(num[i] / den[i]) for i in range(4)) / 4
    bp = 1.0 if c_len > r_len else math.exp(1 - r_len / c_len)
    return bp * math.exp(log_p)


rng = random.Random(20240601)
corpora = []
for idx in range(20):
    vocab = ["w%d" % v for v in range(rng.randint(4, 14))]
    pairs = rng.randint(2, 8)
    cands, refs = [], []
    for _ in range(pairs):
        ref = [rng.choice(vocab) for _ in range(rng.randint(4, 30))]
        cand = list(ref)
        for _ in range(rng.randint(0, len(cand))):
            op = rng.random()
            pos = rng.randrange(len(cand)) if cand else 0
            if op < 0.4 and cand:
                cand[pos] = rng.choice(vocab)
            elif op < 0.7 and len(cand) > 4:
                del cand[pos]
            else:
                cand.insert(pos, rng.choice(vocab))
        cands.append(cand)
        refs.append(ref)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        nltk_value = corpus_bleu([[r] for r in refs], cands)
    mine = crystal(cands, refs, 0)
    assert abs(mine - nltk_value) < 1e-12, (idx, mine, nltk_value)
    corpora.append({"candidates": cands, "references": refs, "bleu": nltk_value,
                    "crystal_k5": crystal(cands, refs, 5), "crystal_k20": crystal(cands, refs, 20)})

(ROOT / "data" / "bleu.json").write_text(json.dumps(corpora) + "\n")
