"""Regenerates tests/data/metric_golden.tsv.

Reference values come from sacrebleu 2.3.1 (BLEU, chrF2, chrF++, TER) and
NLTK's RIBES word alignment combined with the plain Kendall tau. Run once;
the output is committed.
"""
import math
import random
import sys

import sacrebleu
from nltk.translate.ribes_score import word_rank_alignment

WORDS = [
    "the", "a", "cat", "sat", "on", "mat", "dog", "ran", "house", "ka", "jingïaroh",
    "u", "ki", "Khasi", "Mizo", "kan", "hming", "অসম", "ভাষা", "আমি", "ঘৰ", "মণিপুৰ",
    "The", "Cat", "12", "3.5", "1,000", "2024-25", "well-known", "don't", "U.S.",
    "(hi)", "end.", "yes,", "\"quote\"", "&amp;", "x/y", "a+b", "e-mail", "--",
]
PUNCT = [".", ",", "!", "?", ";", ":", "-", "'"]


def sentence(rng, lo=1, hi=14):
    n = rng.randint(lo, hi)
    out = []
    for _ in range(n):
        w = rng.choice(WORDS)
        if rng.random() < 0.15:
            w = w + rng.choice(PUNCT)
        out.append(w)
    return " ".join(out)


def perturb(rng, ref):
    words = ref.split()
    kind = rng.randrange(6)
    if kind == 0:
        return ref
    if kind == 1 and len(words) > 2:  # move a phrase
        i = rng.randrange(len(words))
        j = rng.randrange(i, min(len(words), i + 3))
        phrase = words[i:j + 1]
        rest = words[:i] + words[j + 1:]
        k = rng.randrange(len(rest) + 1)
        return " ".join(rest[:k] + phrase + rest[k:])
    if kind == 2:  # substitutions and deletions
        out = []
        for w in words:
            r = rng.random()
            if r < 0.2:
                continue
            out.append(rng.choice(WORDS) if r < 0.4 else w)
        return " ".join(out)
    if kind == 3:  # case and whitespace noise
        return "  ".join(w.upper() if rng.random() < 0.3 else w for w in words) + "  "
    if kind == 4:
        return sentence(rng)
    return " ".join(words + sentence(rng, 1, 4).split())


def ribes(hyp, ref):
    h, r = hyp.split(), ref.split()
    if not h or not r:
        return 0.0
    worder = word_rank_alignment(r, h)
    n = len(worder)
    if n >= 2:
        asc = sum(1 for i in range(n) for j in range(i + 1, n) if worder[i] < worder[j])
        nkt = asc / (n * (n - 1) / 2)
    else:
        nkt = 1.0 if n == 1 and len(h) == 1 and len(r) == 1 else 0.0
    p1 = n / len(h)
    bp = min(1.0, math.exp(1.0 - len(r) / len(h)))
    return nkt * p1 ** 0.25 * bp ** 0.10


def scores(hyps, refs):
    return (
        sacrebleu.metrics.BLEU().corpus_score(hyps, [refs]).score,
        sacrebleu.metrics.CHRF().corpus_score(hyps, [refs]).score,
        sacrebleu.metrics.CHRF(word_order=2).corpus_score(hyps, [refs]).score,
        sacrebleu.metrics.TER().corpus_score(hyps, [refs]).score,
        sum(ribes(h, r) for h, r in zip(hyps, refs)) / len(hyps),
    )


def main(path):
    rng = random.Random(20240917)
    cases = [("cat sat", "cat mat"), ("a x c", "a b c"), ("c a b", "a b c"), ("b a", "a b"), ("", "the cat")]
    while len(cases) < 50:
        ref = sentence(rng)
        cases.append((perturb(rng, ref), ref))
    hyps = [h for h, _ in cases]
    refs = [r for _, r in cases]
    with open(path, "w", encoding="utf-8") as f:
        f.write("id\thyp\tref\tbleu\tchrf2\tchrfpp\tter\tribes\n")
        for i, (h, r) in enumerate(cases):
            f.write("\t".join([str(i), h, r] + ["%.12f" % s for s in scores([h], [r])]) + "\n")
        f.write("\t".join(["corpus", "", ""] + ["%.12f" % s for s in scores(hyps, refs)]) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/metric_golden.tsv")
