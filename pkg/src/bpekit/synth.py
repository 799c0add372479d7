"""Seeded synthetic desk corpora for tests, demos and benchmarks.

Each topic has a fixed lexicon (seeded by topic name, so held-out documents
share the vocabulary of training documents) and a Zipfian word distribution.
Documents are drawn with a caller-provided seed.

    python -m bpekit.synth OUTDIR --total-bytes 10000000
"""

from __future__ import annotations

import argparse
import json
import random
from functools import lru_cache
from itertools import accumulate
from pathlib import Path

from bpekit.corpus import TABLE1_WEIGHTS

LATIN_ONSETS = ["", "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w",
                "st", "tr", "pr", "ch", "th", "sh", "bl", "cr", "gr"]
LATIN_VOWELS = ["a", "e", "i", "o", "u", "ea", "ou", "io", "y"]
LATIN_CODAS = ["", "", "n", "r", "s", "t", "l", "m", "nd", "st", "ng", "ck", "rt"]

KO_PARTICLES = ["은", "는", "이", "가", "을", "를", "에", "에서", "의", "로", "와", "과", "도", "만", "까지"]
KO_ENDINGS = ["합니다", "했다", "한다", "하는", "있다", "없다", "되었다", "입니다", "이다", "하고", "했지만"]

EURO_EXTRA = "éèêàçüöäßñøåœ"


def _zipf(n: int, s: float = 1.07) -> list[float]:
    return list(accumulate(1.0 / (r + 1) ** s for r in range(n)))


class Lexicon:
    def __init__(self, words: list[str]):
        self.words = words
        self.cum = _zipf(len(words))

    def sample(self, rng: random.Random, k: int) -> list[str]:
        return rng.choices(self.words, cum_weights=self.cum, k=k)


def _unique(gen, n: int) -> list[str]:
    seen, out = set(), []
    while len(out) < n:
        w = gen()
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


@lru_cache(maxsize=None)
def latin_lexicon(n: int = 6000, extra: str = "") -> Lexicon:
    rng = random.Random(f"latin:{extra}")
    vowels = LATIN_VOWELS + list(extra)

    def word():
        return "".join(
            rng.choice(LATIN_ONSETS) + rng.choice(vowels) + rng.choice(LATIN_CODAS)
            for _ in range(rng.choice([1, 1, 2, 2, 2, 3, 3, 4]))
        )

    return Lexicon(_unique(word, n))


@lru_cache(maxsize=None)
def korean_lexicon(n: int = 5000) -> Lexicon:
    rng = random.Random("korean")
    # a few hundred frequent syllables, as in real Korean text
    syllables = _unique(lambda: chr(0xAC00 + rng.randrange(11172)), 400)
    syl = Lexicon(syllables)

    def word():
        return "".join(syl.sample(rng, rng.choice([1, 2, 2, 2, 3, 3, 4])))

    return Lexicon(_unique(word, n))


@lru_cache(maxsize=None)
def cjk_lexicon(n: int = 3000) -> Lexicon:
    rng = random.Random("cjk")
    hira = [chr(c) for c in range(0x3041, 0x3097)]
    kata = [chr(c) for c in range(0x30A1, 0x30FB)]
    han = [chr(0x4E00 + rng.randrange(0x5000)) for _ in range(800)]

    def word():
        pool = rng.choice([hira, kata, han, han])
        return "".join(rng.choice(pool) for _ in range(rng.choice([1, 2, 2, 3])))

    return Lexicon(_unique(word, n))


def english_text(rng: random.Random, n_sentences: int) -> str:
    lex = latin_lexicon()
    out = []
    for _ in range(n_sentences):
        words = lex.sample(rng, rng.randint(6, 18))
        words[0] = words[0].capitalize()
        if rng.random() < 0.2:
            words.insert(rng.randrange(len(words)), str(rng.randint(1, 2025)))
        if len(words) > 8 and rng.random() < 0.4:
            words[len(words) // 2] += ","
        out.append(" ".join(words) + rng.choice([".", ".", ".", "?", "!"]))
    return " ".join(out)


def korean_text(rng: random.Random, n_sentences: int) -> str:
    lex = korean_lexicon()
    out = []
    for _ in range(n_sentences):
        words = [w + (rng.choice(KO_PARTICLES) if rng.random() < 0.6 else "")
                 for w in lex.sample(rng, rng.randint(4, 12))]
        if rng.random() < 0.2:
            words.insert(rng.randrange(len(words)), f"{rng.randint(1, 999)}개")
        out.append(" ".join(words) + " " + rng.choice(KO_ENDINGS) + ".")
    return " ".join(out)


def code_text(rng: random.Random, n_funcs: int) -> str:
    lex = latin_lexicon()
    out = []
    for _ in range(n_funcs):
        name = "_".join(lex.sample(rng, 2)).lower()
        args = ", ".join(w.lower() for w in lex.sample(rng, rng.randint(0, 3)))
        lines = [f"def {name}({args}):"]
        for _ in range(rng.randint(2, 8)):
            a, b = (w.lower() for w in lex.sample(rng, 2))
            kind = rng.random()
            if kind < 0.3:
                lines.append(f"    {a} = {b} + {rng.randint(0, 100)}")
            elif kind < 0.5:
                lines.append(f"    if {a} > {rng.randint(0, 9)}:")
                lines.append(f"        {b}.append({a})")
            elif kind < 0.7:
                lines.append(f"    for {a} in range(len({b})):")
                lines.append(f"        {b}[{a}] *= {rng.randint(2, 16)}")
            else:
                lines.append(f"    # {' '.join(lex.sample(rng, rng.randint(3, 8))).lower()}")
        lines.append(f"    return {rng.choice(['None', 'True', a, b])}")
        out.append("\n".join(lines))
    return "\n\n\n".join(out) + "\n"


def math_text(rng: random.Random, n_items: int) -> str:
    lex = latin_lexicon()
    syms = ["x", "y", "z", "n", "k", "\\alpha", "\\beta", "\\theta", "\\lambda"]
    out = []
    for _ in range(n_items):
        a, b = rng.sample(syms, 2)
        expr = rng.choice([
            f"\\frac{{{a}^{rng.randint(2, 9)}}}{{{b} + {rng.randint(1, 99)}}}",
            f"\\sum_{{{a}=1}}^{{{rng.randint(2, 500)}}} {a}^2 = {rng.randint(10, 99999)}",
            f"\\int_0^{{{rng.randint(1, 9)}}} {a}\\,d{a} = {rng.randint(1, 99)}.{rng.randint(0, 99)}",
            f"{a} = {rng.randint(2, 99)}{b} - {rng.randint(1, 9)}",
        ])
        out.append(f"{english_text(rng, 1)} We have ${expr}$.")
    return "\n".join(out)


def multilingual_text(rng: random.Random, n_sentences: int) -> str:
    out = []
    for _ in range(n_sentences):
        if rng.random() < 0.5:
            out.append("".join(cjk_lexicon().sample(rng, rng.randint(6, 16))) + "。")
        else:
            words = latin_lexicon(4000, EURO_EXTRA).sample(rng, rng.randint(6, 14))
            out.append(" ".join(words).capitalize() + ".")
    return " ".join(out)


def domain_text(rng: random.Random, n_sentences: int) -> str:
    terms = ["revenue", "liability", "plaintiff", "statute", "diagnosis", "dosage", "EBITDA",
             "clinical", "contract", "indemnity", "prognosis", "portfolio"]
    out = []
    for _ in range(n_sentences):
        s = english_text(rng, 1)
        out.append(f"{s[:-1]} {rng.choice(terms)} {rng.randint(1, 99)}.{rng.randint(0, 9)}%.")
    return " ".join(out)


TOPICS = {
    "english": (english_text, {"language": "en", "domain": "web"}),
    "korean": (korean_text, {"language": "ko", "domain": "web"}),
    "code": (code_text, {"domain": "code"}),
    "math": (math_text, {"domain": "math"}),
    "multilingual": (multilingual_text, {"domain": "multilingual"}),
    "domain_specific": (domain_text, {"domain": "domain_specific"}),
}


def documents(topic: str, n_bytes: int, seed: int = 0) -> list[str]:
    """Documents of ``topic`` totalling at least ``n_bytes`` UTF-8 bytes."""
    gen = TOPICS[topic][0]
    rng = random.Random(f"{topic}:{seed}")
    out, total = [], 0
    while total < n_bytes:
        doc = gen(rng, rng.randint(3, 12))
        out.append(doc)
        total += len(doc.encode("utf-8"))
    return out


def chat_records(language: str, n: int, reasoning: bool, seed: int = 0) -> list[dict]:
    """Single-turn instruction/response records in the conversation JSON schema."""
    text = korean_text if language == "ko" else english_text
    rng = random.Random(f"chat:{language}:{reasoning}:{seed}")
    out = []
    for _ in range(n):
        segments = []
        if reasoning:
            segments.append({"type": "think", "text": text(rng, rng.randint(2, 6))})
        segments.append({"type": "text", "text": text(rng, rng.randint(1, 5))})
        out.append({"messages": [
            {"role": "user", "segments": [{"type": "text", "text": text(rng, 1)}]},
            {"role": "assistant", "segments": segments},
        ]})
    return out


def write_jsonl(path: str | Path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            if isinstance(rec, str):
                rec = {"text": rec}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return path


def write_mixture(outdir: str | Path, total_bytes: int, weights: dict | None = None, seed: int = 0,
                  headroom: float = 1.15) -> Path:
    """Write one JSONL file per topic plus ``mixture.json``; return the spec path.

    Each source gets ``headroom`` times its share so sampling never runs dry.
    """
    outdir = Path(outdir)
    weights = weights or TABLE1_WEIGHTS
    total_w = sum(weights.values())
    sources = []
    for topic, w in weights.items():
        need = int(total_bytes * w / total_w * headroom) + 1
        write_jsonl(outdir / f"{topic}.jsonl", documents(topic, need, seed))
        sources.append({"name": topic, "paths": [f"{topic}.jsonl"], "weight": w, **TOPICS[topic][1]})
    spec = {"sources": sources, "total_bytes": total_bytes, "seed": seed}
    path = outdir / "mixture.json"
    path.write_text(json.dumps(spec, indent=2) + "\n", encoding="utf-8")
    return path


def main(argv=None):
    p = argparse.ArgumentParser(prog="python -m bpekit.synth", description=__doc__.splitlines()[0])
    p.add_argument("outdir")
    p.add_argument("--total-bytes", type=int, default=2_000_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    print(write_mixture(args.outdir, args.total_bytes, seed=args.seed))


if __name__ == "__main__":
    main()
