"""Bytes-per-token compression benchmark.

A row aggregates one tokenizer over one corpus slice as
``sum(bytes) / sum(tokens)`` over the first ``sample_cap`` documents. Plain
documents are measured as raw UTF-8 text. Chat records are measured on their
assistant outputs (think segments included unless the slice is tagged
``reasoning=false``), rendered without role headers and encoded with special
tokens parsed.
"""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from importlib import resources
from itertools import islice
from pathlib import Path

from bpekit import chat_template
from bpekit.codec import encode
from bpekit.errors import DivideByZero, EmptyCorpus, EmptyEncoding
from bpekit.model import TokenizerModel

CSV_COLUMNS = ["tokenizer", "domain", "language", "reasoning", "documents", "bytes", "tokens", "bytes_per_token"]
DEFAULT_SAMPLE_CAP = 10_000


@dataclass(frozen=True)
class Slice:
    domain: str | None = None
    language: str | None = None
    reasoning: bool | None = None

    def key(self) -> str:
        """Canonical key, e.g. ``language=ko;reasoning=false``."""
        parts = []
        for name in ("domain", "language", "reasoning"):
            v = getattr(self, name)
            if v is not None:
                parts.append(f"{name}={str(v).lower() if isinstance(v, bool) else v}")
        return ";".join(parts)

    @classmethod
    def from_key(cls, key: str) -> Slice:
        return cls.from_tags(dict(kv.split("=", 1) for kv in key.split(";") if kv))

    @classmethod
    def from_tags(cls, tags: dict) -> Slice:
        unknown = set(tags) - {"domain", "language", "reasoning"}
        if unknown:
            raise ValueError(f"unknown slice tags: {sorted(unknown)}")
        reasoning = tags.get("reasoning")
        if isinstance(reasoning, str):
            if reasoning.lower() not in ("true", "false"):
                raise ValueError(f"reasoning must be true or false, not {reasoning!r}")
            reasoning = reasoning.lower() == "true"
        return cls(tags.get("domain"), tags.get("language"), reasoning)

    def to_dict(self) -> dict:
        return {"domain": self.domain, "language": self.language, "reasoning": self.reasoning}


@dataclass(frozen=True)
class Row:
    tokenizer: str
    slice: Slice
    documents: int
    bytes: int
    tokens: int

    @property
    def bytes_per_token(self) -> Fraction:
        return Fraction(self.bytes, self.tokens)


@dataclass(frozen=True)
class Gain:
    tokenizer: str
    baseline: str
    slice: Slice
    relative_gain: float

    @property
    def percent(self) -> str:
        return format_percent(self.relative_gain)


@dataclass
class BenchmarkReport:
    rows: list[Row] = field(default_factory=list)
    baselines: dict | None = None
    gains: list[Gain] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "tokenizer": r.tokenizer,
                    "slice": r.slice.to_dict(),
                    "documents": r.documents,
                    "bytes": r.bytes,
                    "tokens": r.tokens,
                    "bytes_per_token": float(r.bytes_per_token),
                }
                for r in self.rows
            ],
            "baselines": self.baselines,
            "gains": [
                {
                    "tokenizer": g.tokenizer,
                    "baseline": g.baseline,
                    "slice": g.slice.to_dict(),
                    "relative_gain": g.relative_gain,
                    "percent": g.percent,
                }
                for g in self.gains
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> BenchmarkReport:
        rows = [
            Row(r["tokenizer"], Slice(**r["slice"]), r["documents"], r["bytes"], r["tokens"])
            for r in d["rows"]
        ]
        gains = [
            Gain(g["tokenizer"], g["baseline"], Slice(**g["slice"]), g["relative_gain"])
            for g in d.get("gains", [])
        ]
        return cls(rows, d.get("baselines"), gains)


# -----------------------------------------------------------------------------
# metrics


def relative_gain(a, b) -> Fraction | float:
    """``a / b - 1``. Exact when both inputs are exact."""
    if b == 0:
        raise DivideByZero("relative gain against a zero baseline")
    if isinstance(a, float) or isinstance(b, float):
        a, b = Fraction(str(a)), Fraction(str(b))
    return Fraction(a) / Fraction(b) - 1


def format_percent(gain, decimals: int = 1) -> str:
    """Signed percentage, rounded half away from zero: 0.35942 -> ``+35.9%``."""
    q = Decimal(1).scaleb(-decimals) if decimals else Decimal(1)
    pct = (Decimal(str(float(gain))) * 100).quantize(q, rounding=ROUND_HALF_UP)
    sign = "+" if pct > 0 else ""
    return f"{sign}{pct}%"


def measured_text(doc, slc: Slice | None = None) -> tuple[bytes, bool]:
    """Bytes to measure for ``doc`` and whether specials are parsed when encoding."""
    if isinstance(doc, bytes):
        return doc, False
    if isinstance(doc, str):
        return doc.encode("utf-8", "surrogateescape"), False
    conv = doc if isinstance(doc, chat_template.Conversation) else chat_template.from_dict(doc)
    keep = slc is None or slc.reasoning is not False
    return chat_template.render_assistant_outputs(conv, include_reasoning=keep), True


def bytes_per_token(text, model: TokenizerModel) -> Fraction:
    data, parse = measured_text(text)
    if not data:
        raise EmptyEncoding("cannot measure an empty text")
    return Fraction(len(data), len(encode(data, model, parse_specials=parse)))


def measure(docs, model: TokenizerModel, slc: Slice | None = None) -> tuple[int, int]:
    """Total ``(bytes, tokens)`` over ``docs``."""
    n_bytes = n_tokens = 0
    for doc in docs:
        data, parse = measured_text(doc, slc)
        n_bytes += len(data)
        n_tokens += len(encode(data, model, parse_specials=parse))
    return n_bytes, n_tokens


def _measure_task(args):
    name, model, slc, docs = args
    return name, slc, measure(docs, model, slc)


# -----------------------------------------------------------------------------
# runs


def load_baselines(path: str | Path | None = None) -> dict:
    """Reported bytes-per-token values of external tokenizers (never recomputed)."""
    if path is None:
        raw = resources.files("bpekit.data").joinpath("baselines.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    return json.loads(raw)


def compute_gains(rows: list[Row], baselines: dict | None) -> list[Gain]:
    """Gain of every row over every other tokenizer measured or reported on its slice."""
    by_slice: dict[Slice, dict[str, Fraction]] = {}
    for r in rows:
        by_slice.setdefault(r.slice, {})[r.tokenizer] = r.bytes_per_token
    out = []
    for r in rows:
        refs = {k: v for k, v in by_slice[r.slice].items() if k != r.tokenizer}
        for name, table in (baselines or {}).items():
            if r.slice.key() in table and name not in refs:
                refs[name] = table[r.slice.key()]
        for name, value in refs.items():
            out.append(Gain(r.tokenizer, name, r.slice, float(relative_gain(r.bytes_per_token, value))))
    out.sort(key=lambda g: (g.tokenizer, g.slice.key(), g.baseline))
    return out


def run_benchmark(
    corpora: Iterable,
    models,
    sample_cap: int = DEFAULT_SAMPLE_CAP,
    baselines: dict | None = None,
    jobs: int = 1,
) -> BenchmarkReport:
    """Measure every model on every slice.

    ``corpora`` holds ``(slice, documents)`` pairs where ``slice`` is a
    :class:`Slice` or a tag dict; ``models`` maps tokenizer name to model.
    """
    if sample_cap < 1:
        raise ValueError("sample_cap must be >= 1")
    if isinstance(models, TokenizerModel):
        models = {"model": models}
    slices: list[tuple[Slice, list]] = []
    for tags, docs in corpora:
        slc = tags if isinstance(tags, Slice) else Slice.from_tags(tags)
        sample = list(islice(docs, sample_cap))
        if not sample:
            raise EmptyCorpus(f"slice {slc.key() or '<all>'} has no documents")
        slices.append((slc, sample))

    tasks = [(name, model, slc, docs) for name, model in models.items() for slc, docs in slices]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_measure_task, tasks))
    else:
        results = [_measure_task(t) for t in tasks]

    rows = []
    for (name, slc, (b, t)), task in zip(results, tasks):
        if t == 0:
            raise EmptyEncoding(f"slice {slc.key() or '<all>'} encodes to zero tokens")
        rows.append(Row(name, slc, len(task[3]), b, t))
    rows.sort(key=lambda r: (r.tokenizer, r.slice.key()))
    return BenchmarkReport(rows, baselines, compute_gains(rows, baselines))


# -----------------------------------------------------------------------------
# output


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    return str(v)


def report_csv(report: BenchmarkReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([
            r.tokenizer, _cell(r.slice.domain), _cell(r.slice.language), _cell(r.slice.reasoning),
            r.documents, r.bytes, r.tokens, f"{float(r.bytes_per_token):.6f}",
        ])
    return buf.getvalue()


def parse_csv(text: str) -> list[Row]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        tags = {k: rec[k] for k in ("domain", "language", "reasoning") if rec[k]}
        rows.append(Row(rec["tokenizer"], Slice.from_tags(tags), int(rec["documents"]),
                        int(rec["bytes"]), int(rec["tokens"])))
    return rows


def report_json(report: BenchmarkReport) -> str:
    return json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n"


def emit_report(report: BenchmarkReport, format: str = "json", path: str | Path | None = None) -> str:
    """Render ``report`` as ``json`` or ``csv``; also write it to ``path`` if given."""
    if format == "json":
        text = report_json(report)
    elif format == "csv":
        text = report_csv(report)
    else:
        raise ValueError(f"unknown report format {format!r}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
