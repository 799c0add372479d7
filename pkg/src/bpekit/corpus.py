"""Corpus ingestion, weighted mixture sampling and file-level sharding."""

from __future__ import annotations

import json
import logging
import os
import random
from collections.abc import Iterator
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from bpekit import chat_template
from bpekit.errors import ConfigInvalid, InvalidRank, SourceExhausted

log = logging.getLogger(__name__)

# Topic proportions of the reference tokenizer training mix. They sum to 0.96;
# sample_mixture normalizes them.
TABLE1_WEIGHTS = {
    "english": 0.40,
    "korean": 0.22,
    "code": 0.12,
    "math": 0.10,
    "multilingual": 0.08,
    "domain_specific": 0.04,
}


@dataclass
class LoadStats:
    documents: int = 0
    malformed_count: int = 0
    malformed: list[str] = field(default_factory=list)


def _docs_in_file(path: Path, stats: LoadStats) -> Iterator:
    if path.suffix == ".jsonl":
        with path.open("r", encoding="utf-8", errors="surrogateescape") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except ValueError:
                    rec = None
                if isinstance(rec, dict) and isinstance(rec.get("text"), str):
                    yield rec["text"]
                elif isinstance(rec, dict) and isinstance(rec.get("messages"), list):
                    yield rec
                else:
                    stats.malformed_count += 1
                    stats.malformed.append(f"{path}:{lineno}")
                    log.debug("skipping malformed line %s:%d", path, lineno)
                    continue
                stats.documents += 1
    else:
        yield path.read_bytes().decode("utf-8", "surrogateescape")
        stats.documents += 1


def expand_paths(paths) -> list[Path]:
    """Files as given; directories contribute their .jsonl/.txt files."""
    out = set()
    for p in map(Path, paths):
        if p.is_dir():
            out.update(q for q in p.rglob("*") if q.is_file() and q.suffix in (".jsonl", ".txt"))
        else:
            out.add(p)
    return sorted(out)


def load_documents(paths, stats: LoadStats | None = None) -> Iterator:
    """Yield documents in path-sorted, line order.

    ``.jsonl`` lines are objects with a ``"text"`` string (or a chat
    ``"messages"`` list, yielded as the raw dict); any other line is skipped
    and counted in ``stats.malformed_count``. Other files are one document each.
    """
    stats = stats if stats is not None else LoadStats()
    for path in expand_paths(paths):
        yield from _docs_in_file(path, stats)


def document_text(doc) -> bytes | str:
    """Trainable text of a document; chat records are rendered with the template."""
    if isinstance(doc, (bytes, str)):
        return doc
    return chat_template.render(chat_template.from_dict(doc))


def doc_bytes(doc) -> int:
    if isinstance(doc, bytes):
        return len(doc)
    if isinstance(doc, str):
        return len(doc.encode("utf-8", "surrogateescape"))
    return len(document_text(doc))


# -----------------------------------------------------------------------------
# mixture


@dataclass
class CorpusSource:
    name: str
    paths: list[str]
    weight: float
    language: str | None = None
    domain: str | None = None
    reasoning: bool | None = None

    def __post_init__(self):
        if not self.paths:
            raise ConfigInvalid(f"source {self.name!r} has no paths")
        if not 0 < self.weight <= 1:
            raise ConfigInvalid(f"source {self.name!r} weight {self.weight} outside (0, 1]")


@dataclass
class MixtureSpec:
    sources: list[CorpusSource]
    total_bytes: int
    seed: int = 0
    # "error": raise SourceExhausted; "upweight": give a short source's
    # documents a fractional weight so its weighted bytes meet the quota
    on_exhausted: str = "error"

    def __post_init__(self):
        if self.total_bytes <= 0:
            raise ConfigInvalid("total_bytes must be > 0")
        if not self.sources:
            raise ConfigInvalid("mixture has no sources")
        names = [s.name for s in self.sources]
        if len(set(names)) != len(names):
            raise ConfigInvalid("source names must be unique")
        if self.on_exhausted not in ("error", "upweight"):
            raise ConfigInvalid(f"on_exhausted must be 'error' or 'upweight', not {self.on_exhausted!r}")

    def normalized_weights(self) -> dict[str, Fraction]:
        raw = {s.name: Fraction(str(s.weight)) for s in self.sources}
        total = sum(raw.values())
        return {k: v / total for k, v in raw.items()}

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> MixtureSpec:
        base = Path(base_dir)
        try:
            sources = [
                CorpusSource(
                    name=s["name"],
                    paths=[str(base / p) for p in s["paths"]],
                    weight=s["weight"],
                    language=s.get("language"),
                    domain=s.get("domain"),
                    reasoning=s.get("reasoning"),
                )
                for s in d["sources"]
            ]
            return cls(sources, int(d["total_bytes"]), int(d.get("seed", 0)), d.get("on_exhausted", "error"))
        except (KeyError, TypeError) as e:
            raise ConfigInvalid(f"malformed mixture spec: {e!r}") from e

    @classmethod
    def load(cls, path: str | Path) -> MixtureSpec:
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text("utf-8")), path.parent)

    def to_dict(self) -> dict:
        return {
            "sources": [
                {k: v for k, v in vars(s).items() if v is not None} for s in self.sources
            ],
            "total_bytes": self.total_bytes,
            "seed": self.seed,
            "on_exhausted": self.on_exhausted,
        }


class MixtureStream:
    """Iterable of ``(document, weight)`` pairs plus a stats report.

    Scheduling is deterministic weighted round-robin: the next document
    comes from the source with the smallest achieved/quota ratio, ties
    broken by a seed-derived source order. The stream stops once the
    emitted weighted bytes reach ``total_bytes`` (the last document may
    overshoot by less than its own size).
    """

    def __init__(self, spec: MixtureSpec):
        self.spec = spec
        self.weights = spec.normalized_weights()
        self.quota = {k: w * spec.total_bytes for k, w in self.weights.items()}
        self.load_stats = {s.name: LoadStats() for s in spec.sources}
        self.achieved = {s.name: Fraction(0) for s in spec.sources}
        self.doc_weight = {s.name: Fraction(1) for s in spec.sources}
        self._done = False

    def _plan_upweights(self) -> None:
        for s in self.spec.sources:
            available = sum(doc_bytes(d) for d in load_documents(s.paths))
            if 0 < available < self.quota[s.name]:
                self.doc_weight[s.name] = self.quota[s.name] / available
                log.info("source %s upweighted by %.3f", s.name, float(self.doc_weight[s.name]))

    def __iter__(self):
        if self._done:
            raise RuntimeError("a MixtureStream can only be iterated once")
        self._done = True
        spec = self.spec
        if spec.on_exhausted == "upweight":
            self._plan_upweights()
        order = list(range(len(spec.sources)))
        random.Random(spec.seed).shuffle(order)
        tiebreak = {spec.sources[i].name: pos for pos, i in enumerate(order)}
        streams = {s.name: load_documents(s.paths, self.load_stats[s.name]) for s in spec.sources}
        live = [s.name for s in spec.sources]
        total = Fraction(0)
        while total < spec.total_bytes and live:
            name = min(live, key=lambda n: (self.achieved[n] / self.quota[n], tiebreak[n]))
            doc = next(streams[name], None)
            if doc is None:
                live.remove(name)
                if spec.on_exhausted == "error" or self.achieved[name] == 0:
                    raise SourceExhausted(
                        f"source {name!r} ran out at {float(self.achieved[name])} of "
                        f"{float(self.quota[name])} bytes",
                        self.stats(),
                    )
                continue
            w = self.doc_weight[name]
            n = doc_bytes(doc) * w
            self.achieved[name] += n
            total += n
            yield doc, w

    def stats(self) -> dict:
        total = sum(self.achieved.values()) or 1
        out = {}
        for s in self.spec.sources:
            out[s.name] = {
                "requested_weight": s.weight,
                "normalized_weight": float(self.weights[s.name]),
                "achieved_bytes": float(self.achieved[s.name]),
                "achieved_share": float(self.achieved[s.name] / total),
                "malformed_count": self.load_stats[s.name].malformed_count,
            }
        return out


def sample_mixture(spec: MixtureSpec) -> MixtureStream:
    return MixtureStream(spec)


# -----------------------------------------------------------------------------
# sharding


def shard_plan(paths, world_size: int, sizes: dict | None = None) -> list[list[str]]:
    """Greedy largest-first assignment of files onto the lightest worker.

    Ties: equal sizes in path order; equal loads go to the lowest rank.
    ``sizes`` overrides on-disk sizes (path -> bytes).
    """
    if world_size < 1:
        raise InvalidRank(f"world_size must be >= 1, got {world_size}")
    files = sorted(set(map(str, paths)))
    size_of = {p: (sizes[p] if sizes is not None else os.path.getsize(p)) for p in files}
    files.sort(key=lambda p: (-size_of[p], p))
    loads = [0] * world_size
    plan: list[list[str]] = [[] for _ in range(world_size)]
    for p in files:
        w = min(range(world_size), key=lambda k: (loads[k], k))
        plan[w].append(p)
        loads[w] += size_of[p]
    return [sorted(ws) for ws in plan]


def shard_files(paths, worker_index: int, world_size: int, sizes: dict | None = None) -> list[str]:
    """Files that worker ``worker_index`` of ``world_size`` should load."""
    if not 0 <= worker_index < max(world_size, 0):
        raise InvalidRank(f"worker_index {worker_index} outside [0, {world_size})")
    return shard_plan(paths, world_size, sizes)[worker_index]
