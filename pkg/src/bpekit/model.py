"""Trained tokenizer artifact and its canonical JSON file format.

File layout (keys sorted, no insignificant whitespace, ASCII only)::

    {"base": "bytes-256",
     "config_digest": "<sha256 hex of the canonical training config>",
     "merges": [["<hex left>", "<hex right>"], ...],      # rank order
     "metadata": {...training config...},
     "specials": ["<|system|>", ...],                      # id order
     "unicode_version": "13.0.0",
     "version": 1}

Id layout: bytes ``[0, 256)``, merged tokens ``[256, 256 + len(merges))``,
specials after that in table order.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from bpekit import pretokenizer
from bpekit.errors import ConfigInvalid

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
BASE_ALPHABET = "bytes-256"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_digest(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("ascii")).hexdigest()


@dataclass(frozen=True)
class Merge:
    left: bytes
    right: bytes
    rank: int

    @property
    def token(self) -> bytes:
        return self.left + self.right


@dataclass
class TokenizerModel:
    merges: list[tuple[bytes, bytes]]
    specials: list[str] = field(default_factory=list)
    unicode_version: str = field(default_factory=pretokenizer.unicode_version)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.merges = [(bytes(a), bytes(b)) for a, b in self.merges]
        self.specials = list(self.specials)
        self._vocab: list[bytes] | None = None

    def __getstate__(self):
        # the attached codec holds locks and caches; workers rebuild their own
        state = dict(self.__dict__)
        state.pop("_codec", None)
        return state

    @property
    def vocab_size(self) -> int:
        return 256 + len(self.merges) + len(self.specials)

    @property
    def config_digest(self) -> str:
        return config_digest(self.metadata)

    def merge_list(self) -> list[Merge]:
        return [Merge(a, b, r) for r, (a, b) in enumerate(self.merges)]

    @property
    def vocab(self) -> list[bytes]:
        """Byte-string for every non-special id, index = id."""
        if self._vocab is None:
            self._vocab = [bytes([i]) for i in range(256)] + [a + b for a, b in self.merges]
        return self._vocab

    def special_ids(self) -> dict[str, int]:
        first = 256 + len(self.merges)
        return {s: first + i for i, s in enumerate(self.specials)}

    def validate(self) -> None:
        """Check that every merge only uses tokens available before its rank."""
        known = {bytes([i]) for i in range(256)}
        for rank, (a, b) in enumerate(self.merges):
            if a not in known or b not in known:
                raise ConfigInvalid(f"merge {rank} uses a token not yet available")
            known.add(a + b)
        if len(set(self.specials)) != len(self.specials):
            raise ConfigInvalid("duplicate special tokens in model")

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "unicode_version": self.unicode_version,
            "base": BASE_ALPHABET,
            "merges": [[a.hex(), b.hex()] for a, b in self.merges],
            "specials": list(self.specials),
            "metadata": self.metadata,
            "config_digest": self.config_digest,
        }

    def dumps(self) -> str:
        return canonical_json(self.to_dict()) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.dumps().encode("ascii"))

    @classmethod
    def from_dict(cls, d: dict) -> TokenizerModel:
        if d.get("version") != FORMAT_VERSION or d.get("base") != BASE_ALPHABET:
            raise ConfigInvalid("unsupported model file version or base alphabet")
        model = cls(
            merges=[(bytes.fromhex(a), bytes.fromhex(b)) for a, b in d["merges"]],
            specials=d.get("specials", []),
            unicode_version=d["unicode_version"],
            metadata=d.get("metadata", {}),
        )
        if "config_digest" in d and d["config_digest"] != model.config_digest:
            raise ConfigInvalid("config_digest does not match metadata")
        if model.unicode_version != pretokenizer.unicode_version():
            log.warning(
                "model built with Unicode %s, pre-tokenizer tables are %s",
                model.unicode_version,
                pretokenizer.unicode_version(),
            )
        model.validate()
        return model

    @classmethod
    def loads(cls, text: str) -> TokenizerModel:
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> TokenizerModel:
        return cls.loads(Path(path).read_text("utf-8"))
