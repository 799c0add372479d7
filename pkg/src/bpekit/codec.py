"""Encode bytes to token ids and back with a trained model.

Each pre-token starts as raw bytes; the lowest-ranked adjacent pair is
merged (every occurrence, left to right) until no learned pair remains.
This matches replaying the merge list rank by rank, which is how the
trainer built the tokens in the first place.
"""

from __future__ import annotations

import re
import threading
from functools import lru_cache

from bpekit import pretokenizer
from bpekit.errors import IdOutOfRange
from bpekit.model import TokenizerModel
from bpekit.trainer import merge_word


class Codec:
    """Immutable encoder/decoder bound to one model.

    The per-pre-token merge cache is an ``lru_cache``, which is internally
    locked and purely a memo of a deterministic function.
    """

    def __init__(self, model: TokenizerModel, cache_size: int = 1 << 16):
        self.model = model
        self.ranks = {pair: r for r, pair in enumerate(model.merges)}
        self.token_ids: dict[bytes, int] = {}
        for i, tok in enumerate(model.vocab):
            self.token_ids.setdefault(tok, i)
        self.special_ids = model.special_ids()
        self.id_bytes = list(model.vocab) + [s.encode("utf-8") for s in model.specials]
        self._special_re = None
        if model.specials:
            alts = sorted((s.encode("utf-8") for s in model.specials), key=len, reverse=True)
            self._special_re = re.compile(b"(" + b"|".join(re.escape(a) for a in alts) + b")")
        self._merge_cached = lru_cache(maxsize=cache_size)(self._merge_uncached)

    def _merge_uncached(self, piece: bytes) -> tuple[bytes, ...]:
        parts = [bytes([b]) for b in piece]
        ranks = self.ranks
        while len(parts) > 1:
            best = None
            best_rank = None
            for pair in zip(parts, parts[1:]):
                r = ranks.get(pair)
                if r is not None and (best_rank is None or r < best_rank):
                    best, best_rank = pair, r
            if best is None:
                break
            parts = merge_word(parts, best)
        return tuple(parts)

    def apply_merges(self, pretoken: bytes) -> list[bytes]:
        return list(self._merge_cached(bytes(pretoken)))

    def _encode_ordinary(self, data: bytes, out: list[int]) -> None:
        ids = self.token_ids
        for piece in pretokenizer.pieces(pretokenizer.to_text(data)):
            for tok in self._merge_cached(pretokenizer.to_bytes(piece)):
                out.append(ids[tok])

    def encode(self, text: bytes | str, parse_specials: bool = False) -> list[int]:
        data = text.encode("utf-8", "surrogateescape") if isinstance(text, str) else bytes(text)
        out: list[int] = []
        if parse_specials and self._special_re is not None:
            for i, chunk in enumerate(self._special_re.split(data)):
                if i % 2:
                    out.append(self.special_ids[chunk.decode("utf-8")])
                elif chunk:
                    self._encode_ordinary(chunk, out)
        else:
            self._encode_ordinary(data, out)
        return out

    def decode(self, ids) -> bytes:
        table = self.id_bytes
        n = len(table)
        try:
            return b"".join(table[i] if 0 <= i < n else _out_of_range(i, n) for i in ids)
        except TypeError as e:
            raise IdOutOfRange(f"token ids must be integers: {e}") from e


def _out_of_range(i, n):
    raise IdOutOfRange(f"token id {i} outside [0, {n})")


_lock = threading.Lock()


def codec_for(model: TokenizerModel) -> Codec:
    codec = getattr(model, "_codec", None)
    if codec is None:
        with _lock:
            codec = getattr(model, "_codec", None)
            if codec is None:
                codec = Codec(model)
                model._codec = codec
    return codec


def encode(text: bytes | str, model: TokenizerModel, parse_specials: bool = False) -> list[int]:
    return codec_for(model).encode(text, parse_specials)


def decode(ids, model: TokenizerModel) -> bytes:
    return codec_for(model).decode(ids)


def apply_merges(pretoken: bytes, model: TokenizerModel) -> list[bytes]:
    return codec_for(model).apply_merges(pretoken)
