"""Deterministic byte-level BPE trainer.

The corpus is pre-tokenized once and reduced to a word-frequency map
(pre-token bytes -> weighted count). Merges are then learned on that map
with incremental pair-count maintenance: after each merge only the words
containing the merged pair are re-counted, and a lazy max-heap yields the
next best pair.

Document weights may be fractional. All weighted counts are scaled by the
least common denominator so the merge loop runs on exact integers.
"""

from __future__ import annotations

import heapq
import logging
import math
import re
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import islice

from bpekit import pretokenizer
from bpekit.chat_template import SPECIAL_TOKENS
from bpekit.corpus import document_text
from bpekit.errors import ConfigInvalid, CorpusEmpty, DuplicateSpecial
from bpekit.model import TokenizerModel

log = logging.getLogger(__name__)

DEFAULT_VOCAB = 196_608

Pair = tuple[bytes, bytes]


@dataclass
class TrainerConfig:
    target_vocab: int = DEFAULT_VOCAB
    specials: list[str] = field(default_factory=lambda: list(SPECIAL_TOKENS))
    min_pair_frequency: int = 2
    seed: int = 0
    # pre-tokens longer than this are left out of the word-frequency map
    max_pretoken_bytes: int = 256

    def validate(self) -> None:
        if len(set(self.specials)) != len(self.specials):
            dupes = sorted(s for s, n in Counter(self.specials).items() if n > 1)
            raise DuplicateSpecial(f"duplicate special tokens: {dupes}")
        for s in self.specials:
            if len(s.encode("utf-8")) < 2:
                raise ConfigInvalid(f"special {s!r} collides with a raw byte token")
        floor = 256 + len(self.specials)
        if self.target_vocab < floor:
            raise ConfigInvalid(f"target_vocab {self.target_vocab} is below the floor {floor}")
        if self.min_pair_frequency < 1:
            raise ConfigInvalid("min_pair_frequency must be >= 1")
        if self.max_pretoken_bytes < 1:
            raise ConfigInvalid("max_pretoken_bytes must be >= 1")

    @property
    def num_merges(self) -> int:
        return self.target_vocab - 256 - len(self.specials)


def reserve_specials(
    config: TrainerConfig, num_merges: int | None = None, template: bool = False
) -> dict[str, int]:
    """Assign ids to ``config.specials`` directly above the merged tokens.

    ``num_merges`` defaults to the merge budget implied by the target vocab.
    With ``template=True`` an empty inventory is a configuration error since
    chat rendering needs its control tokens.
    """
    if not config.specials and template:
        raise ConfigInvalid("chat template requires special tokens")
    config.validate()
    if num_merges is None:
        num_merges = config.num_merges
    first = 256 + num_merges
    return {s: first + i for i, s in enumerate(config.specials)}


def _as_tokens(word) -> tuple[bytes, ...]:
    if isinstance(word, str):
        word = pretokenizer.to_bytes(word)
    if isinstance(word, (bytes, bytearray)):
        return tuple(bytes([b]) for b in word)
    return tuple(word)


def count_pairs(word_freqs: Mapping) -> dict[Pair, int]:
    """Weighted counts of adjacent token pairs, never across words.

    Keys of ``word_freqs`` are either byte-strings (split into single bytes)
    or tuples of token byte-strings.
    """
    counts: dict[Pair, int] = defaultdict(int)
    for word, freq in word_freqs.items():
        toks = _as_tokens(word)
        for pair in zip(toks, toks[1:]):
            counts[pair] += freq
    return dict(counts)


def select_merge(pair_counts: Mapping[Pair, int], min_pair_frequency: int = 2, vocab=()) -> Pair | None:
    """Most frequent pair; ties go to the smallest (left, right) in byte order.

    Pairs whose concatenation is already in ``vocab`` are not eligible.
    """
    best = None
    for pair, count in pair_counts.items():
        if count < min_pair_frequency or pair[0] + pair[1] in vocab:
            continue
        if best is None or count > best[0] or (count == best[0] and pair < best[1]):
            best = (count, pair)
    return None if best is None else best[1]


def merge_word(toks, pair: Pair) -> list[bytes]:
    """Replace non-overlapping occurrences of ``pair``, scanning left to right."""
    a, b = pair
    out = []
    i, n = 0, len(toks)
    while i < n:
        if i < n - 1 and toks[i] == a and toks[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(toks[i])
            i += 1
    return out


def learn_merges(word_freqs: Mapping, num_merges: int, min_count: int = 2) -> list[Pair]:
    """Incremental BPE merge loop over an integer word-frequency map."""
    words: list[list[bytes]] = []
    freqs: list[int] = []
    for word, freq in word_freqs.items():
        if freq > 0:
            words.append(list(_as_tokens(word)))
            freqs.append(freq)

    pair_counts: dict[Pair, int] = defaultdict(int)
    where: dict[Pair, set[int]] = defaultdict(set)
    for idx, toks in enumerate(words):
        f = freqs[idx]
        for pair in zip(toks, toks[1:]):
            pair_counts[pair] += f
            where[pair].add(idx)

    heap = [(-c, a, b) for (a, b), c in pair_counts.items()]
    heapq.heapify(heap)
    vocab = {bytes([i]) for i in range(256)}
    merges: list[Pair] = []

    while len(merges) < num_merges and heap:
        neg, a, b = heapq.heappop(heap)
        count = pair_counts.get((a, b), 0)
        if count != -neg:
            continue  # stale entry
        if count < min_count:
            break
        new_token = a + b
        if new_token in vocab:
            continue  # already reachable through another merge; keep ids unique
        pair = (a, b)
        merges.append(pair)
        vocab.add(new_token)

        delta: dict[Pair, int] = defaultdict(int)
        for idx in sorted(where.pop(pair, ())):
            old = words[idx]
            new = merge_word(old, pair)
            if len(new) == len(old):
                continue
            f = freqs[idx]
            for p in zip(old, old[1:]):
                delta[p] -= f
            for p in zip(new, new[1:]):
                delta[p] += f
                where[p].add(idx)
            words[idx] = new
        for p, d in delta.items():
            if d == 0:
                continue
            c = pair_counts[p] + d
            if c:
                pair_counts[p] = c
                heapq.heappush(heap, (-c, p[0], p[1]))
            else:
                del pair_counts[p]
        pair_counts.pop(pair, None)
    return merges


def _iter_weighted(corpus: Iterable):
    for item in corpus:
        if isinstance(item, tuple):
            doc, weight = item
        else:
            doc, weight = item, 1
        if isinstance(weight, float):
            weight = Fraction(str(weight))
        yield doc, Fraction(weight)


def _special_splitter(specials: list[str]) -> re.Pattern | None:
    if not specials:
        return None
    alts = sorted(specials, key=len, reverse=True)
    return re.compile("|".join(re.escape(s) for s in alts))


def _count_chunk(args) -> dict[Fraction, Counter]:
    docs, specials = args
    splitter = _special_splitter(specials)
    groups: dict[Fraction, Counter] = {}
    for doc, weight in docs:
        text = pretokenizer.to_text(document_text(doc))
        parts = splitter.split(text) if splitter else [text]
        counter = groups.setdefault(weight, Counter())
        for part in parts:
            counter.update(pretokenizer.pieces(part))
    return groups


def _chunks(it, size):
    it = iter(it)
    while chunk := list(islice(it, size)):
        yield chunk


def word_frequencies(corpus: Iterable, config: TrainerConfig, jobs: int = 1) -> tuple[dict[bytes, int], int]:
    """Reduce a (document, weight) stream to integer word counts.

    Returns ``(counts, scale)`` where ``counts[w] / scale`` is the exact
    weighted frequency of pre-token ``w``. Special-token literals are cut
    out of documents before pre-tokenization.
    """
    groups: dict[Fraction, Counter] = {}
    n_docs = 0

    def absorb(part: dict[Fraction, Counter]):
        for w, c in part.items():
            groups.setdefault(w, Counter()).update(c)

    def counted(stream):
        nonlocal n_docs
        for item in stream:
            n_docs += 1
            yield item

    stream = counted(_iter_weighted(corpus))
    if jobs > 1:
        tasks = ((chunk, config.specials) for chunk in _chunks(stream, 512))
        with ProcessPoolExecutor(jobs) as pool:
            for part in pool.map(_count_chunk, tasks):
                absorb(part)
    else:
        for chunk in _chunks(stream, 512):
            absorb(_count_chunk((chunk, config.specials)))
    if n_docs == 0:
        raise CorpusEmpty("corpus yielded no documents")

    scale = math.lcm(*(w.denominator for w in groups)) if groups else 1
    counts: dict[bytes, int] = defaultdict(int)
    dropped = 0
    # ordered reduction keeps the map's iteration order reproducible
    for w in sorted(groups):
        mult = w.numerator * (scale // w.denominator)
        for piece, n in groups[w].items():
            b = pretokenizer.to_bytes(piece)
            if len(b) > config.max_pretoken_bytes:
                dropped += 1
                continue
            counts[b] += n * mult
    if dropped:
        log.info("skipped %d pre-token types longer than %d bytes", dropped, config.max_pretoken_bytes)
    return dict(sorted(counts.items())), scale


def train(corpus: Iterable, config: TrainerConfig | None = None, jobs: int = 1) -> TokenizerModel:
    """Train a model on ``corpus`` (documents or ``(document, weight)`` pairs)."""
    config = config or TrainerConfig()
    config.validate()
    counts, scale = word_frequencies(corpus, config, jobs=jobs)
    log.info("training on %d distinct pre-tokens, %d merges requested", len(counts), config.num_merges)
    merges = learn_merges(counts, config.num_merges, config.min_pair_frequency * scale)
    log.info("learned %d merges", len(merges))
    return TokenizerModel(merges=merges, specials=config.specials, metadata=asdict(config))
