"""Category-run pre-tokenizer.

Input bytes are cut into a lossless sequence of :class:`PreToken` spans.
BPE merges never cross a span boundary. The rules, tried in order at each
position:

1. optional single space + maximal run of letters/marks      -> LETTERS
2. optional single space + maximal run of punctuation/symbols -> PUNCTUATION
3. one numeric codepoint (general category N)                 -> DIGIT
4. maximal whitespace run                                     -> WHITESPACE
5. any other single codepoint, or a single undecodable byte   -> OTHER

Whitespace runs are never split, so a newline followed by indentation stays
one span. Digits never absorb a leading space and are always alone.
No normalization is applied.

Codepoint classes come from a vendored table (``data/unicode_classes.json``)
so results do not drift with the host Python's Unicode database.
"""

from __future__ import annotations

import enum
import json
import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

TABLE_RESOURCE = "unicode_classes.json"


class Category(str, enum.Enum):
    LETTERS = "Letters"
    DIGIT = "Digit"
    WHITESPACE = "Whitespace"
    PUNCTUATION = "Punctuation"
    OTHER = "Other"


@dataclass(frozen=True)
class PreToken:
    bytes: bytes
    category: Category
    offset: int


def build_tables() -> dict:
    """Derive codepoint range tables from the running interpreter's
    ``unicodedata``. Used to regenerate the vendored table file."""
    classes: dict[str, list[list[int]]] = {"letters": [], "digits": [], "space": [], "punct": []}

    def classify(cp: int) -> str | None:
        ch = chr(cp)
        if ch.isspace():
            return "space"
        cat = unicodedata.category(ch)
        if cat[0] in "LM":
            return "letters"
        if cat[0] == "N":
            return "digits"
        if cat[0] in "PS":
            return "punct"
        return None

    current, start = None, 0
    for cp in range(0x110000 + 1):
        kind = classify(cp) if cp < 0x110000 else None
        if kind != current:
            if current is not None:
                classes[current].append([start, cp - 1])
            current, start = kind, cp
    return {"unicode_version": unicodedata.unidata_version, "classes": classes}


@lru_cache(maxsize=None)
def _tables() -> dict:
    raw = resources.files("bpekit.data").joinpath(TABLE_RESOURCE).read_text("utf-8")
    return json.loads(raw)


def unicode_version() -> str:
    return _tables()["unicode_version"]


def _char_class(ranges: list[list[int]]) -> str:
    parts = []
    for lo, hi in ranges:
        if lo == hi:
            parts.append(f"\\U{lo:08x}")
        else:
            parts.append(f"\\U{lo:08x}-\\U{hi:08x}")
    return "[" + "".join(parts) + "]"


@lru_cache(maxsize=None)
def _patterns() -> tuple[re.Pattern, re.Pattern]:
    cls = _tables()["classes"]
    letters = _char_class(cls["letters"])
    punct = _char_class(cls["punct"])
    digits = _char_class(cls["digits"])
    space = _char_class(cls["space"])
    alternatives = [f" ?{letters}+", f" ?{punct}+", digits, f"{space}+", "."]
    flat = re.compile("|".join(alternatives), re.DOTALL)
    grouped = re.compile("|".join(f"({a})" for a in alternatives), re.DOTALL)
    return flat, grouped


_GROUP_CATEGORY = {
    1: Category.LETTERS,
    2: Category.PUNCTUATION,
    3: Category.DIGIT,
    4: Category.WHITESPACE,
    5: Category.OTHER,
}


def to_text(data: bytes | str) -> str:
    # undecodable bytes become lone surrogates U+DC80..U+DCFF and fall into OTHER
    if isinstance(data, str):
        return data
    return data.decode("utf-8", "surrogateescape")


def to_bytes(text: str) -> bytes:
    return text.encode("utf-8", "surrogateescape")


def pieces(text: str) -> list[str]:
    """Pre-token strings only, without categories or offsets (trainer fast path)."""
    return _patterns()[0].findall(text)


def split(text: bytes | str) -> list[PreToken]:
    """Split ``text`` into categorized pre-tokens.

    Total over arbitrary bytes; ``b"".join(t.bytes for t in split(b))`` is
    always ``b``.

    >>> [t.bytes for t in split(b"x12y")]
    [b'x', b'1', b'2', b'y']
    """
    out: list[PreToken] = []
    offset = 0
    for m in _patterns()[1].finditer(to_text(text)):
        chunk = to_bytes(m.group())
        out.append(PreToken(chunk, _GROUP_CATEGORY[m.lastindex], offset))
        offset += len(chunk)
    return out
