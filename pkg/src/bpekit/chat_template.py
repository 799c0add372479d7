"""Chat template: render role-structured conversations to text and back.

Grammar (every ``<|...|>`` is one atomic special token)::

    conversation := message*
    message      := HEADER segment* "<|eot|>"
    HEADER       := "<|system|>" | "<|user|>" | "<|assistant|>" | "<|tool|>"
    segment      := TEXT
                  | "<|think|>" TEXT? "<|/think|>"
                  | "<|tool_call|>" JSON "<|/tool_call|>"       # {"args","id","name"}
                  | "<|tool_result|>" JSON "<|/tool_result|>"   # {"id","payload"}

JSON payloads are canonical (sorted keys, no whitespace, raw UTF-8) with
every ``<`` written as ``\\u003c`` so a payload can never spell a special
token. Plain text and think content must not contain special literals.

Only ``<|think|>`` is an established token name; the rest of the inventory
is this package's own choice.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, replace

from bpekit.errors import GrammarError, InvalidConversation

SYSTEM, USER, ASSISTANT, TOOL = "<|system|>", "<|user|>", "<|assistant|>", "<|tool|>"
EOT = "<|eot|>"
THINK, END_THINK = "<|think|>", "<|/think|>"
TOOL_CALL, END_TOOL_CALL = "<|tool_call|>", "<|/tool_call|>"
TOOL_RESULT, END_TOOL_RESULT = "<|tool_result|>", "<|/tool_result|>"
PAD = "<|pad|>"

SPECIAL_TOKENS = [
    SYSTEM, USER, ASSISTANT, TOOL, EOT,
    THINK, END_THINK, TOOL_CALL, END_TOOL_CALL, TOOL_RESULT, END_TOOL_RESULT,
    PAD,
]


class Role(str, enum.Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"
    TOOL = "tool"


HEADERS = {Role.SYSTEM: SYSTEM, Role.USER: USER, Role.ASSISTANT: ASSISTANT, Role.TOOL: TOOL}
ROLE_OF_HEADER = {v: k for k, v in HEADERS.items()}


@dataclass(frozen=True)
class Text:
    text: str


@dataclass(frozen=True)
class Think:
    text: str


@dataclass(frozen=True)
class ToolCall:
    name: str
    args: str  # canonical JSON
    call_id: str


@dataclass(frozen=True)
class ToolResult:
    call_id: str
    payload: str


Segment = Text | Think | ToolCall | ToolResult

ALLOWED = {
    Role.SYSTEM: (Text,),
    Role.USER: (Text,),
    Role.ASSISTANT: (Think, Text, ToolCall),
    Role.TOOL: (ToolResult,),
}


@dataclass(frozen=True)
class Message:
    role: Role
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "segments", tuple(self.segments))


@dataclass(frozen=True)
class Conversation:
    messages: tuple[Message, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))


def canonical_args(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _wire_json(obj) -> str:
    return canonical_args(obj).replace("<", "\\u003c")


_SPECIAL_RE = re.compile("|".join(re.escape(s) for s in SPECIAL_TOKENS))
_SPECIAL_BYTES_RE = re.compile(b"|".join(re.escape(s.encode()) for s in SPECIAL_TOKENS))


# -----------------------------------------------------------------------------
# validation


def _check_text(s, what: str, literals_ok: bool = False) -> None:
    if not isinstance(s, str):
        raise InvalidConversation(f"{what} must be a string")
    if not literals_ok and _SPECIAL_RE.search(s):
        raise InvalidConversation(f"{what} contains a reserved special token literal")
    try:
        s.encode("utf-8")
    except UnicodeEncodeError as e:
        raise InvalidConversation(f"{what} is not encodable as UTF-8") from e


def validate_message(msg: Message) -> None:
    allowed = ALLOWED[msg.role]
    seen_body = False
    prev = None
    call_ids = set()
    for seg in msg.segments:
        if not isinstance(seg, allowed):
            raise InvalidConversation(f"{type(seg).__name__} segment not allowed in a {msg.role.value} message")
        if isinstance(seg, Think):
            if seen_body:
                raise InvalidConversation("think segments must precede text and tool calls")
            _check_text(seg.text, "think text")
        elif isinstance(seg, Text):
            seen_body = True
            _check_text(seg.text, "text")
            if not seg.text:
                raise InvalidConversation("empty text segment")
            if isinstance(prev, Text):
                raise InvalidConversation("adjacent text segments must be merged")
        elif isinstance(seg, ToolCall):
            seen_body = True
            _check_text(seg.name, "tool call name", literals_ok=True)
            _check_text(seg.call_id, "tool call_id", literals_ok=True)
            _check_text(seg.args, "tool call args", literals_ok=True)
            if seg.call_id in call_ids:
                raise InvalidConversation(f"duplicate tool call_id {seg.call_id!r} in one assistant turn")
            call_ids.add(seg.call_id)
            try:
                canonical = canonical_args(json.loads(seg.args))
            except (TypeError, ValueError) as e:
                raise InvalidConversation(f"tool call args are not JSON: {seg.args!r}") from e
            if canonical != seg.args:
                raise InvalidConversation("tool call args must be canonical JSON")
        elif isinstance(seg, ToolResult):
            _check_text(seg.call_id, "tool result call_id", literals_ok=True)
            _check_text(seg.payload, "tool result payload", literals_ok=True)
        prev = seg


def _check_sequence(messages) -> None:
    last_calls: set[str] | None = None
    for i, msg in enumerate(messages):
        try:
            if msg.role is Role.SYSTEM and i != 0:
                raise InvalidConversation(f"system message at position {i}; only a leading one is allowed")
            validate_message(msg)
            if msg.role is Role.ASSISTANT:
                last_calls = {s.call_id for s in msg.segments if isinstance(s, ToolCall)}
            elif msg.role is Role.TOOL:
                for seg in msg.segments:
                    if last_calls is None or seg.call_id not in last_calls:
                        raise InvalidConversation(
                            f"tool result {seg.call_id!r} has no matching call in the preceding assistant turn"
                        )
        except InvalidConversation as e:
            e.index = i
            raise


def validate(conv: Conversation) -> None:
    """Raise :class:`InvalidConversation` naming the first violated rule."""
    _check_sequence(conv.messages)


# -----------------------------------------------------------------------------
# render


def _render_segment(seg: Segment) -> str:
    if isinstance(seg, Text):
        return seg.text
    if isinstance(seg, Think):
        return THINK + seg.text + END_THINK
    if isinstance(seg, ToolCall):
        body = {"args": json.loads(seg.args), "id": seg.call_id, "name": seg.name}
        return TOOL_CALL + _wire_json(body) + END_TOOL_CALL
    body = {"id": seg.call_id, "payload": seg.payload}
    return TOOL_RESULT + _wire_json(body) + END_TOOL_RESULT


def render(conv: Conversation, add_generation_prompt: bool = False) -> bytes:
    """Serialize ``conv``; with ``add_generation_prompt`` append the assistant header."""
    validate(conv)
    out = []
    for msg in conv.messages:
        out.append(HEADERS[msg.role])
        out.extend(_render_segment(s) for s in msg.segments)
        out.append(EOT)
    if add_generation_prompt:
        out.append(ASSISTANT)
    return "".join(out).encode("utf-8")


def render_assistant_outputs(conv: Conversation, include_reasoning: bool = True) -> bytes:
    """Assistant turns only, without role headers or end markers."""
    out = []
    for msg in conv.messages:
        if msg.role is Role.ASSISTANT:
            for seg in msg.segments:
                if include_reasoning or not isinstance(seg, Think):
                    out.append(_render_segment(seg))
    return "".join(out).encode("utf-8")


# -----------------------------------------------------------------------------
# parse


def _lex(data: bytes):
    pos = 0
    for m in _SPECIAL_BYTES_RE.finditer(data):
        if m.start() > pos:
            yield None, data[pos:m.start()], pos
        yield m.group().decode(), b"", m.start()
        pos = m.end()
    if pos < len(data):
        yield None, data[pos:], pos


def _decode(chunk: bytes, offset: int) -> str:
    try:
        return chunk.decode("utf-8")
    except UnicodeDecodeError as e:
        raise GrammarError("invalid UTF-8", offset + e.start) from e


def _load_json(chunk: bytes, offset: int, keys: set[str]) -> dict:
    try:
        obj = json.loads(_decode(chunk, offset))
    except ValueError as e:
        raise GrammarError(f"malformed JSON payload: {e}", offset) from e
    if not isinstance(obj, dict) or set(obj) != keys:
        raise GrammarError(f"JSON payload must be an object with keys {sorted(keys)}", offset)
    return obj


def parse(text: bytes | str) -> Conversation:
    """Inverse of :func:`render` (without generation prompt)."""
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    tokens = list(_lex(data))
    messages: list[Message] = []
    starts: list[int] = []
    i = 0

    def expect_close(closer: str, opener_at: int) -> tuple[bytes, int]:
        nonlocal i
        body, body_at = b"", opener_at
        if i < len(tokens) and tokens[i][0] is None:
            body, body_at = tokens[i][1], tokens[i][2]
            i += 1
        if i >= len(tokens) or tokens[i][0] != closer:
            at = tokens[i][2] if i < len(tokens) else len(data)
            raise GrammarError(f"expected {closer}", at)
        i += 1
        return body, body_at

    while i < len(tokens):
        special, chunk, at = tokens[i]
        if special not in ROLE_OF_HEADER:
            what = "text" if special is None else special
            raise GrammarError(f"unexpected {what} outside a message", at)
        role = ROLE_OF_HEADER[special]
        msg_at = at
        i += 1
        segments: list[Segment] = []
        while True:
            if i >= len(tokens):
                raise GrammarError("unterminated message", len(data))
            special, chunk, at = tokens[i]
            i += 1
            if special == EOT:
                break
            if special is None:
                seg = Text(_decode(chunk, at))
            elif special == THINK:
                body, body_at = expect_close(END_THINK, at)
                seg = Think(_decode(body, body_at))
            elif special == TOOL_CALL:
                body, body_at = expect_close(END_TOOL_CALL, at)
                obj = _load_json(body, body_at, {"args", "id", "name"})
                if not isinstance(obj["id"], str) or not isinstance(obj["name"], str):
                    raise GrammarError("tool call id and name must be strings", body_at)
                seg = ToolCall(obj["name"], canonical_args(obj["args"]), obj["id"])
            elif special == TOOL_RESULT:
                body, body_at = expect_close(END_TOOL_RESULT, at)
                obj = _load_json(body, body_at, {"id", "payload"})
                if not isinstance(obj["id"], str) or not isinstance(obj["payload"], str):
                    raise GrammarError("tool result id and payload must be strings", body_at)
                seg = ToolResult(obj["id"], obj["payload"])
            else:
                raise GrammarError(f"unexpected {special} inside a message", at)
            if not isinstance(seg, ALLOWED[role]):
                raise GrammarError(f"{type(seg).__name__} segment not allowed in a {role.value} message", at)
            segments.append(seg)
        messages.append(Message(role, segments))
        starts.append(msg_at)

    try:
        _check_sequence(messages)
    except InvalidConversation as e:
        raise GrammarError(str(e), starts[e.index]) from e
    return Conversation(messages)


def strip_reasoning(conv: Conversation, keep_last_n: int = 0) -> Conversation:
    """Drop think segments from all but the last ``keep_last_n`` assistant turns."""
    if keep_last_n < 0:
        raise ValueError("keep_last_n must be >= 0")
    assistant_idx = [i for i, m in enumerate(conv.messages) if m.role is Role.ASSISTANT]
    keep = set(assistant_idx[len(assistant_idx) - keep_last_n:]) if keep_last_n else set()
    out = []
    for i, msg in enumerate(conv.messages):
        if msg.role is Role.ASSISTANT and i not in keep:
            msg = replace(msg, segments=tuple(s for s in msg.segments if not isinstance(s, Think)))
        out.append(msg)
    return Conversation(out)


# -----------------------------------------------------------------------------
# JSON schema: {"messages": [{"role": ..., "segments": [{"type": ..., ...}]}]}


def segment_to_dict(seg: Segment) -> dict:
    if isinstance(seg, Text):
        return {"type": "text", "text": seg.text}
    if isinstance(seg, Think):
        return {"type": "think", "text": seg.text}
    if isinstance(seg, ToolCall):
        return {"type": "tool_call", "name": seg.name, "args": seg.args, "call_id": seg.call_id}
    return {"type": "tool_result", "call_id": seg.call_id, "payload": seg.payload}


def segment_from_dict(d: dict) -> Segment:
    try:
        kind = d["type"]
        if kind == "text":
            return Text(d["text"])
        if kind == "think":
            return Think(d["text"])
        if kind == "tool_call":
            args = d["args"]
            if not isinstance(args, str):
                args = canonical_args(args)
            return ToolCall(d["name"], args, d["call_id"])
        if kind == "tool_result":
            return ToolResult(d["call_id"], d["payload"])
    except (KeyError, TypeError) as e:
        raise InvalidConversation(f"malformed segment {d!r}") from e
    raise InvalidConversation(f"unknown segment type {kind!r}")


def to_dict(conv: Conversation) -> dict:
    return {
        "messages": [
            {"role": m.role.value, "segments": [segment_to_dict(s) for s in m.segments]}
            for m in conv.messages
        ]
    }


def from_dict(d: dict) -> Conversation:
    try:
        return Conversation(
            Message(Role(m["role"]), [segment_from_dict(s) for s in m.get("segments", [])])
            for m in d["messages"]
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, InvalidConversation):
            raise
        raise InvalidConversation(f"malformed conversation JSON: {e}") from e
