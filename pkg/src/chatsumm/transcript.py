"""Chat transcript records, channel separation, and sentence splitting."""

from __future__ import annotations

import enum
import json
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

from .errors import EmptyInput, MalformedRecord, UnknownSpeaker


class ChannelKind(str, enum.Enum):
    FULL = "full"
    CUSTOMER = "customer"
    AGENT = "agent"


class Role(str, enum.Enum):
    CUSTOMER = "customer"
    AGENT = "agent"


@dataclass(frozen=True)
class Utterance:
    index: int
    speaker_id: str
    text: str = ""


@dataclass(frozen=True)
class ChatTranscript:
    id: str
    utterances: tuple[Utterance, ...] = ()
    channel_kind: ChannelKind = ChannelKind.FULL

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        idx = [u.index for u in self.utterances]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"transcript {self.id!r}: utterance indices must be strictly increasing")

    @property
    def speakers(self) -> list[str]:
        seen: dict[str, None] = {}
        for u in self.utterances:
            seen.setdefault(u.speaker_id, None)
        return list(seen)

    def text(self) -> str:
        return join_utterances(u.text for u in self.utterances)

    def word_count(self) -> int:
        return sum(len(u.text.split()) for u in self.utterances)


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str


_TERMINAL = (".", "?", "!")


def join_utterances(texts: Iterable[str]) -> str:
    """Concatenate utterance texts with "." separators.

    A separator is only inserted when the previous piece does not already end
    in terminal punctuation; blank utterances are skipped.
    """
    out = ""
    for raw in texts:
        piece = raw.strip()
        if not piece:
            continue
        if not out:
            out = piece
        elif out.endswith(_TERMINAL):
            out = f"{out} {piece}"
        else:
            out = f"{out}. {piece}"
    return out


def parse_transcripts(stream: IO[str] | IO[bytes] | Iterable[str]) -> list[ChatTranscript]:
    """Read one JSON transcript record per line.

    Blank lines are ignored.  Raises :class:`MalformedRecord` with the
    1-based line number on the first invalid record and :class:`EmptyInput`
    when the stream holds no records at all.
    """
    transcripts = []
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from None
        transcripts.append(_transcript_from_record(rec, line_no))
    if not transcripts:
        raise EmptyInput("no transcript records in input")
    return transcripts


def _transcript_from_record(rec, line_no: int) -> ChatTranscript:
    if not isinstance(rec, dict):
        raise MalformedRecord(line_no, "record is not a JSON object")
    if "id" not in rec:
        raise MalformedRecord(line_no, "missing field 'id'")
    utts = rec.get("utterances")
    if not isinstance(utts, list):
        raise MalformedRecord(line_no, "missing or non-list field 'utterances'")
    out = []
    for i, u in enumerate(utts):
        if not isinstance(u, dict):
            raise MalformedRecord(line_no, f"utterance {i} is not an object")
        if "speaker" not in u:
            raise MalformedRecord(line_no, f"utterance {i} missing field 'speaker'")
        if "text" not in u or u["text"] is None:
            raise MalformedRecord(line_no, f"utterance {i} missing field 'text'")
        out.append(Utterance(index=i, speaker_id=str(u["speaker"]), text=str(u["text"])))
    return ChatTranscript(id=str(rec["id"]), utterances=tuple(out))


def load_transcripts(path: str | Path) -> list[ChatTranscript]:
    with open(path, encoding="utf-8") as fh:
        return parse_transcripts(fh)


def transcript_to_record(t: ChatTranscript) -> dict:
    return {
        "id": t.id,
        "utterances": [{"speaker": u.speaker_id, "text": u.text} for u in t.utterances],
    }


# ---------------------------------------------------------------------------
# role maps


@dataclass
class RoleMap(Mapping):
    """speaker_id -> Role.

    With ``customer_pattern`` set, unmapped speakers matching the regex are
    customers and every other unmapped speaker is an agent, so lookups never
    fail.  Without it, unmapped speakers raise :class:`UnknownSpeaker`.
    """

    roles: dict[str, Role] = field(default_factory=dict)
    customer_pattern: str | None = None

    def __getitem__(self, speaker_id: str) -> Role:
        if speaker_id in self.roles:
            return self.roles[speaker_id]
        if self.customer_pattern is not None:
            if re.fullmatch(self.customer_pattern, speaker_id):
                return Role.CUSTOMER
            return Role.AGENT
        raise KeyError(speaker_id)

    def __contains__(self, speaker_id) -> bool:
        return speaker_id in self.roles or self.customer_pattern is not None

    def __iter__(self):
        return iter(self.roles)

    def __len__(self) -> int:
        return len(self.roles)


def parse_role_map(lines: Iterable[str]) -> RoleMap:
    """Parse ``speaker_id=customer|agent`` lines (``#`` comments allowed)."""
    roles = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        speaker, sep, role = line.rpartition("=")
        if not sep or not speaker.strip():
            raise MalformedRecord(line_no, f"expected speaker_id=role, got {raw.strip()!r}")
        try:
            roles[speaker.strip()] = Role(role.strip().lower())
        except ValueError:
            raise MalformedRecord(line_no, f"unknown role {role.strip()!r}") from None
    return RoleMap(roles)


def load_role_map(path: str | Path) -> RoleMap:
    with open(path, encoding="utf-8") as fh:
        return parse_role_map(fh)


# ---------------------------------------------------------------------------


def separate_channels(
    t: ChatTranscript, role_map: Mapping[str, Role | str]
) -> tuple[ChatTranscript, ChatTranscript]:
    """Split a transcript into (customer, agent) transcripts.

    Every utterance lands in exactly one output with its original index, so
    relative order is preserved.  All non-customer speakers are merged into
    the single agent channel.
    """
    customer, agent = [], []
    for u in t.utterances:
        try:
            role = Role(role_map[u.speaker_id])
        except KeyError:
            raise UnknownSpeaker(u.speaker_id) from None
        (customer if role is Role.CUSTOMER else agent).append(u)
    return (
        ChatTranscript(t.id, tuple(customer), ChannelKind.CUSTOMER),
        ChatTranscript(t.id, tuple(agent), ChannelKind.AGENT),
    )


_SENTENCE_RE = re.compile(r"[^.?!]*[.?!]+|[^.?!]+$")


def split_sentences(text: str) -> list[Sentence]:
    """Split period-delimited text at ".", "?" and "!".

    Every "." is treated as sentence-final; delimiters stay attached and a
    trailing fragment without a delimiter becomes the last sentence.
    """
    out = []
    for m in _SENTENCE_RE.finditer(text):
        s = m.group(0).strip()
        if s.strip(".?! "):
            out.append(Sentence(len(out), s))
    return out
