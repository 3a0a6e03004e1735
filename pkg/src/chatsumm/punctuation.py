"""Punctuation restoration: tokenize, segment, predict, merge.

The predictor is pluggable.  Three implementations ship here: a rule-based
baseline, an oracle that replays known labels (for tests and round trips),
and a client for a remote punctuation service.
"""

from __future__ import annotations

import enum
import re
import threading
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Protocol

from . import _http
from .errors import PredictorFailure, ProtocolError, SegmentSizeInvalid


class PunctLabel(str, enum.Enum):
    O = "O"
    COMMA = "COMMA"
    PERIOD = "PERIOD"
    QUESTION = "QUESTION"

    @property
    def char(self) -> str:
        return _LABEL_CHAR[self]


_LABEL_CHAR = {PunctLabel.O: "", PunctLabel.COMMA: ",", PunctLabel.PERIOD: ".", PunctLabel.QUESTION: "?"}
_CHAR_LABEL = {",": PunctLabel.COMMA, ":": PunctLabel.COMMA, ".": PunctLabel.PERIOD,
               ";": PunctLabel.PERIOD, "!": PunctLabel.PERIOD, "?": PunctLabel.QUESTION}


class Mode(str, enum.Enum):
    PERIODS_ONLY = "periods"
    FULL = "full"


def coerce_periods_only(label: PunctLabel) -> PunctLabel:
    if label is PunctLabel.COMMA:
        return PunctLabel.O
    if label is PunctLabel.QUESTION:
        return PunctLabel.PERIOD
    return label


@dataclass(frozen=True)
class StrippedText:
    clean_text: str
    labels: list[PunctLabel]

    @property
    def tokens(self) -> list[str]:
        return self.clean_text.split()


_STRIP_CHARS = ",.?!;:"
_TRAIL_RE = re.compile(r"[,.?!;:]+$")


def strip_punctuation(text: str) -> StrippedText:
    """Remove , . ? ! ; : and record the class that followed each word.

    The label of a word is taken from the last mark trailing it; marks that
    stand alone attach to the preceding word.  Output is lowercased.
    """
    tokens: list[str] = []
    labels: list[PunctLabel] = []
    for raw in text.split():
        trail = _TRAIL_RE.search(raw)
        mark = _CHAR_LABEL[trail.group(0)[-1]] if trail else PunctLabel.O
        core = raw.lower().translate(str.maketrans("", "", _STRIP_CHARS))
        if core:
            tokens.append(core)
            labels.append(mark)
        elif labels and mark is not PunctLabel.O:
            labels[-1] = mark
    return StrippedText(" ".join(tokens), labels)


@dataclass(frozen=True)
class Segment:
    start: int  # offset of token_ids[0] in the full token stream
    token_ids: tuple[int, ...]
    tokens: tuple[str, ...]
    overlap: int

    def __len__(self) -> int:
        return len(self.token_ids)


@dataclass
class PunctuatedText:
    text: str
    labels: list[PunctLabel]
    mode: Mode
    tokens: list[str] = field(default_factory=list)


class Predictor(Protocol):
    name: str

    def predict(self, segments: Sequence[Segment],
                turn_boundaries: frozenset[int] | None = None) -> list[list[PunctLabel]]:
        ...


def make_segments(token_ids: Sequence[int], tokens: Sequence[str], segment_size: int) -> list[Segment]:
    """Fixed-width windows with 25% overlap; the last one may be shorter."""
    if segment_size < 8:
        raise SegmentSizeInvalid(f"segment_size must be >= 8 (got {segment_size})")
    n = len(token_ids)
    if n == 0:
        return []
    overlap = segment_size // 4
    stride = segment_size - overlap
    segments = []
    start = 0
    while True:
        end = min(start + segment_size, n)
        segments.append(Segment(start, tuple(token_ids[start:end]), tuple(tokens[start:end]),
                                overlap if len(segments) or end < n else 0))
        if end >= n:
            break
        start += stride
    return segments


def _resolve_overlaps(segments: Sequence[Segment], preds: Sequence[Sequence[PunctLabel]], n: int) -> list[PunctLabel]:
    """Per token, keep the label from the segment where it sits most centrally."""
    best: list[tuple[int, PunctLabel] | None] = [None] * n
    for seg, labels in zip(segments, preds):
        width = len(seg)
        for i, label in enumerate(labels):
            centrality = min(i, width - 1 - i)
            pos = seg.start + i
            cur = best[pos]
            if cur is None or centrality > cur[0]:
                best[pos] = (centrality, label)
    assert all(b is not None for b in best)
    return [b[1] for b in best]  # type: ignore[index]


def merge_tokens(tokens: Sequence[str], labels: Sequence[PunctLabel]) -> str:
    """Attach punctuation and capitalize sentence starts."""
    words = []
    cap_next = True
    for tok, label in zip(tokens, labels):
        w = tok[:1].upper() + tok[1:] if cap_next else tok
        words.append(w + label.char)
        cap_next = label in (PunctLabel.PERIOD, PunctLabel.QUESTION)
    return " ".join(words)


def restore(text: str, mode: Mode | str, predictor: Predictor, segment_size: int = 512,
            turn_boundaries: Sequence[int] | None = None) -> PunctuatedText:
    """Restore punctuation to unpunctuated text.

    ``turn_boundaries`` are token indices known to end a turn (or sentence);
    predictors may use them as hints.
    """
    mode = Mode(mode)
    if segment_size < 8:
        raise SegmentSizeInvalid(f"segment_size must be >= 8 (got {segment_size})")
    tokens = text.split()
    vocab: dict[str, int] = {}
    token_ids = [vocab.setdefault(t, len(vocab)) for t in tokens]
    segments = make_segments(token_ids, tokens, segment_size)
    bounds = frozenset(turn_boundaries) if turn_boundaries is not None else None
    try:
        preds = predictor.predict(segments, bounds) if segments else []
    except PredictorFailure:
        raise
    except Exception as exc:
        raise PredictorFailure(f"{getattr(predictor, 'name', type(predictor).__name__)}: {exc}") from exc
    if len(preds) != len(segments) or any(len(p) != len(s) for p, s in zip(preds, segments)):
        raise PredictorFailure("predictor returned label lists that do not match the segments")
    labels = _resolve_overlaps(segments, [[PunctLabel(x) for x in p] for p in preds], len(tokens))
    if mode is Mode.PERIODS_ONLY:
        labels = [coerce_periods_only(x) for x in labels]
    return PunctuatedText(merge_tokens(tokens, labels), labels, mode, tokens)


# ---------------------------------------------------------------------------
# predictors

QUESTION_STARTERS = frozenset(
    "what why how when where who whom whose which do does did can could is are was were will "
    "would should shall may might have has am isn't aren't doesn't don't didn't can't won't".split()
)
COMMA_CONJUNCTIONS = frozenset("but because although though however unless whereas so".split())


def rule_predict(segments: Sequence[Segment], turn_boundaries: frozenset[int] | None = None,
                 max_run: int = 25) -> list[list[PunctLabel]]:
    """Baseline labels from turn boundaries, run length and cue words.

    A clause ends at a turn boundary or after ``max_run`` tokens without a
    delimiter; it ends in QUESTION when its first token is a wh-word or
    auxiliary, else PERIOD.  A COMMA goes before a listed conjunction.
    """
    bounds = turn_boundaries or frozenset()
    out = []
    for seg in segments:
        labels = [PunctLabel.O] * len(seg)
        run = 0
        clause_start = 0
        for i, tok in enumerate(seg.tokens):
            run += 1
            if seg.start + i in bounds or run == max_run:
                q = seg.tokens[clause_start] in QUESTION_STARTERS
                labels[i] = PunctLabel.QUESTION if q else PunctLabel.PERIOD
                run = 0
                clause_start = i + 1
            elif i + 1 < len(seg) and seg.tokens[i + 1] in COMMA_CONJUNCTIONS:
                labels[i] = PunctLabel.COMMA
        out.append(labels)
    return out


@dataclass
class RulePredictor:
    max_run: int = 25
    name: str = "rule"

    def predict(self, segments, turn_boundaries=None):
        return rule_predict(segments, turn_boundaries, self.max_run)


@dataclass
class OraclePredictor:
    """Replays known per-token labels by absolute token position."""

    labels: Sequence[PunctLabel | str]
    name: str = "oracle"

    def predict(self, segments, turn_boundaries=None):
        return [[PunctLabel(self.labels[s.start + i]) for i in range(len(s))] for s in segments]


@dataclass
class RemotePredictor:
    """Client for ``POST /v1/punctuate``.  Calls are serialized per instance."""

    url: str
    timeout: float = 10.0
    retries: int = 2
    name: str = "remote"
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def predict(self, segments, turn_boundaries=None):
        out = []
        with self._lock:
            for seg in segments:
                resp = _http.post_json(self.endpoint, {"tokens": list(seg.tokens)},
                                       timeout=self.timeout, retries=self.retries)
                labels = resp.get("labels") if isinstance(resp, dict) else None
                if not isinstance(labels, list) or len(labels) != len(seg):
                    raise ProtocolError(200, f"expected {len(seg)} labels, got {labels!r}")
                try:
                    out.append([PunctLabel(x) for x in labels])
                except ValueError as exc:
                    raise ProtocolError(200, str(exc)) from None
        return out

    @property
    def endpoint(self) -> str:
        base = self.url.rstrip("/")
        return base if base.endswith("/v1/punctuate") else base + "/v1/punctuate"


def remote_predict(url: str, timeout: float = 10.0, retries: int = 2) -> RemotePredictor:
    return RemotePredictor(url, timeout, retries)

