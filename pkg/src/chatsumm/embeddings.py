"""Word vectors, cosine similarity and sentence embeddings."""

from __future__ import annotations

import logging
import re
import threading
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from . import _http
from .errors import (ChatSummError, DimensionMismatch, FileUnreadable, NoValidRows,
                     ProtocolError, RemoteEncoderFailure)

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")


def sentence_tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


@dataclass
class WordVectorStore:
    dim: int
    table: dict[str, np.ndarray]
    skipped_rows: int = 0

    def get(self, token: str) -> np.ndarray | None:
        return self.table.get(token)

    def __contains__(self, token: str) -> bool:
        return token in self.table

    def __len__(self) -> int:
        return len(self.table)

    def term_vector(self, term: str) -> np.ndarray | None:
        """Vector of a keyword; a joined phrase absent from the table is the
        mean of its parts when every part is present."""
        v = self.table.get(term)
        if v is not None or "_" not in term:
            return v
        parts = [self.table.get(p) for p in term.split("_")]
        if any(p is None for p in parts):
            return None
        return np.mean(parts, axis=0)


def parse_word_vectors(lines: Iterable[str]) -> WordVectorStore:
    table: dict[str, np.ndarray] = {}
    dim = None
    skipped = 0
    for raw in lines:
        parts = raw.rstrip("\n").split()
        if not parts:
            continue
        if len(parts) < 2:
            skipped += 1
            continue
        try:
            vec = np.asarray([float(x) for x in parts[1:]], dtype=np.float64)
        except ValueError:
            skipped += 1
            continue
        if dim is None:
            dim = vec.shape[0]
        if vec.shape[0] != dim:
            skipped += 1
            continue
        table[parts[0]] = vec
    if not table:
        raise NoValidRows("no valid vector rows")
    if skipped:
        logger.warning("skipped %d vector rows with inconsistent dimension", skipped)
    return WordVectorStore(dim, table, skipped)


def load_word_vectors(path: str | Path) -> WordVectorStore:
    """Load ``token v1 ... vD`` rows; dim comes from the first valid row."""
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_word_vectors(fh)
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc}") from None


def save_word_vectors(store: WordVectorStore, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok, vec in store.table.items():
            fh.write(tok + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def cosine(u, v) -> float:
    """u.v / (|u||v|), or 0.0 when either vector is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"cannot compare shapes {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    # normalize first so the product is symmetric and scale-free
    c = float(np.dot(u / nu, v / nv))
    return max(-1.0, min(1.0, c))


@dataclass(frozen=True)
class SentenceVector:
    values: np.ndarray
    source_len: int


class SentenceEncoder(Protocol):
    name: str

    def encode(self, text: str) -> SentenceVector:
        ...


@dataclass
class MeanWordEncoder:
    """Mean of in-vocabulary word vectors; out-of-vocabulary words are skipped."""

    store: WordVectorStore
    name: str = "mean-word-vectors"

    def encode(self, text: str) -> SentenceVector:
        vecs = [v for v in (self.store.get(t) for t in sentence_tokens(text)) if v is not None]
        if not vecs:
            return SentenceVector(np.zeros(self.store.dim), 0)
        return SentenceVector(np.mean(vecs, axis=0), len(vecs))


@dataclass
class RemoteEncoder:
    """Client for ``POST /v1/embed``; optionally falls back to mean-of-words."""

    url: str
    timeout: float = 10.0
    retries: int = 1
    fallback: MeanWordEncoder | None = None
    max_parallel: int = 4
    name: str = "remote"
    _sem: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self):
        self._sem = threading.Semaphore(self.max_parallel)

    @property
    def endpoint(self) -> str:
        base = self.url.rstrip("/")
        return base if base.endswith("/v1/embed") else base + "/v1/embed"

    def encode(self, text: str) -> SentenceVector:
        try:
            with self._sem:
                resp = _http.post_json(self.endpoint, {"text": text}, timeout=self.timeout, retries=self.retries)
            vec = resp.get("vector") if isinstance(resp, dict) else None
            if not isinstance(vec, list) or not vec:
                raise ProtocolError(200, f"bad embed response: {str(resp)[:80]}")
            return SentenceVector(np.asarray(vec, dtype=np.float64), len(sentence_tokens(text)))
        except ChatSummError as exc:
            if self.fallback is not None:
                logger.warning("remote encoder failed (%s); using %s", exc, self.fallback.name)
                return self.fallback.encode(text)
            raise RemoteEncoderFailure(str(exc)) from exc


def embed_sentence(s, store: WordVectorStore, encoder: SentenceEncoder | None = None) -> SentenceVector:
    text = getattr(s, "text", s)
    return (encoder or MeanWordEncoder(store)).encode(text)
