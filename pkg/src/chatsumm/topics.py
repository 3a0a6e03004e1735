"""LDA (collapsed Gibbs) and LSI (truncated SVD) topic models, UMass
coherence, grid-search model selection, and per-document dominant topics."""

from __future__ import annotations

import enum
import json
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyCorpus, InvalidHyperparam, RankDeficient
from .preprocess import Corpus

try:
    from numba import njit
except ImportError:  # pragma: no cover - pure-python fallback
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

logger = logging.getLogger(__name__)

MODEL_FORMAT = "chatsumm-topic-model"
MODEL_VERSION = 1


class TopicKind(str, enum.Enum):
    LDA = "lda"
    LSI = "lsi"


@dataclass
class TopicModel:
    kind: TopicKind
    num_topics: int
    topic_word: np.ndarray
    vocabulary: dict[str, int]
    rng_seed: int | None = None
    alpha: float | None = None
    beta: float | None = None
    # LSI only: idf weights used to project new documents
    idf: np.ndarray | None = None
    singular_values: np.ndarray | None = None

    @property
    def id2word(self) -> list[str]:
        words = [""] * len(self.vocabulary)
        for w, i in self.vocabulary.items():
            words[i] = w
        return words

    def ranking_weights(self) -> np.ndarray:
        return np.abs(self.topic_word) if self.kind is TopicKind.LSI else self.topic_word

    def top_words(self, k: int, n: int) -> list[str]:
        id2word = self.id2word
        order = _top_indices(self.ranking_weights()[k], n)
        return [id2word[i] for i in order]


@dataclass
class CoherenceReport:
    kind: TopicKind
    num_topics: int
    score: float
    per_topic: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class DominantTopic:
    topic_id: int
    weight: float
    keywords: tuple[str, ...]


@dataclass
class DominantTopics:
    transcript_id: str
    entries: list[DominantTopic] = field(default_factory=list)

    @property
    def keywords(self) -> list[str]:
        """Keywords of all entries, in entry order, deduplicated."""
        seen: dict[str, None] = {}
        for e in self.entries:
            for kw in e.keywords:
                seen.setdefault(kw, None)
        return list(seen)


def _top_indices(row: np.ndarray, n: int) -> np.ndarray:
    # stable: ties keep the lower word id first
    return np.argsort(-row, kind="stable")[:n]


# ---------------------------------------------------------------------------
# LDA


@njit(cache=True, nogil=True)
def _gibbs_sweep(docs, words, z, n_dk, n_kw, n_k, alpha, beta, vbeta, u):
    K = n_k.shape[0]
    p = np.empty(K)
    for i in range(words.shape[0]):
        d = docs[i]
        w = words[i]
        k = z[i]
        n_dk[d, k] -= 1
        n_kw[k, w] -= 1
        n_k[k] -= 1
        total = 0.0
        for j in range(K):
            total += (n_dk[d, j] + alpha) * (n_kw[j, w] + beta) / (n_k[j] + vbeta)
            p[j] = total
        target = u[i] * total
        k = K - 1
        for j in range(K):
            if p[j] >= target:
                k = j
                break
        z[i] = k
        n_dk[d, k] += 1
        n_kw[k, w] += 1
        n_k[k] += 1


@njit(cache=True, nogil=True)
def _fold_in(words, phi, alpha, z, uniforms, burn_in):
    """Gibbs fold-in of one document against fixed topic-word probabilities.

    Returns the doc-topic distribution averaged over post-burn-in sweeps.
    """
    K = phi.shape[0]
    n = words.shape[0]
    n_k = np.zeros(K)
    for i in range(n):
        n_k[z[i]] += 1
    theta = np.zeros(K)
    p = np.empty(K)
    sweeps = uniforms.shape[0]
    for s in range(sweeps):
        for i in range(n):
            w = words[i]
            n_k[z[i]] -= 1
            total = 0.0
            for j in range(K):
                total += (n_k[j] + alpha) * phi[j, w]
                p[j] = total
            target = uniforms[s, i] * total
            k = K - 1
            for j in range(K):
                if p[j] >= target:
                    k = j
                    break
            z[i] = k
            n_k[k] += 1
        if s >= burn_in:
            for j in range(K):
                theta[j] += (n_k[j] + alpha) / (n + K * alpha)
    kept = sweeps - burn_in
    for j in range(K):
        theta[j] /= kept
    return theta


def _flatten(corpus: Corpus) -> tuple[np.ndarray, np.ndarray]:
    docs, words = [], []
    for d, bow in enumerate(corpus.bows):
        for w, c in bow:
            docs.extend([d] * c)
            words.extend([w] * c)
    return np.asarray(docs, dtype=np.int64), np.asarray(words, dtype=np.int64)


def _check_corpus(c: Corpus) -> None:
    if c.doc_count == 0 or not c.vocabulary or not any(c.bows):
        raise EmptyCorpus("corpus has no tokens")


def fit_lda(c: Corpus, K: int, alpha: float = 0.1, beta: float = 0.01, iters: int = 200,
            seed: int = 0, check_counts: bool = False) -> TopicModel:
    """Fit LDA by collapsed Gibbs sampling.

    ``topic_word[k, w] = (n_kw + beta) / (n_k + V * beta)`` from the final
    sample.  With ``check_counts`` the count tables are audited after every
    sweep.
    """
    _check_corpus(c)
    if K < 1:
        raise InvalidHyperparam("K must be >= 1")
    if not (alpha > 0 and beta > 0):
        raise InvalidHyperparam(f"alpha and beta must be positive (got {alpha}, {beta})")
    V = len(c.vocabulary)
    docs, words = _flatten(c)
    rng = np.random.default_rng(seed)
    z = rng.integers(0, K, size=words.shape[0]).astype(np.int64)
    n_dk = np.zeros((c.doc_count, K), dtype=np.int64)
    n_kw = np.zeros((K, V), dtype=np.int64)
    np.add.at(n_dk, (docs, z), 1)
    np.add.at(n_kw, (z, words), 1)
    n_k = n_kw.sum(axis=1)
    word_totals = np.bincount(words, minlength=V) if check_counts else None
    for _ in range(iters):
        u = rng.random(words.shape[0])
        _gibbs_sweep(docs, words, z, n_dk, n_kw, n_k, float(alpha), float(beta), V * float(beta), u)
        if check_counts:
            assert np.array_equal(n_kw.sum(axis=0), word_totals)
            assert np.array_equal(n_kw.sum(axis=1), n_k)
            assert n_dk.sum() == words.shape[0]
    topic_word = (n_kw + beta) / (n_k[:, None] + V * beta)
    return TopicModel(TopicKind.LDA, K, topic_word, dict(c.vocabulary), rng_seed=seed,
                      alpha=alpha, beta=beta)


# ---------------------------------------------------------------------------
# LSI


def _idf(c: Corpus) -> np.ndarray:
    V = len(c.vocabulary)
    df = np.zeros(V)
    for bow in c.bows:
        for w, _ in bow:
            df[w] += 1
    # smoothed so identical documents still carry weight
    return np.log((1.0 + c.doc_count) / (1.0 + df)) + 1.0


def _tfidf_rows(bows: Sequence[Sequence[tuple[int, int]]], idf: np.ndarray) -> np.ndarray:
    M = np.zeros((len(bows), idf.shape[0]))
    for d, bow in enumerate(bows):
        for w, cnt in bow:
            M[d, w] = cnt * idf[w]
        norm = np.linalg.norm(M[d])
        if norm > 0:
            M[d] /= norm
    return M


def tfidf_matrix(c: Corpus) -> np.ndarray:
    return _tfidf_rows(c.bows, _idf(c))


def truncated_svd(M: np.ndarray, k: int, tol: float = 1e-8, max_iter: int = 10_000,
                  seed: int = 0, oversample: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` singular values and right singular vectors by subspace
    (block power) iteration with Rayleigh-Ritz extraction.

    Iterates until every kept pair satisfies
    ``||M^T M v - s^2 v|| <= tol * s_1^2``.  Returns ``(s, Vt)`` with ``Vt``
    of shape ``(k, n_cols)``.
    """
    n_rows, n_cols = M.shape
    b = min(k + oversample, n_rows, n_cols)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n_cols, b)))
    s = np.zeros(b)
    W = Q
    for _ in range(max_iter):
        Z = M.T @ (M @ Q)
        Q, _ = np.linalg.qr(Z)
        # Rayleigh-Ritz on the current subspace
        H = Q.T @ (M.T @ (M @ Q))
        evals, evecs = np.linalg.eigh((H + H.T) / 2)
        order = np.argsort(-evals, kind="stable")
        evals, evecs = evals[order], evecs[:, order]
        W = Q @ evecs
        s = np.sqrt(np.clip(evals, 0.0, None))
        top = s[0] ** 2
        if top == 0.0:
            break
        kk = min(k, b)
        R = M.T @ (M @ W[:, :kk]) - W[:, :kk] * evals[:kk]
        if np.max(np.linalg.norm(R, axis=0)) <= tol * top:
            break
    else:
        logger.warning("truncated_svd: no convergence after %d iterations", max_iter)
    kk = min(k, b)
    Vt = W[:, :kk].T.copy()
    # deterministic sign: largest-magnitude loading positive
    for i in range(kk):
        j = int(np.argmax(np.abs(Vt[i])))
        if Vt[i, j] < 0:
            Vt[i] = -Vt[i]
    return s[:kk], Vt


def fit_lsi(c: Corpus, K: int, tol: float = 1e-8, seed: int = 0) -> TopicModel:
    """TF-IDF + truncated SVD; topic rows are right singular vectors.

    Raises :class:`RankDeficient` (carrying the achievable model) when ``K``
    exceeds the numerical rank of the TF-IDF matrix.
    """
    _check_corpus(c)
    if K < 1:
        raise InvalidHyperparam("K must be >= 1")
    idf = _idf(c)
    M = _tfidf_rows(c.bows, idf)
    limit = min(M.shape)
    s, Vt = truncated_svd(M, min(K, limit), tol=tol, seed=seed)
    rank_tol = max(M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > max(rank_tol, 1e-10)))
    model = TopicModel(TopicKind.LSI, rank if rank < K else K, Vt[:rank] if rank < K else Vt,
                       dict(c.vocabulary), idf=idf, singular_values=s[:rank] if rank < K else s)
    if rank < K:
        raise RankDeficient(K, rank, model)
    return model


# ---------------------------------------------------------------------------
# coherence


def _doc_word_presence(c: Corpus) -> np.ndarray:
    B = np.zeros((c.doc_count, len(c.vocabulary)), dtype=np.float64)
    for d, bow in enumerate(c.bows):
        for w, _ in bow:
            B[d, w] = 1.0
    return B


def umass_topic(top: Sequence[int], presence: np.ndarray) -> float:
    """UMass coherence of one ranked word list.

    sum over m > l of log((D(w_m, w_l) + 1) / D(w_l)), with D(w_l) floored at 1.
    """
    cols = presence[:, list(top)]
    co = cols.T @ cols
    single = np.maximum(np.diag(co), 1.0)
    total = 0.0
    for m in range(1, len(top)):
        for l in range(m):
            total += math.log((co[m, l] + 1.0) / single[l])
    return total


def coherence(m: TopicModel, c: Corpus, top_n: int = 10, presence: np.ndarray | None = None) -> CoherenceReport:
    if top_n < 2:
        raise InvalidHyperparam("top_n must be >= 2")
    if presence is None:
        presence = _doc_word_presence(c)
    weights = m.ranking_weights()
    per_topic = [umass_topic(_top_indices(weights[k], top_n), presence) for k in range(m.num_topics)]
    score = float(np.mean(per_topic)) if per_topic else float("-inf")
    return CoherenceReport(m.kind, m.num_topics, score, per_topic)


# ---------------------------------------------------------------------------
# selection


def topic_grid(n: int, upper: int = 50, step: int = 5) -> list[int]:
    if n >= upper:
        return [n]
    return list(range(n, upper + 1, step))


def _fit_and_score(c: Corpus, kind: TopicKind, K: int, cfg, presence) -> tuple[TopicModel, CoherenceReport] | None:
    if kind is TopicKind.LDA:
        model = fit_lda(c, K, cfg.lda_alpha, cfg.lda_beta, cfg.lda_iters, cfg.seed)
    else:
        try:
            model = fit_lsi(c, K, seed=cfg.seed)
        except RankDeficient:
            return None
    return model, coherence(model, c, cfg.coherence_top_n, presence)


def grid_points(cfg) -> list[tuple[TopicKind, int]]:
    kinds = [TopicKind(cfg.topic_model_type)] if cfg.topic_model_type else [TopicKind.LDA, TopicKind.LSI]
    grid = topic_grid(cfg.number_of_topics, cfg.topic_grid_max, cfg.topic_grid_step)
    return [(kind, K) for kind in kinds for K in grid]


def select_optimal_model(c: Corpus, cfg, max_workers: int = 1) -> tuple[TopicModel, CoherenceReport]:
    """Grid-search topic count (and kind, when unset) by UMass coherence.

    Ties go to the smaller K, then LDA before LSI.  LSI grid points beyond the
    corpus rank are skipped.
    """
    _check_corpus(c)
    points = grid_points(cfg)
    presence = _doc_word_presence(c)
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            results = list(pool.map(lambda p: _fit_and_score(c, p[0], p[1], cfg, presence), points))
    else:
        results = [_fit_and_score(c, kind, K, cfg, presence) for kind, K in points]
    kind_order = {TopicKind.LDA: 0, TopicKind.LSI: 1}
    best = None
    for res in results:
        if res is None:
            continue
        model, report = res
        key = (-report.score, model.num_topics, kind_order[model.kind])
        if best is None or key < best[0]:
            best = (key, model, report)
    if best is None:
        raise EmptyCorpus("no grid point produced a model")
    return best[1], best[2]


# ---------------------------------------------------------------------------
# dominant topics


def dominant_topics(m: TopicModel, bow: Sequence[tuple[int, int]], N: int = 1, top_m: int = 10,
                    transcript_id: str = "", sweeps: int = 20, seed: int = 0) -> DominantTopics:
    """Top-``N`` topics of one document with ``top_m`` keywords each.

    LDA weights come from a seeded fold-in Gibbs pass against the fitted
    topic-word matrix; LSI weights are normalized absolute projections of
    the document's TF-IDF vector.  An empty bag of words yields no entries.
    """
    bow = [(w, c) for w, c in bow if c > 0]
    if not bow:
        return DominantTopics(transcript_id, [])
    if m.kind is TopicKind.LDA:
        words = np.asarray([w for w, c in bow for _ in range(c)], dtype=np.int64)
        rng = np.random.default_rng(seed)
        z = rng.integers(0, m.num_topics, size=words.shape[0]).astype(np.int64)
        uniforms = rng.random((sweeps, words.shape[0]))
        weights = _fold_in(words, m.topic_word, float(m.alpha), z, uniforms, sweeps // 2)
    else:
        vec = _tfidf_rows([bow], m.idf)[0]
        proj = np.abs(m.topic_word @ vec)
        total = proj.sum()
        weights = proj / total if total > 0 else np.full(m.num_topics, 1.0 / m.num_topics)
    weights = weights / weights.sum()
    order = np.argsort(-weights, kind="stable")[: min(N, m.num_topics)]
    entries = [DominantTopic(int(k), float(weights[k]), tuple(m.top_words(int(k), top_m))) for k in order]
    return DominantTopics(transcript_id, entries)


# ---------------------------------------------------------------------------
# serialization


def model_to_dict(m: TopicModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": m.kind.value,
        "num_topics": m.num_topics,
        "vocabulary": m.id2word,
        "topic_word": m.topic_word.tolist(),
        "rng_seed": m.rng_seed,
        "alpha": m.alpha,
        "beta": m.beta,
        "idf": None if m.idf is None else m.idf.tolist(),
        "singular_values": None if m.singular_values is None else m.singular_values.tolist(),
    }


def model_from_dict(d: dict) -> TopicModel:
    if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
        raise ValueError("not a chatsumm topic model (format/version mismatch)")
    return TopicModel(
        kind=TopicKind(d["kind"]),
        num_topics=int(d["num_topics"]),
        topic_word=np.asarray(d["topic_word"], dtype=float),
        vocabulary={w: i for i, w in enumerate(d["vocabulary"])},
        rng_seed=d.get("rng_seed"),
        alpha=d.get("alpha"),
        beta=d.get("beta"),
        idf=None if d.get("idf") is None else np.asarray(d["idf"], dtype=float),
        singular_values=None if d.get("singular_values") is None else np.asarray(d["singular_values"]),
    )


def save_model(m: TopicModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(m), fh)


def load_model(path: str | Path) -> TopicModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
