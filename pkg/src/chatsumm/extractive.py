"""Extractive summarization of customer and agent channels.

The per-transcript procedure runs ten steps in order:

1. channel separation
2. strip punctuation and restore sentence periods on each channel
3. keyword document preparation
4. topic model selection (or reuse of a provided model)
5. dominant-topic identification
6. significant-term selection
7. near-duplicate sentence reduction, then similarity-ranked extraction
8. strip the summary's periods and restore full punctuation
9. metric evaluation against the period-restored channel
10. persistence through an optional sink

Errors raised inside a step are re-raised as :class:`PipelineStepError`
carrying the step number.
"""

from __future__ import annotations

import time
from collections import Counter
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

import numpy as np

from .config import SummarizerConfig
from .embeddings import MeanWordEncoder, SentenceEncoder, WordVectorStore, cosine
from .errors import EmptyCorpus, PipelineStepError
from .metrics import MetricScores, punct_accuracy, score_texts
from .preprocess import Corpus, Document, PreprocessConfig, build_corpus, prepare_document, prepare_documents
from .punctuation import Mode, Predictor, PunctLabel, RulePredictor, restore, strip_punctuation
from .topics import DominantTopics, TopicModel, dominant_topics, select_optimal_model
from .transcript import ChannelKind, ChatTranscript, Role, Sentence, separate_channels, split_sentences

STEP_NAMES = {
    1: "channel_separation",
    2: "period_restoration",
    3: "document_preparation",
    4: "topic_model_selection",
    5: "dominant_topics",
    6: "significant_terms",
    7: "sentence_extraction",
    8: "full_punctuation",
    9: "evaluation",
    10: "persistence",
}

CHANNELS = (ChannelKind.CUSTOMER, ChannelKind.AGENT)


# ---------------------------------------------------------------------------
# core selection operations


def significant_terms(doc: Sequence[str], dom_kwds: Sequence[str], W: float, store: WordVectorStore) -> str:
    """Words of every (doc word, keyword) pair whose vectors have cosine >= W.

    Both words of a qualifying pair are emitted, duplicates removed keeping
    the first occurrence, and the result joined with single spaces.
    """
    kw_vecs = [(k, store.term_vector(k)) for k in dict.fromkeys(dom_kwds)]
    kw_vecs = [(k, v) for k, v in kw_vecs if v is not None]
    out: dict[str, None] = {}
    for w in dict.fromkeys(doc):
        wv = store.term_vector(w)
        if wv is None:
            continue
        for k, kv in kw_vecs:
            if cosine(wv, kv) >= W:
                out.setdefault(w, None)
                out.setdefault(k, None)
    return " ".join(out)


def local_keywords(doc: Sequence[str], n: int) -> list[str]:
    """The ``n`` most frequent document tokens (ties by first occurrence)."""
    counts = Counter(doc)
    first = {}
    for i, tok in enumerate(doc):
        first.setdefault(tok, i)
    return sorted(counts, key=lambda t: (-counts[t], first[t]))[:n]


def _encode_all(sentences: Sequence[Sentence], encoder: SentenceEncoder) -> list[np.ndarray]:
    return [encoder.encode(s.text).values for s in sentences]


def _reduce(vectors: Sequence[np.ndarray], U: float) -> list[int]:
    kept: list[int] = []
    for i, v in enumerate(vectors):
        if all(cosine(v, vectors[j]) <= U for j in kept):
            kept.append(i)
    return kept


def reduce_unique_sentences(sentences: Sequence[Sentence], U: float, encoder: SentenceEncoder) -> list[Sentence]:
    """Greedy near-duplicate removal in transcript order.

    A sentence is dropped when its cosine similarity to any already kept
    sentence exceeds ``U``; the first sentence is always kept.
    """
    keep = _reduce(_encode_all(sentences, encoder), U)
    return [sentences[i] for i in keep]


def _top_l(scores: Sequence[float], l: int) -> list[int]:
    # stable sort on -score: equal scores keep the earlier sentence
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    return sorted(order[:l])


def rank_and_extract(sentences: Sequence[Sentence], term_string: str, l: int,
                     encoder: SentenceEncoder) -> list[Sentence]:
    """Top-``l`` sentences by cosine to the term string, in transcript order."""
    if l < 1:
        raise ValueError("l must be >= 1")
    query = encoder.encode(term_string).values
    scores = [cosine(v, query) for v in _encode_all(sentences, encoder)]
    return [sentences[i] for i in _top_l(scores, l)]


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class Summary:
    transcript_id: str
    channel_kind: ChannelKind
    sentences: list[Sentence] = field(default_factory=list)
    term_string: str = ""
    punctuated_text: str = ""

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)


@dataclass
class ChannelResult:
    """A channel's summary plus the intermediate artifacts used to build it."""

    summary: Summary
    scores: MetricScores | None
    period_text: str = ""
    document: Document | None = None
    dominant: DominantTopics | None = None
    word_count: int = 0


@dataclass
class ExtractiveResult:
    transcript_id: str
    customer: ChannelResult
    agent: ChannelResult
    full_word_count: int = 0

    def channel(self, kind: ChannelKind | str) -> ChannelResult:
        return self.customer if ChannelKind(kind) is ChannelKind.CUSTOMER else self.agent

    @property
    def scores(self) -> tuple[MetricScores | None, MetricScores | None]:
        return self.customer.scores, self.agent.scores


@dataclass
class Resources:
    """Shared, read-mostly inputs of the pipeline.

    ``models`` holds a fitted topic model per channel.  When a channel has no
    model, one is selected over ``corpora[channel]`` (or over the single
    document if no corpus is given) and cached back into ``models``.
    """

    store: WordVectorStore
    role_map: Mapping[str, Role | str]
    predictor: Predictor = field(default_factory=RulePredictor)
    encoder: SentenceEncoder | None = None
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    models: dict[ChannelKind, TopicModel] = field(default_factory=dict)
    corpora: dict[ChannelKind, Corpus] = field(default_factory=dict)
    sink: Callable[[ExtractiveResult], None] | None = None

    @property
    def sentence_encoder(self) -> SentenceEncoder:
        if self.encoder is None:
            self.encoder = MeanWordEncoder(self.store)
        return self.encoder


class StepTimer:
    """Accumulates wall-clock seconds per pipeline step."""

    def __init__(self):
        self.seconds: dict[str, float] = {name: 0.0 for name in STEP_NAMES.values()}

    @contextmanager
    def step(self, index: int):
        name = STEP_NAMES[index]
        t0 = time.perf_counter()
        try:
            yield
        except PipelineStepError:
            raise
        except Exception as exc:
            raise PipelineStepError(index, name, exc) from exc
        finally:
            self.seconds[name] += time.perf_counter() - t0

    def merge(self, other: "StepTimer") -> None:
        for k, v in other.seconds.items():
            self.seconds[k] += v

    @property
    def total(self) -> float:
        return sum(self.seconds.values())


def _stripped_utterances(t: ChatTranscript) -> tuple[list[str], list[PunctLabel], list[int]]:
    """Clean tokens, their original labels, and the index of each turn's last token."""
    tokens: list[str] = []
    labels: list[PunctLabel] = []
    bounds: list[int] = []
    for u in t.utterances:
        st = strip_punctuation(u.text)
        if not st.labels:
            continue
        tokens.extend(st.tokens)
        labels.extend(st.labels)
        bounds.append(len(tokens) - 1)
    return tokens, labels, bounds


def restore_periods(t: ChatTranscript, predictor: Predictor, segment_size: int = 512) -> str:
    """Strip all punctuation from a channel and restore sentence periods,
    hinting the predictor with turn ends."""
    tokens, _, bounds = _stripped_utterances(t)
    if not tokens:
        return ""
    return restore(" ".join(tokens), Mode.PERIODS_ONLY, predictor, segment_size, bounds).text


def _bow_for_model(model: TopicModel, tokens: Sequence[str]) -> list[tuple[int, int]]:
    counts: Counter[int] = Counter()
    for tok in tokens:
        i = model.vocabulary.get(tok)
        if i is not None:
            counts[i] += 1
    return sorted(counts.items())


def _model_for(channel: ChannelKind, doc: Document, cfg: SummarizerConfig, res: Resources) -> TopicModel | None:
    model = res.models.get(channel)
    if model is not None:
        return model
    corpus = res.corpora.get(channel)
    if corpus is None:
        if not doc.tokens:
            return None
        corpus = build_corpus([doc])
    try:
        model, _ = select_optimal_model(corpus, cfg)
    except EmptyCorpus:
        return None
    res.models[channel] = model
    return model


def _summary_labels(sentences: Sequence[Sentence]) -> tuple[list[str], list[PunctLabel], list[int]]:
    tokens: list[str] = []
    labels: list[PunctLabel] = []
    ends: list[int] = []
    for s in sentences:
        st = strip_punctuation(s.text)
        if not st.labels:
            continue
        tokens.extend(st.tokens)
        labels.extend(st.labels)
        ends.append(len(tokens) - 1)
    return tokens, labels, ends


def summarize_channel(t: ChatTranscript, cfg: SummarizerConfig, res: Resources,
                      timer: StepTimer | None = None, period_text: str | None = None,
                      document: Document | None = None) -> ChannelResult:
    """Steps 2 through 9 for one channel transcript.

    ``period_text`` and ``document`` may be passed when a batch runner has
    already computed steps 2 and 3.
    """
    timer = timer or StepTimer()
    channel = t.channel_kind
    empty = ChannelResult(Summary(t.id, channel), None, word_count=t.word_count())
    with timer.step(2):
        if period_text is None:
            period_text = restore_periods(t, res.predictor, cfg.punct_batch_size)
    if not period_text:
        return empty
    with timer.step(3):
        doc = document if document is not None else prepare_document(t, res.preprocess)
    with timer.step(4):
        model = _model_for(channel, doc, cfg, res)
    with timer.step(5):
        if model is None:
            dt = DominantTopics(t.id, [])
        else:
            dt = dominant_topics(model, _bow_for_model(model, doc.tokens), cfg.number_of_dominant_topics,
                                 cfg.keywords_per_topic, t.id, seed=cfg.seed)
    with timer.step(6):
        if cfg.term_extraction_method == "local":
            anchors = local_keywords(doc.tokens, cfg.keywords_per_topic)
        else:
            anchors = dt.keywords
        term_string = significant_terms(doc.tokens, anchors, cfg.word_similarity_threshold, res.store)
    with timer.step(7):
        encoder = res.sentence_encoder
        sentences = split_sentences(period_text)
        vectors = _encode_all(sentences, encoder)
        kept = _reduce(vectors, cfg.uniqueness_threshold)
        query = encoder.encode(term_string).values
        scores = [cosine(vectors[i], query) for i in kept]
        chosen = [sentences[kept[j]] for j in _top_l(scores, cfg.desired_summary_length)]
    with timer.step(8):
        tokens, ref_labels, ends = _summary_labels(chosen)
        hints = ends if cfg.summary_boundary_hints else None
        restored = restore(" ".join(tokens), Mode.FULL, res.predictor, cfg.punct_batch_size, hints)
    summary = Summary(t.id, channel, chosen, term_string, restored.text)
    with timer.step(9):
        acc = punct_accuracy(ref_labels, restored.labels, periods_only=True) if tokens else None
        scores_ = score_texts(restored.text, period_text, acc)
    return ChannelResult(summary, scores_, period_text, doc, dt, t.word_count())


def summarize_extractive(t: ChatTranscript, cfg: SummarizerConfig, res: Resources,
                         timer: StepTimer | None = None) -> ExtractiveResult:
    """Summarize both channels of a transcript."""
    timer = timer or StepTimer()
    with timer.step(1):
        customer, agent = separate_channels(t, res.role_map)
    result = ExtractiveResult(
        t.id,
        summarize_channel(customer, cfg, res, timer),
        summarize_channel(agent, cfg, res, timer),
        t.word_count(),
    )
    if res.sink is not None:
        with timer.step(10):
            res.sink(result)
    return result


@dataclass
class BatchOutput:
    results: list[ExtractiveResult]
    timer: StepTimer
    models: dict[ChannelKind, TopicModel]
    # per-channel preprocessing config, including learned collocations
    preprocess: dict[ChannelKind, PreprocessConfig]


def summarize_batch(transcripts: Sequence[ChatTranscript], cfg: SummarizerConfig, res: Resources,
                    workers: int = 1) -> BatchOutput:
    """Summarize a corpus, selecting one topic model per channel over it.

    Collocations are learned per channel over the batch, and channels with
    a model already present in ``res.models`` reuse it.  Results come back
    in input order; the sink is called from this thread only.
    """
    timer = StepTimer()
    split: list[tuple[ChatTranscript, ChatTranscript]] = []
    with timer.step(1):
        for t in transcripts:
            split.append(separate_channels(t, res.role_map))

    def periods(ct: ChatTranscript) -> str:
        return restore_periods(ct, res.predictor, cfg.punct_batch_size)

    period_texts: dict[ChannelKind, list[str]] = {}
    with timer.step(2):
        for i, ch in enumerate(CHANNELS):
            chans = [pair[i] for pair in split]
            if workers > 1:
                with ThreadPoolExecutor(workers) as pool:
                    period_texts[ch] = list(pool.map(periods, chans))
            else:
                period_texts[ch] = [periods(c) for c in chans]

    docs: dict[ChannelKind, list[Document]] = {}
    learned: dict[ChannelKind, PreprocessConfig] = {}
    with timer.step(3):
        for i, ch in enumerate(CHANNELS):
            docs[ch], learned[ch] = prepare_documents([pair[i] for pair in split], res.preprocess)
    with timer.step(4):
        for ch in CHANNELS:
            if ch in res.models:
                continue
            try:
                corpus = build_corpus(docs[ch])
            except EmptyCorpus:
                continue
            res.corpora[ch] = corpus
            res.models[ch], _ = select_optimal_model(corpus, cfg, max_workers=workers)

    def run_one(i: int) -> tuple[ExtractiveResult, StepTimer]:
        local = StepTimer()
        chans = [
            summarize_channel(split[i][k], cfg, res, local, period_texts[ch][i], docs[ch][i])
            for k, ch in enumerate(CHANNELS)
        ]
        return ExtractiveResult(transcripts[i].id, chans[0], chans[1], transcripts[i].word_count()), local

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            pairs = list(pool.map(run_one, range(len(transcripts))))
    else:
        pairs = [run_one(i) for i in range(len(transcripts))]
    results = []
    for result, local in pairs:
        timer.merge(local)
        results.append(result)
        if res.sink is not None:
            with timer.step(10):
                res.sink(result)
    return BatchOutput(results, timer, dict(res.models), learned)


def with_length(cfg: SummarizerConfig, l: int) -> SummarizerConfig:
    return replace(cfg, desired_summary_length=l)

