"""Document preparation: transcripts -> keyword lists -> bag-of-words corpus.

Stage order is fixed: lowercase, contraction expansion, tokenization on
non-alphanumerics, stop-word removal, small-word filter, phrase joining,
suffix-stripping lemmatization, lexicon POS filter.
"""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import EmptyCorpus
from .transcript import ChatTranscript

ALLOWED_TAGS = frozenset({"NOUN", "VERB", "ADJ"})


def _read_table(lines: Iterable[str]) -> list[str]:
    out = []
    for raw in lines:
        line = raw.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def _bundled(name: str) -> list[str]:
    text = resources.files("chatsumm").joinpath("data").joinpath(name).read_text(encoding="utf-8")
    return _read_table(text.splitlines())


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    return frozenset(w.lower() for w in _bundled("stopwords.txt"))


@lru_cache(maxsize=None)
def default_contractions() -> tuple[tuple[str, str], ...]:
    return tuple(_parse_pairs(_bundled("contractions.txt")))


@lru_cache(maxsize=None)
def default_pos_lexicon() -> dict[str, str]:
    lex = {}
    for line in _bundled("pos_lexicon.txt"):
        word, tag = line.split("\t")
        lex[word] = tag
    return lex


@lru_cache(maxsize=None)
def default_lemma_exceptions() -> dict[str, str]:
    return dict(_parse_pairs(_bundled("lemma_exceptions.txt")))


def _parse_pairs(lines: Iterable[str]) -> list[tuple[str, str]]:
    pairs = []
    for line in lines:
        k, _, v = line.partition("=")
        pairs.append((k.strip().lower(), v.strip().lower()))
    return pairs


def load_stopwords(path: str | Path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.lower() for w in _read_table(fh))


def load_contractions(path: str | Path) -> tuple[tuple[str, str], ...]:
    with open(path, encoding="utf-8") as fh:
        return tuple(_parse_pairs(_read_table(fh)))


@dataclass(frozen=True)
class PreprocessConfig:
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    extra_stopwords: frozenset[str] = frozenset()
    contractions: tuple[tuple[str, str], ...] = field(default_factory=default_contractions)
    max_small_len: int = 4
    phrase_min_count: int = 5
    phrase_threshold: float = 10.0
    # learned collocations, as (left, right) pairs; see learn_phrases
    phrases: frozenset[tuple[str, str]] = frozenset()
    pos_filter: bool = True
    allowed_tags: frozenset[str] = ALLOWED_TAGS

    @property
    def all_stopwords(self) -> frozenset[str]:
        return self.stopwords | self.extra_stopwords

    def fingerprint(self) -> dict:
        """JSON-friendly summary used in config hashes."""
        return {
            "stopwords": sorted(self.all_stopwords),
            "contractions": [list(p) for p in self.contractions],
            "max_small_len": self.max_small_len,
            "phrase_min_count": self.phrase_min_count,
            "phrase_threshold": self.phrase_threshold,
            "phrases": sorted("_".join(p) for p in self.phrases),
            "pos_filter": self.pos_filter,
            "allowed_tags": sorted(self.allowed_tags),
        }


@dataclass(frozen=True)
class Document:
    transcript_id: str
    tokens: tuple[str, ...] = ()


@dataclass
class Corpus:
    vocabulary: dict[str, int]
    bows: list[list[tuple[int, int]]]
    doc_ids: list[str] = field(default_factory=list)

    @property
    def doc_count(self) -> int:
        return len(self.bows)

    @property
    def id2word(self) -> list[str]:
        words = [""] * len(self.vocabulary)
        for w, i in self.vocabulary.items():
            words[i] = w
        return words

    def bow_for(self, tokens: Iterable[str]) -> list[tuple[int, int]]:
        """Bag-of-words over this vocabulary; unknown tokens are dropped."""
        counts: Counter[int] = Counter()
        for tok in tokens:
            i = self.vocabulary.get(tok)
            if i is not None:
                counts[i] += 1
        return sorted(counts.items())


# ---------------------------------------------------------------------------
# stages

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def expand_contractions(text: str, contractions: Sequence[tuple[str, str]]) -> str:
    table = dict(contractions)
    if not table:
        return text

    def sub(m: re.Match) -> str:
        word = m.group(0)
        return table.get(word, word)

    # word boundaries are whitespace or punctuation other than ' and /
    return re.sub(r"[a-z0-9'/]+", sub, text.replace("’", "'"))


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def base_tokens(text: str, cfg: PreprocessConfig) -> list[str]:
    """Stages up to and including the small-word filter."""
    text = expand_contractions(text.lower(), cfg.contractions)
    stop = cfg.all_stopwords
    return [t for t in tokenize(text) if t not in stop and len(t) > cfg.max_small_len]


def join_phrases(tokens: Sequence[str], phrases: frozenset[tuple[str, str]]) -> list[str]:
    """Greedy left-to-right collocation joining, applied until no pair joins.

    Two passes cover trigrams built as (bigram, word) or (word, bigram).
    """
    if not phrases:
        return list(tokens)
    out = list(tokens)
    for _ in range(2):
        joined, i, changed = [], 0, False
        while i < len(out):
            if i + 1 < len(out) and (out[i], out[i + 1]) in phrases:
                joined.append(f"{out[i]}_{out[i + 1]}")
                i += 2
                changed = True
            else:
                joined.append(out[i])
                i += 1
        out = joined
        if not changed:
            break
    return out


def _phrase_pass(streams: list[list[str]], min_count: int, threshold: float) -> set[tuple[str, str]]:
    uni: Counter[str] = Counter()
    bi: Counter[tuple[str, str]] = Counter()
    for s in streams:
        uni.update(s)
        bi.update(zip(s, s[1:]))
    n_vocab = len(uni)
    found = set()
    for (a, b), n_ab in bi.items():
        if n_ab < min_count:
            continue
        score = (n_ab - min_count) * n_vocab / (uni[a] * uni[b])
        if score >= threshold:
            found.add((a, b))
    return found


def learn_phrases(token_streams: Iterable[Sequence[str]], min_count: int = 5,
                  threshold: float = 10.0) -> frozenset[tuple[str, str]]:
    """Learn bigram collocations, then trigrams over the bigram-joined streams."""
    streams = [list(s) for s in token_streams]
    bigrams = _phrase_pass(streams, min_count, threshold)
    joined = [join_phrases(s, frozenset(bigrams)) for s in streams]
    trigrams = {p for p in _phrase_pass(joined, min_count, threshold) if "_" in p[0] or "_" in p[1]}
    return frozenset(bigrams | trigrams)


_VOWELS = set("aeiou")


def lemmatize(word: str, exceptions: dict[str, str] | None = None) -> str:
    """Rule-based suffix stripping for s/es/ed/ing with an exception table."""
    exc = default_lemma_exceptions() if exceptions is None else exceptions
    if word in exc:
        return exc[word]
    w = word
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith(("sses", "shes", "ches", "xes", "zes")):
        return w[:-2]
    if w.endswith("s") and not w.endswith(("ss", "us", "is")):
        return w[:-1]
    for suffix in ("ing", "ed"):
        if w.endswith(suffix) and len(w) - len(suffix) >= 3:
            stem = w[: -len(suffix)]
            if not any(c in _VOWELS or c == "y" for c in stem):
                return w
            if suffix == "ed" and stem.endswith("i"):
                return stem[:-1] + "y"
            if len(stem) > 2 and stem[-1] == stem[-2] and stem[-1] not in "lsz":
                return stem[:-1]
            if stem.endswith(("v", "iz", "at", "bl", "dg", "rg", "uc", "rc")):
                return stem + "e"
            return stem
    return w


def pos_tag(lemma: str, lexicon: dict[str, str] | None = None) -> str:
    lex = default_pos_lexicon() if lexicon is None else lexicon
    return lex.get(lemma, "NOUN")


def prepare_tokens(text: str, cfg: PreprocessConfig) -> list[str]:
    tokens = join_phrases(base_tokens(text, cfg), cfg.phrases)
    out = []
    for tok in tokens:
        if "_" in tok:
            out.append(tok)
            continue
        lemma = lemmatize(tok)
        if len(lemma) <= cfg.max_small_len or lemma in cfg.all_stopwords:
            continue
        if cfg.pos_filter and pos_tag(lemma) not in cfg.allowed_tags:
            continue
        out.append(lemma)
    return out


def prepare_document(t: ChatTranscript, cfg: PreprocessConfig | None = None) -> Document:
    cfg = cfg or PreprocessConfig()
    text = " ".join(u.text for u in t.utterances)
    return Document(t.id, tuple(prepare_tokens(text, cfg)))


def prepare_documents(transcripts: Sequence[ChatTranscript],
                      cfg: PreprocessConfig | None = None,
                      learn: bool = True) -> tuple[list[Document], PreprocessConfig]:
    """Prepare a batch, learning collocations over it first when ``learn``.

    Returns the documents and the config actually used (with phrases filled).
    """
    cfg = cfg or PreprocessConfig()
    if learn:
        streams = [base_tokens(" ".join(u.text for u in t.utterances), cfg) for t in transcripts]
        cfg = replace(cfg, phrases=learn_phrases(streams, cfg.phrase_min_count, cfg.phrase_threshold))
    return [prepare_document(t, cfg) for t in transcripts], cfg


def build_corpus(docs: Sequence[Document]) -> Corpus:
    """Assign vocabulary ids in first-occurrence order and count tokens per doc."""
    if not docs or all(not d.tokens for d in docs):
        raise EmptyCorpus("all documents are empty")
    vocab: dict[str, int] = {}
    bows = []
    for d in docs:
        counts: dict[int, int] = {}
        for tok in d.tokens:
            i = vocab.setdefault(tok, len(vocab))
            counts[i] = counts.get(i, 0) + 1
        bows.append(list(counts.items()))
    return Corpus(vocab, bows, [d.transcript_id for d in docs])
