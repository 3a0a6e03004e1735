"""BLEU, ROUGE-1/ROUGE-L, punctuation-restoration accuracy, and averaging."""

from __future__ import annotations

import math
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field

from .errors import LengthMismatch
from .punctuation import PunctLabel, coerce_periods_only

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")


def metric_tokens(text: str) -> list[str]:
    """Lowercased word tokens, punctuation dropped."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class PRF:
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0


@dataclass(frozen=True)
class MetricScores:
    bleu: float
    rouge1: PRF
    rougeL: PRF
    punct_accuracy: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricScores":
        return cls(d["bleu"], PRF(**d["rouge1"]), PRF(**d["rougeL"]), d.get("punct_accuracy"))


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Sequence[str], reference: Sequence[str], max_n: int = 4) -> float:
    """Sentence-level cumulative BLEU-``max_n`` with uniform weights.

    Modified (clipped) n-gram precisions; an order with zero matches gets
    add-one smoothing, (0 + 1) / (total + 1).  Brevity penalty exp(1 - r/c)
    applies when the candidate is shorter than the reference.
    """
    c, r = len(candidate), len(reference)
    if c == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand = _ngrams(candidate, n)
        ref = _ngrams(reference, n)
        total = sum(cand.values())
        matches = sum(min(cnt, ref[g]) for g, cnt in cand.items())
        p = matches / total if matches else 1.0 / (total + 1.0)
        log_sum += math.log(p) / max_n
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum)


def _prf(matches: int, n_cand: int, n_ref: int) -> PRF:
    if n_cand == 0 or n_ref == 0:
        return PRF()
    p = matches / n_cand
    r = matches / n_ref
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return PRF(p, r, f)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge(candidate: Sequence[str], reference: Sequence[str], variant: str = "rouge1") -> PRF:
    """ROUGE-1 (clipped unigram overlap) or ROUGE-L (LCS)."""
    if variant in ("rouge1", "R1"):
        cand, ref = Counter(candidate), Counter(reference)
        matches = sum((cand & ref).values())
    elif variant in ("rougeL", "RL"):
        matches = lcs_length(candidate, reference)
    else:
        raise ValueError(f"unknown ROUGE variant {variant!r}")
    return _prf(matches, len(candidate), len(reference))


def punct_accuracy(reference_labels: Sequence[PunctLabel | str], predicted_labels: Sequence[PunctLabel | str],
                   periods_only: bool = False) -> float:
    """Percentage of token positions whose labels agree."""
    if len(reference_labels) != len(predicted_labels):
        raise LengthMismatch(f"{len(reference_labels)} reference vs {len(predicted_labels)} predicted labels")
    if not reference_labels:
        return 100.0
    ref = [PunctLabel(x) for x in reference_labels]
    pred = [PunctLabel(x) for x in predicted_labels]
    if periods_only:
        ref = [coerce_periods_only(x) for x in ref]
        pred = [coerce_periods_only(x) for x in pred]
    return 100.0 * sum(a is b for a, b in zip(ref, pred)) / len(ref)


def score_texts(candidate: str, reference: str, punct: float | None = None) -> MetricScores:
    c, r = metric_tokens(candidate), metric_tokens(reference)
    return MetricScores(bleu(c, r), rouge(c, r, "rouge1"), rouge(c, r, "rougeL"), punct)


def reward_score(candidate: str, reference: str, metric: str) -> float:
    """Scalar reward in [0, 1]: BLEU or a ROUGE F1."""
    c, r = metric_tokens(candidate), metric_tokens(reference)
    m = metric.lower()
    if m == "bleu":
        return bleu(c, r)
    if m in ("rouge1", "r1"):
        return rouge(c, r, "rouge1").f1
    if m in ("rougel", "rouge_l", "rl"):
        return rouge(c, r, "rougeL").f1
    raise ValueError(f"unknown reward metric {metric!r}")


# ---------------------------------------------------------------------------

FLAT_FIELDS = ("bleu", "rouge1_precision", "rouge1_recall", "rouge1_f1",
               "rougeL_precision", "rougeL_recall", "rougeL_f1")


def flatten_scores(s: MetricScores) -> dict[str, float | None]:
    return {
        "bleu": s.bleu,
        "rouge1_precision": s.rouge1.precision, "rouge1_recall": s.rouge1.recall, "rouge1_f1": s.rouge1.f1,
        "rougeL_precision": s.rougeL.precision, "rougeL_recall": s.rougeL.recall, "rougeL_f1": s.rougeL.f1,
        "punct_accuracy": s.punct_accuracy,
    }


@dataclass
class ChannelAggregate:
    count: int = 0
    means: dict[str, float] = field(default_factory=dict)
    punct_count: int = 0
    punct_accuracy: float | None = None


@dataclass
class AggregateReport:
    channels: dict[str, ChannelAggregate] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: asdict(v) for k, v in self.channels.items()}


def aggregate(items: Iterable[tuple[str, MetricScores]]) -> AggregateReport:
    """Arithmetic means per channel; missing punctuation accuracy is excluded
    from its own mean and counted separately."""
    sums: dict[str, dict[str, float]] = {}
    counts: Counter[str] = Counter()
    psum: Counter[str] = Counter()
    pcount: Counter[str] = Counter()
    for channel, s in items:
        channel = getattr(channel, "value", channel)
        flat = flatten_scores(s)
        acc = sums.setdefault(channel, dict.fromkeys(FLAT_FIELDS, 0.0))
        for k in FLAT_FIELDS:
            acc[k] += flat[k]
        counts[channel] += 1
        if s.punct_accuracy is not None:
            psum[channel] += s.punct_accuracy
            pcount[channel] += 1
    report = AggregateReport()
    for channel in sums:
        n = counts[channel]
        report.channels[channel] = ChannelAggregate(
            count=n,
            means={k: v / n for k, v in sums[channel].items()},
            punct_count=pcount[channel],
            punct_accuracy=psum[channel] / pcount[channel] if pcount[channel] else None,
        )
    return report
