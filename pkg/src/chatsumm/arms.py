"""Summarizer arms: the local extractive engine, a remote HTTP summarizer,
and a seeded simulated arm for experiments."""

from __future__ import annotations

import threading
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np

from . import _http
from .bandit import NUMERIC_FEATURES, Context, stable_key
from .config import SummarizerConfig
from .errors import ArmFailure, ProtocolError
from .extractive import Resources, summarize_channel, summarize_extractive
from .metrics import metric_tokens
from .transcript import ChannelKind, ChatTranscript


class Arm(Protocol):
    id: int
    name: str

    def summarize(self, transcript: ChatTranscript, max_sentences: int, **kwargs) -> str:
        ...


@dataclass
class ExtractiveArm:
    """The extractive pipeline as an arm.

    A channel transcript is summarized directly; a full transcript is split
    first and the summary of ``channel`` is returned.
    """

    id: int
    cfg: SummarizerConfig
    resources: Resources
    channel: ChannelKind = ChannelKind.CUSTOMER
    name: str = "extractive"

    def summarize(self, transcript: ChatTranscript, max_sentences: int, **kwargs) -> str:
        cfg = replace(self.cfg, desired_summary_length=max_sentences)
        if transcript.channel_kind is ChannelKind.FULL:
            result = summarize_extractive(transcript, cfg, self.resources).channel(self.channel)
        else:
            result = summarize_channel(transcript, cfg, self.resources)
        return result.summary.punctuated_text


@dataclass
class RemoteArm:
    """Client for ``POST /v1/summarize``.

    Non-2xx responses (after retries) raise :class:`ArmFailure`; a 2xx body
    without a string ``summary`` raises :class:`ProtocolError`.
    """

    id: int
    url: str
    timeout: float = 30.0
    retries: int = 2
    name: str = "remote"
    max_parallel: int = 1
    _sem: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self):
        self._sem = threading.Semaphore(self.max_parallel)

    @property
    def endpoint(self) -> str:
        base = self.url.rstrip("/")
        return base if base.endswith("/v1/summarize") else base + "/v1/summarize"

    def request_body(self, transcript: ChatTranscript, max_sentences: int) -> dict:
        channel = transcript.channel_kind.value
        return {
            "id": transcript.id,
            "text": transcript.text(),
            # a full transcript is sent as the customer view
            "channel": "agent" if channel == "agent" else "customer",
            "max_sentences": int(max_sentences),
        }

    def summarize(self, transcript: ChatTranscript, max_sentences: int, **kwargs) -> str:
        body = self.request_body(transcript, max_sentences)
        try:
            with self._sem:
                resp = _http.post_json(self.endpoint, body, timeout=self.timeout, retries=self.retries)
        except ProtocolError as exc:
            if exc.status is not None and not 200 <= exc.status < 300:
                raise ArmFailure(self.id, transcript.id, exc) from exc
            raise
        summary = resp.get("summary") if isinstance(resp, dict) else None
        if not isinstance(summary, str):
            raise ProtocolError(200, f"missing 'summary' string in response: {str(resp)[:80]}")
        return summary


@dataclass(frozen=True)
class ThresholdEffect:
    """Adds ``bonus`` to the mean reward when ``feature`` exceeds ``threshold``."""

    feature: str
    threshold: float
    bonus: float


@dataclass(frozen=True)
class SimulatedArmSpec:
    base_mean: float
    context_coefficients: dict[str, float] = field(default_factory=dict)
    threshold_effects: tuple[ThresholdEffect, ...] = ()
    noise_sd: float = 0.0
    rng_seed: int = 0
    # apply coefficients to the running z-scores instead of raw feature values
    use_standardized: bool = False


@dataclass
class SimulatedArm:
    """Reward generator with a known mean, for testing policies.

    In ``"direct"`` mode the bandit reads ``direct_reward`` and no text is
    produced.  In ``"text"`` mode :meth:`summarize` subsamples the reference
    summary so that its ROUGE-1 F1 against the reference is close to the
    drawn reward.  The noise for an item depends only on the arm seed and
    the item key, so every policy sees the same reward table.
    """

    id: int
    spec: SimulatedArmSpec
    name: str = ""
    mode: str = "direct"

    def __post_init__(self):
        if not self.name:
            self.name = f"sim-{self.id}"
        if self.mode not in ("direct", "text"):
            raise ValueError(f"mode must be 'direct' or 'text', not {self.mode!r}")

    def _value(self, ctx: Context, name: str) -> float:
        if not self.spec.use_standardized:
            return ctx.feature(name)
        if ctx.standardized is None:
            return 0.0
        return ctx.standardized[NUMERIC_FEATURES.index(name)]

    def mean_reward(self, ctx: Context) -> float:
        m = self.spec.base_mean
        for name, coef in self.spec.context_coefficients.items():
            m += coef * self._value(ctx, name)
        for e in self.spec.threshold_effects:
            if self._value(ctx, e.feature) > e.threshold:
                m += e.bonus
        return m

    def expected_reward(self, ctx: Context) -> float:
        """Noise-free mean, clipped to [0, 1]."""
        return min(1.0, max(0.0, self.mean_reward(ctx)))

    def _rng(self, key: str) -> np.random.Generator:
        return np.random.default_rng([self.spec.rng_seed, self.id, stable_key(key)])

    def direct_reward(self, ctx: Context, key: str = "") -> float:
        r = self.mean_reward(ctx)
        if self.spec.noise_sd > 0:
            r += self._rng(key).normal(0.0, self.spec.noise_sd)
        return min(1.0, max(0.0, r))

    def summarize(self, transcript: ChatTranscript, max_sentences: int, *, context: Context | None = None,
                  reference: str = "", **kwargs) -> str:
        key = getattr(transcript, "id", "")
        target = self.direct_reward(context, key) if context is not None else self.spec.base_mean
        return subsample_to_score(metric_tokens(reference), target, self._rng("text:" + key))


def subsample_to_score(reference_tokens: Sequence[str], target: float, rng: np.random.Generator) -> str:
    """Keep each reference token with probability q = t / (2 - t).

    A subsequence has precision 1 and recall about q against the reference,
    so its ROUGE-1 F1, 2q / (1 + q), is about ``t``.
    """
    t = min(1.0, max(0.0, target))
    q = t / (2.0 - t)
    keep = rng.random(len(reference_tokens)) < q
    return " ".join(tok for tok, k in zip(reference_tokens, keep) if k)


def simulated_arms(specs: Sequence[SimulatedArmSpec], names: Sequence[str] | None = None,
                   mode: str = "direct") -> list[SimulatedArm]:
    names = names or [f"sim-{i}" for i in range(len(specs))]
    return [SimulatedArm(i, s, n, mode) for i, (s, n) in enumerate(zip(specs, names))]
