"""Synthetic bandit scenarios built from simulated arms."""

from __future__ import annotations

import numpy as np

from .arms import SimulatedArm, SimulatedArmSpec, ThresholdEffect, simulated_arms
from .bandit import BanditItem, Context


def random_contexts(n: int, seed: int = 0, n_topics: int = 5) -> list[BanditItem]:
    """Items with plausible, independently drawn context features."""
    rng = np.random.default_rng(seed)
    items = []
    for i in range(n):
        full = int(rng.integers(80, 600))
        frac = float(rng.uniform(0.05, 0.95))
        length = max(1, int(round(full * frac)))
        frac = length / full
        kw = int(rng.integers(5, 21))
        ctx = Context(
            length=length,
            length_fraction=frac,
            dominant_topic_id=int(rng.integers(n_topics)),
            dominant_topic_contribution=float(rng.uniform(0.2, 1.0)),
            num_dominant_keywords=kw,
            num_document_words=max(1, int(length * rng.uniform(0.2, 0.5))),
        )
        items.append(BanditItem(f"sim{i:06d}", ctx))
    return items


def dominant_arm_specs(k: int = 5, best: int = 3, base: float = 0.5, gap: float = 0.1,
                       noise_sd: float = 0.1, seed: int = 0) -> list[SimulatedArmSpec]:
    """``k`` context-free arms; arm ``best`` has mean ``base + gap``."""
    return [SimulatedArmSpec(base + (gap if a == best else 0.0), noise_sd=noise_sd, rng_seed=seed)
            for a in range(k)]


def context_split_specs(gap: float = 0.15, base: float = 0.5, cut: float = 0.5, noise_sd: float = 0.1,
                        seed: int = 0) -> list[SimulatedArmSpec]:
    """Two arms: A is better when length_fraction > ``cut``, B otherwise."""
    return [
        SimulatedArmSpec(base, threshold_effects=(ThresholdEffect("length_fraction", cut, gap),),
                         noise_sd=noise_sd, rng_seed=seed),
        SimulatedArmSpec(base + gap, threshold_effects=(ThresholdEffect("length_fraction", cut, -gap),),
                         noise_sd=noise_sd, rng_seed=seed),
    ]


def make_arms(specs, names=None) -> list[SimulatedArm]:
    return simulated_arms(specs, names)
