"""Contextual multi-armed bandit over summarizer arms.

Every policy keeps the same bookkeeping: per-arm average reward ``Q``, pull
counts ``N_arm``, total pulls ``N`` and the running average metric score
``AMS``, all updated with incremental means.  Contextual policies also keep
an online logistic model per arm over a feature vector built from the
transcript context.
"""

from __future__ import annotations

import enum
import math
import zlib
from collections import deque
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ArmFailure, RewardOutOfRange, Uninitialized
from .metrics import reward_score

K_MAX = 50  # one-hot slots for dominant topic ids; one extra slot means "none"
NUMERIC_FEATURES = ("length", "length_fraction", "dominant_topic_contribution",
                    "num_dominant_keywords", "num_document_words")
FEATURE_DIM = 1 + len(NUMERIC_FEATURES) + K_MAX + 1


# ---------------------------------------------------------------------------
# context


@dataclass(frozen=True)
class Context:
    length: int
    length_fraction: float
    dominant_topic_id: int | None
    dominant_topic_contribution: float
    num_dominant_keywords: int
    num_document_words: int
    standardized: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 0.0 <= self.length_fraction <= 1.0:
            raise ValueError(f"length_fraction {self.length_fraction} outside [0, 1]")

    def numeric(self) -> np.ndarray:
        return np.array([float(getattr(self, f)) for f in NUMERIC_FEATURES])

    def one_hot(self) -> np.ndarray:
        v = np.zeros(K_MAX + 1)
        tid = self.dominant_topic_id
        v[K_MAX if tid is None or not 0 <= tid < K_MAX else tid] = 1.0
        return v

    def feature(self, name: str) -> float:
        return float(getattr(self, name))


class ContextStandardizer:
    """Running per-feature z-scores (Welford); statistics include the current value."""

    def __init__(self, n_features: int = len(NUMERIC_FEATURES)):
        self.n = 0
        self.mean = np.zeros(n_features)
        self.m2 = np.zeros(n_features)

    def update(self, values: np.ndarray) -> np.ndarray:
        self.n += 1
        delta = values - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (values - self.mean)
        if self.n < 2:
            return np.zeros_like(values)
        sd = np.sqrt(self.m2 / (self.n - 1))
        return np.divide(values - self.mean, sd, out=np.zeros_like(values), where=sd > 0)


def build_context(channel_words: int, full_len: int, dominant=None, doc_tokens: Sequence[str] = (),
                  standardizer: ContextStandardizer | None = None) -> Context:
    """Context of one channel transcript.

    ``dominant`` is a DominantTopics (or None); the first entry supplies the
    topic id and contribution.  With a standardizer, the z-scored copy is
    filled in and the running statistics advance.
    """
    if full_len < channel_words:
        raise ValueError("full_len must be >= the channel length")
    entries = getattr(dominant, "entries", None) or []
    first = entries[0] if entries else None
    ctx = Context(
        length=channel_words,
        length_fraction=channel_words / full_len if full_len else 0.0,
        dominant_topic_id=first.topic_id if first else None,
        dominant_topic_contribution=float(first.weight) if first else 0.0,
        num_dominant_keywords=len(dominant.keywords) if first else 0,
        num_document_words=len(doc_tokens),
    )
    if standardizer is not None:
        ctx = with_standardized(ctx, standardizer)
    return ctx


def with_standardized(ctx: Context, standardizer: ContextStandardizer) -> Context:
    z = standardizer.update(ctx.numeric())
    return Context(ctx.length, ctx.length_fraction, ctx.dominant_topic_id, ctx.dominant_topic_contribution,
                   ctx.num_dominant_keywords, ctx.num_document_words, tuple(float(x) for x in z))


def feature_vector(ctx: Context) -> np.ndarray:
    """[intercept, z-scored numeric features, dominant-topic one-hot]."""
    z = np.asarray(ctx.standardized) if ctx.standardized is not None else np.zeros(len(NUMERIC_FEATURES))
    return np.concatenate(([1.0], z, ctx.one_hot()))


# ---------------------------------------------------------------------------
# policies


class PolicyKind(str, enum.Enum):
    EPSILON_GREEDY = "EpsilonGreedy"
    EXPLORE_FIRST = "ExploreFirst"
    SOFTMAX = "Softmax"
    ADAPTIVE_GREEDY = "AdaptiveGreedy"
    LOGISTIC_UCB = "LogisticUCB"
    BOOTSTRAPPED_UCB = "BootstrappedUCB"
    BOOTSTRAPPED_TS = "BootstrappedTS"


ALL_POLICIES = tuple(PolicyKind)

DEFAULT_PARAMS: dict[str, float | int | bool] = {
    "epsilon": 0.1,
    "decay": False,
    "explore_rounds": 100,
    "tau": 0.1,
    "percentile": 30.0,
    "window": 500,
    "threshold_decay": 0.9998,
    "alpha": 0.5,
    "replicas": 10,
    "ucb_percentile": 80.0,
    "lr": 0.05,
    "l2": 1.0,
}


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _argmax(values: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. the lowest arm id on ties
    return int(np.argmax(values))


class PolicyState:
    """Bandit state for one policy over ``K`` arms.

    Call :meth:`initialize` (or construct with ``K``) before choosing.
    ``params`` override entries of :data:`DEFAULT_PARAMS`.
    """

    def __init__(self, kind: PolicyKind | str, K: int | None = None, dim: int = FEATURE_DIM,
                 rng_seed: int = 0, **params):
        self.kind = PolicyKind(kind)
        unknown = set(params) - set(DEFAULT_PARAMS)
        if unknown:
            raise ValueError(f"unknown policy parameters: {sorted(unknown)}")
        self.params = {**DEFAULT_PARAMS, **params}
        self.rng_seed = rng_seed
        self.K = 0
        self.dim = dim
        if K is not None:
            self.initialize(K, dim)

    def initialize(self, K: int, dim: int | None = None) -> None:
        if K < 1:
            raise Uninitialized("a policy needs at least one arm")
        self.K = K
        self.dim = dim or self.dim
        self.rng = np.random.default_rng(self.rng_seed)
        self.Q = np.zeros(K)
        self.N_arm = np.zeros(K, dtype=np.int64)
        self.N = 0
        self.AMS = 0.0
        d = self.dim
        self.W = np.zeros((K, d))
        l2 = float(self.params["l2"])
        self.A_inv = np.stack([np.eye(d) / l2 for _ in range(K)])
        B = int(self.params["replicas"])
        self.replicas = np.zeros((K, B, d))
        self.replica_n = np.zeros((K, B))
        self.recent_max: deque[float] = deque(maxlen=int(self.params["window"]))

    @property
    def initialized(self) -> bool:
        return self.K > 0

    # -- predictions -------------------------------------------------------

    def predictions(self, x: np.ndarray) -> np.ndarray:
        """Point predictions sigmoid(w_a . x) for every arm."""
        return _sigmoid(self.W @ x)

    def ucb_bonus(self, x: np.ndarray) -> np.ndarray:
        quad = np.einsum("i,kij,j->k", x, self.A_inv, x)
        return float(self.params["alpha"]) * np.sqrt(np.maximum(quad, 0.0))

    def upper_bounds(self, x: np.ndarray) -> np.ndarray:
        """Optimistic rewards: the confidence width is added on the logit
        scale, then squashed, so bounds stay in (0, 1)."""
        return _sigmoid(self.W @ x + self.ucb_bonus(x))

    def _replica_predictions(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(self.replicas @ x)  # K x B

    # -- choice ------------------------------------------------------------

    def choose(self, x: np.ndarray) -> int:
        if not self.initialized:
            raise Uninitialized("policy state has not been initialized")
        k = self.kind
        p = self.params
        if k is PolicyKind.EPSILON_GREEDY:
            eps = float(p["epsilon"])
            if p["decay"]:
                eps /= math.sqrt(self.N + 1)
            if self.rng.random() < eps:
                return int(self.rng.integers(self.K))
            return _argmax(self.predictions(x))
        if k is PolicyKind.EXPLORE_FIRST:
            if self.N < int(p["explore_rounds"]) * self.K:
                return int(self.rng.integers(self.K))
            return _argmax(self.predictions(x))
        if k is PolicyKind.SOFTMAX:
            logits = self.predictions(x) / float(p["tau"])
            probs = np.exp(logits - logits.max())
            probs /= probs.sum()
            return int(self.rng.choice(self.K, p=probs))
        if k is PolicyKind.ADAPTIVE_GREEDY:
            preds = self.predictions(x)
            best = float(preds.max())
            # percentile of recent best predictions, shrinking geometrically per round
            threshold = (float(np.percentile(self.recent_max, p["percentile"]))
                         * float(p["threshold_decay"]) ** self.N if self.recent_max else -math.inf)
            self.recent_max.append(best)
            if best < threshold:
                return int(self.rng.integers(self.K))
            return _argmax(preds)
        if k is PolicyKind.LOGISTIC_UCB:
            return _argmax(self.upper_bounds(x))
        reps = self._replica_predictions(x)
        if k is PolicyKind.BOOTSTRAPPED_UCB:
            return _argmax(np.percentile(reps, p["ucb_percentile"], axis=1))
        pick = self.rng.integers(reps.shape[1], size=self.K)
        return _argmax(reps[np.arange(self.K), pick])

    # -- update ------------------------------------------------------------

    def update(self, x: np.ndarray, a: int, r: float) -> None:
        if not self.initialized:
            raise Uninitialized("policy state has not been initialized")
        if not 0.0 <= r <= 1.0 or math.isnan(r):
            raise RewardOutOfRange(f"reward {r} outside [0, 1]")
        self.N_arm[a] += 1
        self.N += 1
        self.Q[a] += (r - self.Q[a]) / self.N_arm[a]
        self.AMS += (r - self.AMS) / self.N
        lr = float(self.params["lr"])
        l2 = float(self.params["l2"])
        self.W[a] = _sgd_step(self.W[a], x, r, lr, l2 / self.N_arm[a])
        # Sherman-Morrison update of (A + x x^T)^-1
        Ainv = self.A_inv[a]
        Ax = Ainv @ x
        self.A_inv[a] = Ainv - np.outer(Ax, Ax) / (1.0 + x @ Ax)
        if self.kind in (PolicyKind.BOOTSTRAPPED_UCB, PolicyKind.BOOTSTRAPPED_TS):
            mult = self.rng.poisson(1.0, size=self.replicas.shape[1])
            for b in np.nonzero(mult)[0]:
                for _ in range(int(mult[b])):
                    self.replica_n[a, b] += 1
                    self.replicas[a, b] = _sgd_step(self.replicas[a, b], x, r, lr, l2 / self.replica_n[a, b])

    def best_arm(self) -> int:
        return _argmax(self.Q)


def _sgd_step(w: np.ndarray, x: np.ndarray, r: float, lr: float, l2: float) -> np.ndarray:
    """One gradient step on cross-entropy with soft target r, L2 on non-intercept weights."""
    grad = (_sigmoid(w @ x) - r) * x
    reg = l2 * w
    reg[0] = 0.0
    return w - lr * (grad + reg)


def choose(ps: PolicyState, x) -> int:
    return ps.choose(_as_vector(x))


def update(ps: PolicyState, x, a: int, r: float) -> None:
    ps.update(_as_vector(x), a, r)


def _as_vector(x) -> np.ndarray:
    return feature_vector(x) if isinstance(x, Context) else np.asarray(x, dtype=float)


# ---------------------------------------------------------------------------
# runs


@dataclass
class BanditItem:
    """One round's input: a transcript (or its channel), its context, the
    reference summary rewards are scored against, and optionally a
    precomputed per-arm score row."""

    transcript_id: str
    context: Context
    transcript: object = None
    reference: str = ""
    scores: Sequence[float] | None = None


@dataclass
class Round:
    round: int
    transcript_id: str
    arm: int
    reward: float
    ams: float
    regret: float | None = None


@dataclass
class BanditReport:
    policy: str
    seed: int
    Q: list[float]
    N_arm: list[int]
    AMS: float
    best_arm: int
    trajectory: list[Round] = field(default_factory=list)
    arm_names: list[str] = field(default_factory=list)
    skipped: int = 0
    failures: int = 0

    @property
    def N(self) -> int:
        return int(sum(self.N_arm))

    @property
    def cumulative_regret(self) -> list[float] | None:
        if not self.trajectory or self.trajectory[0].regret is None:
            return None
        out, total = [], 0.0
        for step in self.trajectory:
            total += step.regret
            out.append(total)
        return out

    def regret_at(self, t: int) -> float:
        curve = self.cumulative_regret
        if curve is None:
            raise ValueError("arms do not expose expected rewards; regret is unavailable")
        return curve[t - 1]

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "arms": self.arm_names,
            "Q": self.Q,
            "N_arm": self.N_arm,
            "N": self.N,
            "AMS": self.AMS,
            "best_arm": self.best_arm,
            "skipped": self.skipped,
            "failures": self.failures,
            "trajectory": [[s.round, s.transcript_id, s.arm, s.reward, s.ams] for s in self.trajectory],
        }


def prefilter(items: Sequence[BanditItem]) -> tuple[list[BanditItem], int]:
    """Drop items whose precomputed scores are all zero."""
    kept = [it for it in items if it.scores is None or any(s > 0 for s in it.scores)]
    return kept, len(items) - len(kept)


def _pull(arm, index: int, item: BanditItem, reward_metric: str, max_sentences: int) -> float:
    if item.scores is not None:
        return float(item.scores[index])
    direct = getattr(arm, "direct_reward", None)
    if direct is not None and getattr(arm, "mode", "text") == "direct":
        return float(direct(item.context, item.transcript_id))
    summary = arm.summarize(item.transcript, max_sentences, context=item.context, reference=item.reference)
    return reward_score(summary, item.reference, reward_metric)


def _with_context(item: BanditItem, ctx: Context) -> BanditItem:
    return BanditItem(item.transcript_id, ctx, item.transcript, item.reference, item.scores)


def _expected(arms, ctx: Context) -> np.ndarray | None:
    if not all(hasattr(a, "expected_reward") for a in arms):
        return None
    return np.array([a.expected_reward(ctx) for a in arms])


def run_bandit(policy: PolicyState, arms: Sequence, items: Sequence[BanditItem], reward_metric: str = "rougeL",
               on_arm_failure: str = "zero", use_prefilter: bool = True, max_sentences: int = 5,
               progress: Callable[[Round], None] | None = None) -> BanditReport:
    """Run the select/score/update loop over ``items`` in order.

    Rewards are clipped to [0, 1].  An arm that raises is either scored 0
    (``on_arm_failure="zero"``) or aborts the run with :class:`ArmFailure`.
    Regret per round is recorded when every arm exposes ``expected_reward``.
    """
    if not arms:
        raise ValueError("at least one arm is required")
    if on_arm_failure not in ("zero", "abort"):
        raise ValueError(f"on_arm_failure must be 'zero' or 'abort', not {on_arm_failure!r}")
    skipped = 0
    if use_prefilter:
        items, skipped = prefilter(items)
    if not items:
        raise ValueError("no items to run")
    policy.initialize(len(arms), FEATURE_DIM)
    standardizer = ContextStandardizer()
    trajectory = []
    failures = 0
    for t, item in enumerate(items, start=1):
        ctx = with_standardized(item.context, standardizer)
        x = feature_vector(ctx)
        a = policy.choose(x)
        pulled = item if ctx is item.context else _with_context(item, ctx)
        try:
            r = _pull(arms[a], a, pulled, reward_metric, max_sentences)
        except Exception as exc:
            if on_arm_failure == "abort":
                raise ArmFailure(a, item.transcript_id, exc) from exc
            failures += 1
            r = 0.0
        r = min(1.0, max(0.0, r))
        policy.update(x, a, r)
        mu = _expected(arms, ctx)
        step = Round(t, item.transcript_id, a, r, policy.AMS,
                     None if mu is None else float(mu.max() - mu[a]))
        trajectory.append(step)
        if progress is not None:
            progress(step)
    return BanditReport(
        policy=policy.kind.value,
        seed=policy.rng_seed,
        Q=[float(q) for q in policy.Q],
        N_arm=[int(n) for n in policy.N_arm],
        AMS=float(policy.AMS),
        best_arm=policy.best_arm(),
        trajectory=trajectory,
        arm_names=[getattr(a, "name", str(i)) for i, a in enumerate(arms)],
        skipped=skipped,
        failures=failures,
    )


def replay_single_arm(arm_index: int, arms: Sequence, items: Sequence[BanditItem],
                      reward_metric: str = "rougeL", max_sentences: int = 5) -> float:
    """Mean reward of always pulling one arm over ``items``."""
    total = 0.0
    for item in items:
        r = _pull(arms[arm_index], arm_index, item, reward_metric, max_sentences)
        total += min(1.0, max(0.0, r))
    return total / len(items)


def shuffled(items: Sequence[BanditItem], seed: int) -> list[BanditItem]:
    order = np.random.default_rng(seed).permutation(len(items))
    return [items[i] for i in order]


@dataclass
class Comparison:
    reports: list[BanditReport]
    # mean AMS per round across seeds, per policy
    curves: dict[str, list[float]]

    def curve_rows(self) -> list[tuple[str, int, int, int, float, float]]:
        rows = []
        for rep in self.reports:
            for s in rep.trajectory:
                rows.append((rep.policy, rep.seed, s.round, s.arm, s.reward, s.ams))
        return rows

    def best_policy(self) -> str:
        finals = {p: c[-1] for p, c in self.curves.items()}
        return max(finals, key=lambda p: (finals[p], -list(finals).index(p)))


def compare_policies(policies: Sequence[str | PolicyKind | tuple[str, dict]], arm_factory: Callable[[], Sequence],
                     items: Sequence[BanditItem], reward_metric: str = "rougeL", seeds: Sequence[int] = (0,),
                     shuffle: bool = True, **run_kwargs) -> Comparison:
    """Run every policy on every seed.

    For each seed all policies see the same item order (a seeded shuffle
    when ``shuffle``) and a fresh set of arms from ``arm_factory``.
    A policy may be given as ``(kind, params)`` to override parameters.
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    reports = []
    curves: dict[str, list[float]] = {}
    for seed in seeds:
        order = shuffled(items, seed) if shuffle else list(items)
        for spec in policies:
            kind, params = spec if isinstance(spec, tuple) else (spec, {})
            ps = PolicyState(kind, rng_seed=seed, **params)
            rep = run_bandit(ps, arm_factory(), order, reward_metric, **run_kwargs)
            label = _label(kind, params)
            rep.policy = label
            reports.append(rep)
            ams = np.array([s.ams for s in rep.trajectory])
            prev = curves.get(label)
            curves[label] = list(ams if prev is None else np.asarray(prev) + ams)
    for label in curves:
        curves[label] = [float(v) / len(seeds) for v in curves[label]]
    return Comparison(reports, curves)


def _label(kind, params: dict) -> str:
    name = PolicyKind(kind).value
    if not params:
        return name
    return name + "(" + ",".join(f"{k}={params[k]}" for k in sorted(params)) + ")"


def stable_key(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))
