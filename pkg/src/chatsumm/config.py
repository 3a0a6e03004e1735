"""Summarizer parameters and run configuration."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError

ENV_PREFIX = "CHATSUMM_"


@dataclass(frozen=True)
class SummarizerConfig:
    # the nine procedure parameters
    topic_model_type: str | None = None  # "lda" | "lsi" | None (search both)
    number_of_topics: int = 5
    number_of_dominant_topics: int = 1
    punct_batch_size: int = 512
    term_extraction_method: str = "global"  # "global" | "local"
    desired_summary_length: int = 5
    summary_table_name: str = "summary_results"
    word_similarity_threshold: float = 0.5
    uniqueness_threshold: float = 0.5
    # engine knobs
    topic_grid_max: int = 50
    topic_grid_step: int = 5
    lda_alpha: float = 0.1
    lda_beta: float = 0.01
    lda_iters: int = 200
    coherence_top_n: int = 10
    keywords_per_topic: int = 10
    seed: int = 0
    rouge_variant: str = "rougeL"  # "rouge1" | "rougeL"
    # pass sentence ends as boundary hints when restoring full punctuation
    summary_boundary_hints: bool = True

    def __post_init__(self):
        if self.desired_summary_length < 1:
            raise ConfigError("desired_summary_length must be >= 1")
        if not 0.0 <= self.word_similarity_threshold <= 1.0:
            raise ConfigError("word_similarity_threshold must lie in [0, 1]")
        if not 0.0 <= self.uniqueness_threshold <= 1.0:
            raise ConfigError("uniqueness_threshold must lie in [0, 1]")
        if self.number_of_topics < 1 or self.number_of_dominant_topics < 1:
            raise ConfigError("topic counts must be >= 1")
        if self.topic_model_type not in (None, "lda", "lsi"):
            raise ConfigError(f"unknown topic_model_type {self.topic_model_type!r}")
        if self.term_extraction_method not in ("global", "local"):
            raise ConfigError(f"unknown term_extraction_method {self.term_extraction_method!r}")
        if self.rouge_variant not in ("rouge1", "rougeL"):
            raise ConfigError(f"unknown rouge_variant {self.rouge_variant!r}")


@dataclass(frozen=True)
class BanditSettings:
    policies: tuple[str, ...] = ("LogisticUCB",)
    reward_metric: str = "rougeL"
    seeds: tuple[int, ...] = (0,)
    on_arm_failure: str = "zero"  # "zero" | "abort"
    channel: str = "customer"


@dataclass
class RunConfig:
    summarizer: SummarizerConfig = field(default_factory=SummarizerConfig)
    preprocess: dict[str, Any] = field(default_factory=dict)
    bandit: BanditSettings = field(default_factory=BanditSettings)
    vectors_path: str | None = None
    stopwords_path: str | None = None
    contractions_path: str | None = None
    roles_path: str | None = None
    # regex for customer speaker ids not listed in the role file
    customer_pattern: str | None = None
    model_paths: dict[str, str] = field(default_factory=dict)
    punctuator_endpoint: str | None = None
    encoder_endpoint: str | None = None
    arm_endpoints: dict[str, str] = field(default_factory=dict)
    output_dir: str = "out"
    workers: int = 1

    def validate_paths(self) -> None:
        paths = [self.vectors_path, self.stopwords_path, self.contractions_path, self.roles_path,
                 *self.model_paths.values()]
        for p in paths:
            if p is not None and not Path(p).exists():
                raise ConfigError(f"path does not exist: {p}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def config_hash(obj: Any) -> str:
    """Short stable hash of a JSON-serializable (or dataclass) configuration."""
    if dataclasses.is_dataclass(obj):
        obj = dataclasses.asdict(obj)
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _json_default(o):
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _coerce(value: str, current: Any):
    if isinstance(current, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    if isinstance(current, tuple):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if current is None and value.lower() in ("", "none", "null"):
        return None
    return value


def _build_section(cls, data: dict, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")
    kwargs = dict(data)
    for f in dataclasses.fields(cls):
        if f.name in kwargs and isinstance(kwargs[f.name], list):
            kwargs[f.name] = tuple(kwargs[f.name])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_run_config(path: str | Path | None = None, env: dict[str, str] | None = None) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus ``CHATSUMM_`` overrides.

    Environment keys use ``CHATSUMM_<FIELD>`` for top-level fields and
    ``CHATSUMM_<SECTION>__<FIELD>`` for the summarizer and bandit sections.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
    env = os.environ if env is None else env
    summ = dict(data.pop("summarizer", {}) or {})
    bandit = dict(data.pop("bandit", {}) or {})
    top_names = {f.name for f in dataclasses.fields(RunConfig)} - {"summarizer", "bandit"}
    unknown = set(data) - top_names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    defaults = RunConfig()
    for key, value in sorted(env.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower()
        section, sep, field_name = name.partition("__")
        if sep:
            target, proto = {"summarizer": (summ, defaults.summarizer),
                             "bandit": (bandit, defaults.bandit)}.get(section, (None, None))
            if target is None or not hasattr(proto, field_name):
                raise ConfigError(f"unknown environment override {key}")
            target[field_name] = _coerce(value, getattr(proto, field_name))
        elif name in top_names and not isinstance(getattr(defaults, name), dict):
            data[name] = _coerce(value, getattr(defaults, name))
        else:
            raise ConfigError(f"unknown environment override {key}")

    return RunConfig(
        summarizer=_build_section(SummarizerConfig, summ, "summarizer"),
        bandit=_build_section(BanditSettings, bandit, "bandit"),
        **data,
    )
