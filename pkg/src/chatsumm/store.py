"""Summary records, the append-only JSONL table, and CSV report emission."""

from __future__ import annotations

import csv
import json
import threading
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from .bandit import BanditReport, Context
from .errors import IoError
from .extractive import ChannelResult, ExtractiveResult
from .metrics import AggregateReport, MetricScores

SCHEMA_VERSION = 1
TIMESTAMP_FIELDS = ("created_at",)


def _channel_record(ch: ChannelResult, full_words: int) -> dict:
    s = ch.summary
    dom = ch.dominant.entries if ch.dominant is not None else []
    return {
        "sentences": [x.text for x in s.sentences],
        "sentence_indices": [x.index for x in s.sentences],
        "term_string": s.term_string,
        "punctuated_text": s.punctuated_text,
        "scores": None if ch.scores is None else ch.scores.to_dict(),
        "context": {
            "length": ch.word_count,
            "full_length": full_words,
            "dominant_topic_id": dom[0].topic_id if dom else None,
            "dominant_topic_contribution": dom[0].weight if dom else 0.0,
            "num_dominant_keywords": len(ch.dominant.keywords) if dom else 0,
            "num_document_words": len(ch.document.tokens) if ch.document is not None else 0,
        },
    }


def summary_record(result: ExtractiveResult, cfg_hash: str, seed: int, timestamp: bool = True) -> dict:
    rec = {
        "schema_version": SCHEMA_VERSION,
        "id": result.transcript_id,
        "config_hash": cfg_hash,
        "seed": seed,
        "customer": _channel_record(result.customer, result.full_word_count),
        "agent": _channel_record(result.agent, result.full_word_count),
    }
    if timestamp:
        rec["created_at"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return rec


def record_context(rec: dict, channel: str) -> Context:
    c = rec[channel]["context"]
    full = max(c["full_length"], c["length"])
    return Context(
        length=c["length"],
        length_fraction=c["length"] / full if full else 0.0,
        dominant_topic_id=c["dominant_topic_id"],
        dominant_topic_contribution=c["dominant_topic_contribution"],
        num_dominant_keywords=c["num_dominant_keywords"],
        num_document_words=c["num_document_words"],
    )


def record_scores(rec: dict, channel: str) -> MetricScores | None:
    s = rec[channel]["scores"]
    return None if s is None else MetricScores.from_dict(s)


def strip_timestamps(rec: dict) -> dict:
    return {k: v for k, v in rec.items() if k not in TIMESTAMP_FIELDS}


def dumps(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def table_path(out_dir: str | Path, table_name: str) -> Path:
    return Path(out_dir) / f"{table_name}.jsonl"


def read_records(path: str | Path) -> list[dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]
    except FileNotFoundError:
        return []
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(f"{path}: {exc}") from None


@dataclass
class PersistResult:
    path: Path
    written: int
    skipped: int


class SummaryTable:
    """Append-only JSONL table with (id, config_hash) de-duplication.

    All writes go through one lock, so worker threads can share an instance.
    """

    def __init__(self, out_dir: str | Path, table_name: str = "summary_results", dedup: bool = True):
        self.path = table_path(out_dir, table_name)
        self.dedup = dedup
        self._lock = threading.Lock()
        self._seen = {(r.get("id"), r.get("config_hash")) for r in read_records(self.path)}
        self.written = 0
        self.skipped = 0

    def append(self, records: Iterable[dict]) -> None:
        with self._lock:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    for rec in records:
                        key = (rec["id"], rec["config_hash"])
                        if self.dedup and key in self._seen:
                            self.skipped += 1
                            continue
                        self._seen.add(key)
                        fh.write(dumps(rec) + "\n")
                        self.written += 1
            except OSError as exc:
                raise IoError(f"{self.path}: {exc}") from None


def persist_summaries(records: Sequence[dict], out_dir: str | Path, table_name: str = "summary_results",
                      dedup: bool = True) -> PersistResult:
    table = SummaryTable(out_dir, table_name, dedup)
    table.append(records)
    return PersistResult(table.path, table.written, table.skipped)


# ---------------------------------------------------------------------------
# reports

REPORT_CHANNELS = ("customer", "agent")
REPORT_METRICS = ("count", "bleu", "rouge1_f1", "rougeL_f1", "punct_accuracy")
SUMMARY_REPORT_HEADER = ("summarizer",) + tuple(f"{c}_{m}" for c in REPORT_CHANNELS for m in REPORT_METRICS) \
    + ("total_time_s",)
BANDIT_REPORT_HEADER = ("policy", "seed", "rounds", "ams", "best_arm", "components")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def components(report: BanditReport) -> str:
    """Pull counts per arm, e.g. ``(T5: 20 + PEGASUS: 4120)``."""
    names = report.arm_names or [str(i) for i in range(len(report.N_arm))]
    return "(" + " + ".join(f"{n}: {c}" for n, c in zip(names, report.N_arm)) + ")"


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from None
    return path


def emit_report(aggregates: dict[str, tuple[AggregateReport, float | None]] | None,
                bandit_reports: Sequence[BanditReport] | None, out_dir: str | Path,
                tag: str = "") -> list[Path]:
    """Write ``summary_report*.csv`` and ``bandit_report*.csv``.

    ``aggregates`` maps a summarizer name to its aggregate report and total
    wall-clock seconds; each becomes one row with per-channel columns.  The bandit table has one row per report; its last
    row lists the per-arm pull counts of the highest-AMS report.
    """
    out = Path(out_dir)
    suffix = f"-{tag}" if tag else ""
    rows = []
    for name, (agg, seconds) in (aggregates or {}).items():
        row: list = [name]
        for channel in REPORT_CHANNELS:
            ch = agg.channels.get(channel)
            if ch is None:
                row += [0, None, None, None, None]
            else:
                row += [ch.count, ch.means["bleu"], ch.means["rouge1_f1"], ch.means["rougeL_f1"], ch.punct_accuracy]
        rows.append(row + [seconds])
    paths = [_write_csv(out / f"summary_report{suffix}.csv", SUMMARY_REPORT_HEADER, rows)]
    reports = list(bandit_reports or [])
    brows: list[tuple] = [(r.policy, r.seed, r.N, r.AMS, r.best_arm, "") for r in reports]
    if reports:
        best = max(reports, key=lambda r: r.AMS)
        brows.append(("components", best.seed, best.N, best.AMS, best.best_arm, components(best)))
    paths.append(_write_csv(out / f"bandit_report{suffix}.csv", BANDIT_REPORT_HEADER, brows))
    return paths


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from None
    return path


def write_curves(path: str | Path, rows: Iterable[Sequence]) -> Path:
    return _write_csv(Path(path), ("policy", "seed", "round", "arm", "reward", "ams"), rows)
