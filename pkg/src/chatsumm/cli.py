"""Command-line interface.

Every subcommand prints a JSON object on success.  Failures print
``{"error": <type>, "message": <text>}`` to stderr and exit nonzero
(2 for usage and configuration errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__, synth
from .arms import RemoteArm
from .bandit import ALL_POLICIES, BanditItem, BanditReport, PolicyState, compare_policies, run_bandit
from .config import RunConfig, SummarizerConfig, config_hash, load_run_config
from .embeddings import MeanWordEncoder, RemoteEncoder, load_word_vectors, save_word_vectors
from .errors import ChatSummError, ConfigError, IoError
from .extractive import CHANNELS, Resources, summarize_batch
from .metrics import aggregate, flatten_scores, score_texts
from .preprocess import Corpus, PreprocessConfig, build_corpus, load_contractions, load_stopwords, \
    prepare_documents
from .punctuation import Mode, RemotePredictor, RulePredictor, restore, strip_punctuation
from .simulate import context_split_specs, dominant_arm_specs, make_arms, random_contexts
from .store import (SummaryTable, emit_report, read_records, record_context, record_scores, summary_record,
                    write_curves, write_json)
from .topics import TopicKind, coherence, fit_lda, fit_lsi, load_model, save_model, select_optimal_model
from .transcript import ChannelKind, RoleMap, load_role_map, load_transcripts, separate_channels, \
    transcript_to_record

logger = logging.getLogger("chatsumm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2))


def _short_hash(*parts) -> str:
    return config_hash(list(parts))


def _file_digest(path: str | Path) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# shared setup


def _run_config(args) -> RunConfig:
    rc = load_run_config(getattr(args, "config", None))
    overrides = {}
    for attr, field_name in (("vectors", "vectors_path"), ("roles", "roles_path"),
                             ("customer_pattern", "customer_pattern"), ("stopwords", "stopwords_path"),
                             ("contractions", "contractions_path"), ("out", "output_dir"),
                             ("workers", "workers"), ("punctuator_endpoint", "punctuator_endpoint"),
                             ("encoder_endpoint", "encoder_endpoint")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[field_name] = value
    rc = dataclasses.replace(rc, **overrides)
    summ = {}
    for attr, field_name in (("topic_model", "topic_model_type"), ("topics", "number_of_topics"),
                             ("dominant", "number_of_dominant_topics"), ("length", "desired_summary_length"),
                             ("table", "summary_table_name"), ("seed", "seed"),
                             ("word_threshold", "word_similarity_threshold"),
                             ("unique_threshold", "uniqueness_threshold"),
                             ("term_method", "term_extraction_method"), ("segment_size", "punct_batch_size")):
        value = getattr(args, attr, None)
        if value is not None:
            summ[field_name] = value
    if summ:
        rc = dataclasses.replace(rc, summarizer=dataclasses.replace(rc.summarizer, **summ))
    rc.validate_paths()
    return rc


def _role_map(rc: RunConfig) -> RoleMap:
    if rc.roles_path:
        rm = load_role_map(rc.roles_path)
        return RoleMap(rm.roles, rc.customer_pattern)
    if rc.customer_pattern:
        return RoleMap({}, rc.customer_pattern)
    raise ConfigError("a role map is required: pass --roles or --customer-pattern")


def _preprocess(rc: RunConfig) -> PreprocessConfig:
    kwargs = dict(rc.preprocess)
    if rc.stopwords_path:
        kwargs["stopwords"] = load_stopwords(rc.stopwords_path)
    if rc.contractions_path:
        kwargs["contractions"] = load_contractions(rc.contractions_path)
    for key in ("extra_stopwords", "allowed_tags"):
        if key in kwargs:
            kwargs[key] = frozenset(kwargs[key])
    try:
        return PreprocessConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad preprocess settings: {exc}") from None


def _predictor(rc: RunConfig):
    return RemotePredictor(rc.punctuator_endpoint) if rc.punctuator_endpoint else RulePredictor()


def _channel_transcripts(transcripts, role_map, channel: str):
    if channel == "full":
        return list(transcripts)
    idx = 0 if channel == "customer" else 1
    return [separate_channels(t, role_map)[idx] for t in transcripts]


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> dict:
    transcripts = load_transcripts(args.input)
    out = {
        "transcripts": len(transcripts),
        "utterances": sum(len(t.utterances) for t in transcripts),
        "words": sum(t.word_count() for t in transcripts),
        "speakers": sorted({s for t in transcripts for s in t.speakers}),
    }
    if args.roles or args.customer_pattern:
        rc = _run_config(args)
        rm = _role_map(rc)
        words = {"customer": 0, "agent": 0}
        for t in transcripts:
            c, a = separate_channels(t, rm)
            words["customer"] += c.word_count()
            words["agent"] += a.word_count()
        out["channel_words"] = words
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for t in transcripts:
                fh.write(json.dumps(transcript_to_record(t), sort_keys=True) + "\n")
        out["written"] = str(path)
    return out


def cmd_synth(args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    transcripts = synth.make_transcripts(args.n, seed=args.seed)
    with open(out / "transcripts.jsonl", "w", encoding="utf-8") as fh:
        for t in transcripts:
            fh.write(json.dumps(transcript_to_record(t), sort_keys=True) + "\n")
    save_word_vectors(synth.make_word_vectors(args.dim, seed=args.seed), out / "vectors.txt")
    with open(out / "roles.txt", "w", encoding="utf-8") as fh:
        for speaker, role in synth.role_map().roles.items():
            fh.write(f"{speaker}={role.value}\n")
    return {"transcripts": str(out / "transcripts.jsonl"), "vectors": str(out / "vectors.txt"),
            "roles": str(out / "roles.txt"), "count": len(transcripts)}


def run_summarize(rc: RunConfig, input_path: str, model_paths: dict[str, str] | None = None) -> dict:
    """Batch summarization with persistence; returns a description of outputs."""
    if not rc.vectors_path:
        raise ConfigError("word vectors are required: pass --vectors")
    cfg = rc.summarizer
    store = load_word_vectors(rc.vectors_path)
    pre = _preprocess(rc)
    predictor = _predictor(rc)
    encoder = RemoteEncoder(rc.encoder_endpoint, fallback=MeanWordEncoder(store)) if rc.encoder_endpoint else None
    models = {ChannelKind(ch): load_model(p) for ch, p in {**rc.model_paths, **(model_paths or {})}.items()}
    res = Resources(store, _role_map(rc), predictor, encoder, pre, models)
    transcripts = load_transcripts(input_path)
    chash = config_hash({
        "summarizer": dataclasses.asdict(cfg),
        "preprocess": pre.fingerprint(),
        "predictor": getattr(predictor, "name", "rule"),
        "encoder": getattr(res.sentence_encoder, "name", ""),
        "vectors": _file_digest(rc.vectors_path),
        "models": sorted((k, _file_digest(v)) for k, v in {**rc.model_paths, **(model_paths or {})}.items()),
    })
    out_dir = Path(rc.output_dir)
    table = SummaryTable(out_dir, cfg.summary_table_name)
    t0 = time.perf_counter()
    batch = summarize_batch(transcripts, cfg, res, workers=rc.workers)
    records = [summary_record(r, chash, cfg.seed) for r in batch.results]
    with batch.timer.step(10):
        table.append(records)
    elapsed = time.perf_counter() - t0
    items = []
    for r in batch.results:
        for ch in CHANNELS:
            s = r.channel(ch).scores
            if s is not None:
                items.append((ch.value, s))
    agg = aggregate(items)
    write_json(out_dir / f"aggregate-{chash}.json", {"config_hash": chash, "seed": cfg.seed, **agg.to_dict()})
    write_json(out_dir / f"timings-{chash}.json", {
        "config_hash": chash, "seed": cfg.seed, "transcripts": len(transcripts),
        "steps": batch.timer.seconds, "total_seconds": elapsed,
    })
    for ch, model in batch.models.items():
        if ch.value not in (model_paths or {}) and ch.value not in rc.model_paths:
            save_model(model, out_dir / f"model-{ch.value}-{chash}.json")
    return {
        "config_hash": chash,
        "table": str(table.path),
        "written": table.written,
        "skipped": table.skipped,
        "seconds": elapsed,
        "steps": batch.timer.seconds,
        "models": {ch.value: {"kind": m.kind.value, "num_topics": m.num_topics} for ch, m in batch.models.items()},
    }


def cmd_summarize(args) -> dict:
    rc = _run_config(args)
    models = {}
    if args.model_customer:
        models["customer"] = args.model_customer
    if args.model_agent:
        models["agent"] = args.model_agent
    return run_summarize(rc, args.input, models)


def _topic_corpus(args, rc: RunConfig):
    transcripts = load_transcripts(args.input)
    rm = _role_map(rc) if args.channel != "full" else None
    chans = _channel_transcripts(transcripts, rm, args.channel)
    docs, _ = prepare_documents(chans, _preprocess(rc))
    return docs


def cmd_topics(args) -> dict:
    rc = _run_config(args)
    cfg = rc.summarizer
    docs = _topic_corpus(args, rc)
    if args.action == "score":
        model = load_model(args.model)
        corpus = Corpus(model.vocabulary, [], [d.transcript_id for d in docs])
        corpus.bows = [corpus.bow_for(d.tokens) for d in docs]
        rep = coherence(model, corpus, cfg.coherence_top_n)
        return {"kind": model.kind.value, "num_topics": model.num_topics, "coherence": rep.score,
                "per_topic": rep.per_topic}
    corpus = build_corpus(docs)
    if args.action == "fit":
        kind = TopicKind(args.kind or cfg.topic_model_type or "lda")
        k = args.k or cfg.number_of_topics
        if kind is TopicKind.LDA:
            model = fit_lda(corpus, k, cfg.lda_alpha, cfg.lda_beta, cfg.lda_iters, cfg.seed)
        else:
            model = fit_lsi(corpus, k, seed=cfg.seed)
        rep = coherence(model, corpus, cfg.coherence_top_n)
    else:
        if args.kind:
            cfg = dataclasses.replace(cfg, topic_model_type=args.kind)
        model, rep = select_optimal_model(corpus, cfg, max_workers=rc.workers)
    out = {"kind": model.kind.value, "num_topics": model.num_topics, "coherence": rep.score,
           "top_words": [model.top_words(k, 10) for k in range(model.num_topics)]}
    if args.out:
        save_model(model, args.out)
        out["model"] = args.out
    return out


def cmd_punctuate(args) -> dict:
    rc = _run_config(args)
    if args.text is not None:
        text = args.text
    else:
        try:
            text = Path(args.input).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"{args.input}: {exc}") from None
    clean = strip_punctuation(text).clean_text
    result = restore(clean, Mode(args.mode), _predictor(rc), rc.summarizer.punct_batch_size)
    return {"text": result.text, "labels": [x.value for x in result.labels], "mode": result.mode.value}


def cmd_evaluate(args) -> dict:
    pairs = []
    try:
        with open(args.input, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                pairs.append((str(rec.get("id", line_no)), rec.get("channel", "full"),
                              rec["candidate"], rec["reference"]))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise IoError(f"{args.input}: {exc}") from None
    scored = [(pid, ch, score_texts(c, r)) for pid, ch, c, r in pairs]
    agg = aggregate((ch, s) for _, ch, s in scored)
    digest = _file_digest(args.input)
    out = Path(args.out)
    write_json(out / f"evaluation-{digest}.json", {"input_digest": digest, **agg.to_dict()})
    path = out / f"evaluation-items-{digest}.csv"
    fields = ("bleu", "rouge1_precision", "rouge1_recall", "rouge1_f1",
              "rougeL_precision", "rougeL_recall", "rougeL_f1")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("id", "channel") + fields)
        for pid, ch, s in scored:
            flat = flatten_scores(s)
            w.writerow([pid, ch] + [f"{flat[f]:.6f}" for f in fields])
    return {"items": len(scored), "report": agg.to_dict(), "csv": str(path)}


def _bandit_source(args, rc: RunConfig):
    """(items, arm factory, description) for the chosen bandit input."""
    if args.scenario:
        items = random_contexts(args.rounds, seed=args.data_seed)
        if args.scenario == "dominant":
            specs = dominant_arm_specs(seed=args.data_seed)
        else:
            specs = context_split_specs(seed=args.data_seed)
        return items, lambda: make_arms(specs), {"scenario": args.scenario, "rounds": args.rounds}
    if args.scores:
        items, names = [], None
        for rec in read_records(args.scores):
            c = rec["context"]
            full = max(c.get("full_length", c["length"]), c["length"]) or 1
            ctx = record_context({"x": {"context": {**c, "full_length": full}}}, "x")
            items.append(BanditItem(str(rec["id"]), ctx, scores=[float(s) for s in rec["scores"]]))
            names = names or rec.get("arms")
        if not items:
            raise ConfigError(f"no score rows in {args.scores}")
        k = len(items[0].scores)
        names = names or [f"arm-{i}" for i in range(k)]
        arms = [_Named(i, n) for i, n in enumerate(names)]
        return items, lambda: arms, {"scores": args.scores}
    if args.summaries and args.input and args.arm:
        records = {r["id"]: r for r in read_records(args.summaries)}
        rm = _role_map(rc)
        channel = args.channel
        items = []
        for t in load_transcripts(args.input):
            rec = records.get(t.id)
            if rec is None or not rec[channel]["sentences"]:
                continue
            ct = _channel_transcripts([t], rm, channel)[0]
            items.append(BanditItem(t.id, record_context(rec, channel), ct, " ".join(rec[channel]["sentences"])))
        arms = []
        for i, spec in enumerate(args.arm):
            name, sep, url = spec.partition("=")
            if not sep:
                raise ConfigError(f"--arm expects name=url, got {spec!r}")
            arms.append(RemoteArm(i, url, name=name))
        return items, lambda: arms, {"summaries": args.summaries, "arms": [a.name for a in arms]}
    raise ConfigError("choose an input: --scenario, --scores, or --summaries with --in and --arm")


@dataclasses.dataclass
class _Named:
    """Placeholder arm for score-matrix replay; rewards come from the matrix."""

    id: int
    name: str

    def summarize(self, transcript, max_sentences, **kwargs):  # pragma: no cover - never called
        raise ChatSummError("score-matrix arms cannot summarize")


def cmd_bandit(args) -> dict:
    rc = _run_config(args)
    bs = rc.bandit
    metric = args.reward_metric or bs.reward_metric
    items, arm_factory, source = _bandit_source(args, rc)
    out = Path(rc.output_dir)
    on_fail = args.on_arm_failure or bs.on_arm_failure
    run_kwargs = {"on_arm_failure": on_fail, "max_sentences": rc.summarizer.desired_summary_length}
    if args.action == "run":
        policy = args.policy or bs.policies[0]
        seed = args.seed if args.seed is not None else bs.seeds[0]
        tag = _short_hash(source, policy, seed, metric)
        rep = run_bandit(PolicyState(policy, rng_seed=seed), arm_factory(), items, metric, **run_kwargs)
        path = write_json(out / f"bandit-{rep.policy}-seed{seed}-{tag}.json", rep.to_dict())
        write_curves(out / f"curves-{tag}.csv",
                     [(rep.policy, seed, s.round, s.arm, s.reward, s.ams) for s in rep.trajectory])
        return {"policy": rep.policy, "seed": seed, "AMS": rep.AMS, "best_arm": rep.best_arm,
                "N_arm": rep.N_arm, "report": str(path)}
    policies = args.policies or [p.value for p in ALL_POLICIES]
    seeds = args.seeds or list(bs.seeds)
    tag = _short_hash(source, policies, seeds, metric)
    comp = compare_policies(policies, arm_factory, items, metric, seeds, **run_kwargs)
    files = []
    for rep in comp.reports:
        files.append(str(write_json(out / f"bandit-{rep.policy}-seed{rep.seed}-{tag}.json", rep.to_dict())))
    curves = write_curves(out / f"curves-{tag}.csv", comp.curve_rows())
    emit_report(None, comp.reports, out, tag)
    finals = {p: c[-1] for p, c in comp.curves.items()}
    return {"reports": files, "curves": str(curves), "final_ams": finals, "best_policy": comp.best_policy()}


def cmd_report(args) -> dict:
    aggregates = {}
    for path in args.summaries or []:
        recs = read_records(path)
        by_hash: dict[str, list] = {}
        for r in recs:
            by_hash.setdefault(r["config_hash"], []).append(r)
        for h, group in by_hash.items():
            items = [(ch, s) for r in group for ch in ("customer", "agent")
                     if (s := record_scores(r, ch)) is not None]
            timing = Path(path).parent / f"timings-{h}.json"
            seconds = json.loads(timing.read_text())["total_seconds"] if timing.exists() else None
            aggregates[f"extractive-{h}"] = (aggregate(items), seconds)
    reports = []
    for path in args.bandit_reports or []:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        reports.append(BanditReport(d["policy"], d["seed"], d["Q"], d["N_arm"], d["AMS"], d["best_arm"],
                                    arm_names=d.get("arms", [])))
    paths = emit_report(aggregates, reports, args.out, args.tag or "")
    return {"files": [str(p) for p in paths]}


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--roles", help="speaker role file (speaker_id=customer|agent per line)")
    p.add_argument("--customer-pattern", help="regex for customer speaker ids")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chatsumm", description="Chat transcript summarization toolkit.")
    parser.add_argument("--version", action="version", version=f"chatsumm {__version__}")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate a transcript JSONL file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", help="write normalized JSONL here")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="write a synthetic corpus, vectors and role file")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("summarize", help="extractive summaries for a transcript corpus")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", help="output directory")
    p.add_argument("--vectors")
    p.add_argument("--stopwords")
    p.add_argument("--contractions")
    p.add_argument("--model-customer")
    p.add_argument("--model-agent")
    p.add_argument("--topic-model", choices=["lda", "lsi"])
    p.add_argument("--topics", type=int)
    p.add_argument("--dominant", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--table")
    p.add_argument("--word-threshold", type=float)
    p.add_argument("--unique-threshold", type=float)
    p.add_argument("--term-method", choices=["global", "local"])
    p.add_argument("--segment-size", type=int)
    p.add_argument("--punctuator-endpoint")
    p.add_argument("--encoder-endpoint")
    _add_common(p)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("topics", help="fit, select or score topic models")
    p.add_argument("action", choices=["fit", "select", "score"])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--channel", choices=["customer", "agent", "full"], default="customer")
    p.add_argument("--kind", choices=["lda", "lsi"])
    p.add_argument("--k", type=int)
    p.add_argument("--topics", type=int)
    p.add_argument("--model", help="model file to score")
    p.add_argument("--out", help="save the model here")
    _add_common(p)
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("punctuate", help="restore punctuation")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--in", dest="input")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="full")
    p.add_argument("--segment-size", type=int)
    p.add_argument("--punctuator-endpoint")
    p.add_argument("--config")
    p.set_defaults(func=cmd_punctuate)

    p = sub.add_parser("evaluate", help="score candidate/reference pairs")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bandit", help="run or compare bandit policies")
    p.add_argument("action", choices=["run", "compare"])
    p.add_argument("--policy", choices=[k.value for k in ALL_POLICIES])
    p.add_argument("--policies", nargs="+", choices=[k.value for k in ALL_POLICIES])
    p.add_argument("--seeds", nargs="+", type=int)
    p.add_argument("--reward-metric", choices=["bleu", "rouge1", "rougeL"])
    p.add_argument("--on-arm-failure", choices=["zero", "abort"])
    p.add_argument("--scenario", choices=["dominant", "context-split"])
    p.add_argument("--rounds", type=int, default=5000)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--scores", help="JSONL rows {id, context, scores[, arms]}")
    p.add_argument("--summaries", help="summary table produced by summarize")
    p.add_argument("--in", dest="input", help="transcripts matching the summary table")
    p.add_argument("--arm", action="append", help="remote arm as name=url (repeatable)")
    p.add_argument("--channel", choices=["customer", "agent"], default="customer")
    p.add_argument("--out", help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_bandit)

    p = sub.add_parser("report", help="emit CSV comparison tables")
    p.add_argument("--summaries", nargs="*")
    p.add_argument("--bandit-reports", nargs="*")
    p.add_argument("--out", required=True)
    p.add_argument("--tag")
    p.set_defaults(func=cmd_report)
    return parser


def _fail(exc: BaseException, code: int) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        return _fail(exc, 2)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _emit(args.func(args))
    except ConfigError as exc:
        return _fail(exc, 2)
    except ChatSummError as exc:
        return _fail(exc, 1)
    except OSError as exc:
        return _fail(IoError(str(exc)), 1)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
