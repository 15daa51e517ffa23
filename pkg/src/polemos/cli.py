"""Command-line pipeline orchestrator with MATTER+PD stage gating.

    polemos ingest|clean|sample|annotate-serve|train|predict|report|status
            [--config PATH] [--seed N] [--force] ...

Exit codes: 0 success, 2 stage error, 3 gate failure, 4 remote/API failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .annotation import (
    AnnotationSession,
    QuotaTarget,
    StageState,
    export_training_set,
    sample_for_annotation,
)
from .classifier import (
    collapse_messages,
    detect_class_collapse,
    evaluate,
    load_model,
    predict_corpus,
    read_predictions,
    save_model,
    split_dataset,
    train,
)
from .config import ConfigError, PipelineConfig, load_config
from .corpus import CorpusStore, clean_corpus, corpus_stats, read_video_list, write_video_list
from .errors import (
    ApiError,
    GateFailure,
    PolemosError,
    ProtocolError,
    QuotaExceeded,
    RemoteFailure,
    RemoteTimeout,
    StageError,
    TransientFailure,
)
from .ingest import YouTubeClient, ingest
from .labels import label_for

logger = logging.getLogger("polemos")

EXIT_OK = 0
EXIT_STAGE = 2
EXIT_GATE = 3
EXIT_REMOTE = 4


class WorkdirLock:
    """One pipeline instance per working directory."""

    def __init__(self, path: Path):
        self.path = path
        self._fd: int | None = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StageError(
                f"another pipeline instance holds {self.path}; remove the file if stale"
            )
        os.write(self._fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        if self._fd is not None:
            os.close(self._fd)
        self.path.unlink(missing_ok=True)
        return False


def _state(config: PipelineConfig) -> StageState:
    return StageState.load(config.path("state"))


def _require(config: PipelineConfig, key: str, prior: str) -> Path:
    path = config.path(key)
    if not path.exists():
        raise StageError(f"missing {path.name} ({path}); run `polemos {prior}` first")
    return path


def _advance_if(state: StageState, config: PipelineConfig, expected: str, to: str, note: str) -> None:
    if state.current == expected:
        state.advance(to, note=note)
        state.save(config.path("state"))


# ---------------------------------------------------------------------------
# Subcommands


def cmd_ingest(config: PipelineConfig, args) -> int:
    if not config.queries:
        raise StageError("config declares no search queries")
    state = _state(config)
    if state.current not in ("MODEL", "PROCURE") and not args.force:
        raise StageError(f"ingest expects stage MODEL or PROCURE, found {state.current}")
    client = YouTubeClient(
        base_url=config.api.base_url,
        retries=config.api.retries,
        backoff_base=config.api.backoff_base,
        timeout=config.api.timeout,
    )
    store = CorpusStore(config.path("raw"))
    allowlist = None
    if config.api.video_allowlist:
        allow_path = Path(config.api.video_allowlist)
        if not allow_path.is_absolute():
            allow_path = config.base_dir / allow_path
        allowlist = {
            line.strip()
            for line in allow_path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        }
    videos_out: list = []
    report = ingest(
        config.queries,
        client,
        store,
        config.quota,
        videos_out=videos_out,
        concurrency=config.api.concurrency,
        allowlist=allowlist,
    )
    write_video_list(config.path("videos"), videos_out)
    if report.videos_found == 0 and report.errors:
        raise TransientFailure(f"ingest produced nothing: {report.errors[:3]}")
    _advance_if(state, config, "MODEL", "PROCURE", "comments ingested")
    print(json.dumps(report.to_dict(), ensure_ascii=False, indent=2))
    return EXIT_OK


def cmd_clean(config: PipelineConfig, args) -> int:
    _require(config, "raw", "ingest")
    state = _state(config)
    if state.current == "MODEL" and not args.force:
        raise StageError("clean expects stage PROCURE; run `polemos ingest` first")
    raw = CorpusStore(config.path("raw"))
    clean = CorpusStore(config.path("clean"))
    report = clean_corpus(raw, config.window, clean)
    payload = report.to_dict()
    payload["rules"] = {
        "window_start": config.window.start.isoformat(),
        "window_end_exclusive": config.window.end.isoformat(),
        "non_referential": "fewer than 2 alphabetic code points after stripping pictographs",
        "duplicate_key": ["video_id", "author", "text", "published_at"],
    }
    config.path("clean_report").parent.mkdir(parents=True, exist_ok=True)
    config.path("clean_report").write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    print(json.dumps(payload, ensure_ascii=False, indent=2))
    return EXIT_OK


def cmd_sample(config: PipelineConfig, args) -> int:
    _require(config, "clean", "clean")
    state = _state(config)
    if state.current == "MODEL" and not args.force:
        raise StageError("sample expects stage PROCURE; run `polemos ingest` and `polemos clean` first")
    store = CorpusStore(config.path("clean"))
    n = args.n if args.n is not None else config.annotation.sample_size
    seed = args.seed if args.seed is not None else config.annotation.sample_seed
    ids = sample_for_annotation(
        store, n, seed, max_per_video_fraction=config.annotation.max_per_video_fraction
    )
    sample_path = config.path("sample")
    sample_path.parent.mkdir(parents=True, exist_ok=True)
    sample_path.write_text(
        json.dumps({"seed": seed, "n": n, "ids": ids}, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    print(f"sampled {n} comments (seed {seed}) -> {sample_path}")
    return EXIT_OK


def _open_session(config: PipelineConfig) -> AnnotationSession:
    sample = json.loads(config.path("sample").read_text(encoding="utf-8"))
    state = _state(config)
    return AnnotationSession(
        store=CorpusStore(config.path("clean")),
        sample_ids=sample["ids"],
        annotations_path=config.path("annotations"),
        quota=QuotaTarget(config.annotation.per_label_target),
        lease_seconds=config.annotation.lease_seconds,
        stage=state.current,
    )


def cmd_annotate_serve(config: PipelineConfig, args) -> int:
    _require(config, "sample", "sample")
    state = _state(config)
    if state.current in ("PROCURE", "REVISE"):
        state.advance("ANNOTATE", note="annotation session opened")
        state.save(config.path("state"))
    elif state.current != "ANNOTATE" and not args.force:
        raise StageError(f"annotate-serve expects stage PROCURE/REVISE/ANNOTATE, found {state.current}")

    session = _open_session(config)
    oracle_path = args.oracle or config.annotation.oracle
    if oracle_path:
        oracle = Path(oracle_path)
        if not oracle.is_absolute():
            oracle = config.base_dir / oracle
        return _annotate_from_oracle(config, session, oracle)

    from .service import AnnotationServer, AnnotationService

    videos = {v.video_id: v for v in read_video_list(config.path("videos"))}
    service = AnnotationService(
        session,
        videos=videos,
        export_path=config.path("training_set"),
    )
    server = AnnotationServer(service, host=args.host, port=args.port)
    print(f"annotation service at {server.url} (Ctrl-C stops and exports)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        report = export_training_set(session, config.path("training_set"))
        print(json.dumps(report.to_dict(), ensure_ascii=False, indent=2))
    return EXIT_OK


def _annotate_from_oracle(config: PipelineConfig, session: AnnotationSession, oracle_path: Path) -> int:
    """Headless labeling from a ground-truth file, honoring per-label quotas.

    This is the no-manual-edits path for synthetic fixtures and tests; real
    runs use the web UI against the live service instead.
    """
    from .synth import load_truth

    if not oracle_path.exists():
        raise StageError(f"oracle file not found: {oracle_path}")
    truth = load_truth(oracle_path)
    progress = session.progress()
    target = session.quota.per_label_target
    if not progress.all_met():
        labeled = 0
        for cid in session.sample_ids:
            if progress.all_met():
                break
            code = truth.get(cid)
            if code is None or progress.per_label.get(code, 0) >= target:
                continue
            progress = session.record_label(cid, code, annotator="oracle")
            labeled += 1
        print(f"oracle labeled {labeled} comments")
    report = export_training_set(session, config.path("training_set"))
    print(json.dumps(report.to_dict(), ensure_ascii=False, indent=2))
    if report.undersupplied:
        names = ", ".join(label_for(c).name for c in report.undersupplied)
        print(f"warning: undersupplied labels: {names}")
    return EXIT_OK


def cmd_train(config: PipelineConfig, args) -> int:
    _require(config, "training_set", "annotate-serve")
    state = _state(config)
    if state.current in ("MODEL", "PROCURE") and not args.force:
        raise StageError(f"train expects stage ANNOTATE or later, found {state.current}")
    if state.current == "REVISE":
        logger.warning("training from REVISE: the loop expects another annotation pass")

    from .annotation import load_training_set

    dataset = load_training_set(config.path("training_set"))
    if not dataset:
        raise StageError("training set is empty; annotate first")

    train_cfg = config.train
    if args.seed is not None:
        train_cfg = type(train_cfg)(
            epochs=train_cfg.epochs,
            learning_rate=train_cfg.learning_rate,
            l2=train_cfg.l2,
            seed=args.seed,
            holdout_fraction=train_cfg.holdout_fraction,
        )

    _advance_if(state, config, "ANNOTATE", "TRAIN_TEST", "training started")
    model = train(dataset, train_cfg)
    save_model(model, config.path("model"))

    _, holdout = split_dataset(dataset, train_cfg.seed, train_cfg.holdout_fraction)
    metrics = evaluate(model, holdout) if holdout else evaluate(model, dataset)
    gate = config.accuracy_gate
    gate_passed = metrics.accuracy >= gate

    payload = {
        "holdout": metrics.to_dict(),
        "holdout_size": len(holdout),
        "train_size": len(dataset) - len(holdout),
        "final_train_accuracy": model.train_history[-1][1],
        "final_train_loss": model.train_history[-1][0],
        "accuracy_gate": float(gate),
        "gate_passed": gate_passed,
        "epochs": train_cfg.epochs,
        "seed": train_cfg.seed,
    }
    config.path("metrics").parent.mkdir(parents=True, exist_ok=True)
    config.path("metrics").write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )

    state = _state(config)
    _advance_if(state, config, "TRAIN_TEST", "EVALUATE", "holdout evaluated")

    print(f"holdout accuracy {float(metrics.accuracy):.4f} over {len(holdout)} examples")
    for code in range(7):
        print(
            f"  {code} {label_for(code).name:<15} precision {float(metrics.precision[code]):.3f}"
            f" recall {float(metrics.recall[code]):.3f} f1 {float(metrics.f1[code]):.3f}"
        )
    if not gate_passed:
        state = _state(config)
        _advance_if(state, config, "EVALUATE", "REVISE", "accuracy gate failed")
        raise GateFailure(
            f"holdout accuracy {float(metrics.accuracy):.4f} below gate {float(gate):.2f}; "
            "model not promoted to prediction"
        )
    print(f"gate {float(gate):.2f} passed; model promoted")
    return EXIT_OK


def cmd_predict(config: PipelineConfig, args) -> int:
    _require(config, "model", "train")
    _require(config, "clean", "clean")
    state = _state(config)
    metrics_path = config.path("metrics")
    if metrics_path.exists():
        metrics = json.loads(metrics_path.read_text(encoding="utf-8"))
        if not metrics.get("gate_passed", False) and not args.force:
            raise GateFailure(
                f"gate failed at training time (accuracy {metrics['holdout']['accuracy']:.4f} "
                f"< {metrics['accuracy_gate']:.2f}); rerun train or use --force"
            )
    if state.current not in ("EVALUATE", "DISTRIBUTE") and not args.force:
        raise StageError(f"predict expects stage EVALUATE, found {state.current}; run `polemos train` first")

    store = CorpusStore(config.path("clean"))
    model = load_model(config.path("model"))

    if config.remote.endpoint:
        summary = _predict_corpus_remote(config, store)
    else:
        summary = predict_corpus(model, store, config.path("predictions"))

    collapsed = detect_class_collapse(
        summary["predicted_counts"], trained_codes=model.trained_codes
    )
    summary_payload = {
        "rows": summary["rows"],
        "predicted_counts": {str(k): v for k, v in sorted(summary["predicted_counts"].items())},
        "class_collapse": {"codes": collapsed, "warnings": collapse_messages(collapsed)},
        "engine": "remote" if config.remote.endpoint else "local",
    }
    config.path("prediction_summary").parent.mkdir(parents=True, exist_ok=True)
    config.path("prediction_summary").write_text(
        json.dumps(summary_payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    _advance_if(state, config, "EVALUATE", "DISTRIBUTE", "corpus classified")
    print(json.dumps(summary_payload, ensure_ascii=False, indent=2))
    for message in collapse_messages(collapsed):
        print(f"warning: {message}")
    return EXIT_OK


def _predict_corpus_remote(config: PipelineConfig, store: CorpusStore) -> dict:
    import csv

    from .remote import RemoteClassifier

    client = RemoteClassifier(
        config.remote.endpoint,
        batch_size=config.remote.batch_size,
        timeout=config.remote.timeout,
    )
    comments = store.load_all()
    results = client.predict_texts([c.text for c in comments])
    out_path = config.path("predictions")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    counts = {code: 0 for code in range(7)}
    tmp = out_path.with_suffix(out_path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["comment_id", "code", "confidence"])
        for comment, (code, probs) in zip(comments, results):
            writer.writerow([comment.comment_id, code, repr(float(probs[code]))])
            counts[code] += 1
    os.replace(tmp, out_path)
    return {"rows": len(comments), "predicted_counts": counts}


def cmd_report(config: PipelineConfig, args) -> int:
    _require(config, "predictions", "predict")
    _require(config, "clean", "clean")
    state = _state(config)
    if state.current != "DISTRIBUTE" and not args.force:
        raise StageError(f"report expects stage DISTRIBUTE, found {state.current}; run `polemos predict` first")

    from .analysis import build_report

    store = CorpusStore(config.path("clean"))
    predictions = read_predictions(config.path("predictions"))
    trained_codes = None
    if config.path("model").exists():
        trained_codes = load_model(config.path("model")).trained_codes
    bundle = build_report(
        store,
        predictions,
        config.path("reports"),
        anchor=config.window.start,
        window_end=config.window.end,
        trained_codes=trained_codes,
    )
    print(f"report bundle at {bundle.directory}:")
    for name in bundle.files:
        print(f"  {name}")
    return EXIT_OK


def cmd_status(config: PipelineConfig, args) -> int:
    state = _state(config)
    clean = CorpusStore(config.path("clean"))
    raw = CorpusStore(config.path("raw"))
    stats = corpus_stats(clean if clean.exists() else raw)
    payload = {
        "stage": state.current,
        "history": [e.to_dict() for e in state.history],
        "corpus": stats.to_dict(),
        "artifacts": {
            key: config.path(key).exists()
            for key in ("raw", "clean", "sample", "training_set", "model", "predictions")
        },
    }
    print(json.dumps(payload, ensure_ascii=False, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polemos", description=__doc__)
    parser.add_argument("--version", action="version", version=f"polemos {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default="polemos.json", help="pipeline config file")
        p.add_argument("--force", action="store_true", help="override stage gating (logged)")
        p.add_argument("--seed", type=int, default=None, help="override the relevant seed")
        return p

    common(sub.add_parser("ingest", help="search videos and collect comments"))
    common(sub.add_parser("clean", help="filter the raw corpus into the clean dataset"))
    p = common(sub.add_parser("sample", help="draw the annotation sample"))
    p.add_argument("--n", type=int, default=None, help="sample size")
    p = common(sub.add_parser("annotate-serve", help="serve the annotation UI and API"))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.add_argument("--oracle", default=None, help="label from a truth file instead of serving")
    common(sub.add_parser("train", help="train the stance classifier and gate it"))
    common(sub.add_parser("predict", help="classify the cleaned corpus"))
    common(sub.add_parser("report", help="build the report bundle"))
    common(sub.add_parser("status", help="show stage and corpus stats"))
    return parser


COMMANDS = {
    "ingest": (cmd_ingest, True),
    "clean": (cmd_clean, True),
    "sample": (cmd_sample, True),
    "annotate-serve": (cmd_annotate_serve, True),
    "train": (cmd_train, True),
    "predict": (cmd_predict, True),
    "report": (cmd_report, True),
    "status": (cmd_status, False),
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("POLEMOS_LOG", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    handler, needs_lock = COMMANDS[args.command]
    try:
        config_path = Path(args.config)
        if not config_path.exists() and args.command == "status":
            from .config import DEFAULT_PATHS
            from .classifier import TrainConfig
            from .config import AnnotationConfig, ApiConfig, PipelineConfig, RemoteConfig
            from .corpus import DEFAULT_WINDOW
            from .ingest import QuotaBudget

            config = PipelineConfig(
                base_dir=Path.cwd(),
                window=DEFAULT_WINDOW,
                queries=[],
                quota=QuotaBudget(),
                annotation=AnnotationConfig(),
                train=TrainConfig(),
                api=ApiConfig(),
                remote=RemoteConfig(),
                paths=dict(DEFAULT_PATHS),
            )
        else:
            config = load_config(config_path)
        if args.force:
            logger.warning("--force: stage gating overridden")
        if needs_lock:
            with WorkdirLock(config.path("lock")):
                return handler(config, args)
        return handler(config, args)
    except (StageError, ConfigError) as exc:
        print(f"stage error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except GateFailure as exc:
        print(f"gate failure: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (TransientFailure, ApiError, QuotaExceeded, RemoteTimeout, RemoteFailure, ProtocolError) as exc:
        print(f"remote/API failure: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except PolemosError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
