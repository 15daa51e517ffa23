"""Acceptance criteria, one test per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL line
per criterion. Tolerances are pinned in the assertions themselves.
"""
from __future__ import annotations

import contextlib
import io
import json
import random
import time
from datetime import timedelta
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from polemos.analysis import (
    affinity_by_label,
    bin_by_fortnight,
    bin_index_for,
    count_by_label,
    format_rational,
    percent_difference,
)
from polemos.annotation import (
    AnnotationSession,
    QuotaTarget,
    export_training_set,
    load_training_set,
    sample_for_annotation,
)
from polemos.classifier import (
    TrainConfig,
    detect_class_collapse,
    evaluate,
    featurize,
    loss_and_gradient,
    predict,
    predict_corpus,
    save_model,
    tokenize,
    train,
)
from polemos.cli import EXIT_OK, main
from polemos.corpus import DEFAULT_WINDOW, CorpusStore, clean_corpus
from polemos.ingest import QuotaBudget, SearchQuery, YouTubeClient, ingest
from polemos.mockapi import MockPlatformApi
from polemos.synth import (
    SynthConfig,
    make_corpus,
    write_corpus_jsonl,
    write_mock_fixture,
    write_truth,
)
from polemos.textutil import parse_rfc3339

ANCHOR = parse_rfc3339("2023-10-07T00:00:00Z")


@contextlib.contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"FAIL [acceptance] {name}")
        raise
    print(f"PASS [acceptance] {name}")


# ---------------------------------------------------------------------------


def test_end_to_end_synthetic_run(tmp_path):
    """~5,000 synthetic comments through the whole CLI pipeline in < 60 s
    with holdout accuracy >= 0.90."""
    with criterion("end-to-end synthetic run < 60 s, holdout accuracy >= 0.90"):
        started = time.monotonic()
        data = make_corpus(SynthConfig(seed=20231007, n_comments=5000, n_videos=12))
        fixture = tmp_path / "mock_api"
        write_mock_fixture(data, fixture)
        write_truth(data, tmp_path / "truth.jsonl")
        server = MockPlatformApi(fixture)
        server.start_background()
        try:
            config = {
                "queries": [{"term": t, "max_videos": 50} for t in data.queries],
                "api": {"base_url": server.url, "backoff_base": 0.0},
                "annotation": {
                    "per_label_target": 200,
                    "sample_size": 3500,
                    "sample_seed": 7,
                    "oracle": "truth.jsonl",
                },
                "train": {"epochs": 15, "seed": 13},
                "accuracy_gate": 0.90,
            }
            cfg = tmp_path / "polemos.json"
            cfg.write_text(json.dumps(config), encoding="utf-8")
            for cmd in ("ingest", "clean", "sample", "annotate-serve", "train", "predict", "report"):
                buf = io.StringIO()
                with contextlib.redirect_stdout(buf):
                    rc = main([cmd, "--config", str(cfg)])
                assert rc == EXIT_OK, f"{cmd} exited {rc}:\n{buf.getvalue()}"
        finally:
            server.stop()
        elapsed = time.monotonic() - started

        metrics = json.loads((tmp_path / "models" / "metrics.json").read_text())
        assert metrics["gate_passed"] is True
        assert metrics["holdout"]["accuracy"] >= 0.90

        balance_rows = load_training_set(tmp_path / "data" / "training_set.csv")
        assert len(balance_rows) == 1400
        per_label = [0] * 7
        for _, code in balance_rows:
            per_label[code] += 1
        assert per_label == [200] * 7

        summary = json.loads((tmp_path / "reports" / "summary.json").read_text())
        assert summary["total_comments"] == 5000
        assert elapsed < 60.0, f"pipeline took {elapsed:.1f}s"


def test_class_collapse_reproduction(tmp_path):
    """Entangled code-0 training wording yields zero code-0 predictions and
    the diagnostic reports exactly [0]."""
    with criterion("class-collapse reproduction: zero code-0 predictions, diagnostic [0]"):
        data = make_corpus(
            SynthConfig(seed=424242, n_comments=3500, n_videos=10, entangle_code0=True, dirt=False)
        )
        raw = CorpusStore(tmp_path / "raw.jsonl")
        write_corpus_jsonl(data, raw.path)
        clean = CorpusStore(tmp_path / "clean.jsonl")
        clean_corpus(raw, DEFAULT_WINDOW, clean)

        ids = sample_for_annotation(clean, 3000, seed=5)
        session = AnnotationSession(
            clean, ids, tmp_path / "ann.jsonl", quota=QuotaTarget(200)
        )
        progress = session.progress()
        for cid in ids:
            if progress.all_met():
                break
            code = data.truth.get(cid)
            if code is None or progress.per_label[code] >= 200:
                continue
            progress = session.record_label(cid, code, "oracle")
        report = export_training_set(session, tmp_path / "train.csv")
        assert report.per_label[0] == 200  # code 0 fully represented in training

        dataset = load_training_set(tmp_path / "train.csv")
        model = train(dataset, TrainConfig(epochs=15, seed=13))
        summary = predict_corpus(model, clean, tmp_path / "pred.csv")
        assert summary["predicted_counts"][0] == 0
        collapsed = detect_class_collapse(
            summary["predicted_counts"], trained_codes=model.trained_codes
        )
        assert collapsed == [0]


def test_oracle_equivalence_on_randomized_fixtures():
    """count_by_label, bin_by_fortnight, affinity_by_label, evaluate match
    brute-force recounts exactly on 100 randomized fixtures up to 1e5 rows."""
    with criterion("oracle equivalence on 100 randomized fixtures (<= 1e5 rows)"):
        rng = random.Random(813)
        sizes = [int(10 ** rng.uniform(1, 5)) for _ in range(99)] + [100_000]
        for trial, size in enumerate(sizes):
            rows = [
                (
                    rng.randrange(7),
                    ANCHOR + timedelta(seconds=rng.randrange(93 * 86400)),
                    rng.randrange(200),
                )
                for _ in range(size)
            ]

            counts = count_by_label(code for code, _, _ in rows)
            expect_counts = [0] * 7
            for code, _, _ in rows:
                expect_counts[code] += 1
            assert counts == expect_counts, f"count_by_label trial {trial}"

            series = bin_by_fortnight(rows, ANCHOR)
            expect_bins: dict[tuple[int, int], int] = {}
            for code, t, _ in rows:
                b = int((t - ANCHOR).total_seconds() // (14 * 86400))
                expect_bins[(code, b)] = expect_bins.get((code, b), 0) + 1
            for code in range(7):
                for b in range(series.num_bins):
                    assert series.counts[code][b] == expect_bins.get((code, b), 0), (
                        f"bin_by_fortnight trial {trial}"
                    )

            affinity = affinity_by_label(rows)
            for code in range(7):
                likes = [lk for c, _, lk in rows if c == code]
                entry = affinity.per_label[code]
                assert entry.comment_count == len(likes)
                assert entry.like_sum == sum(likes)
                if likes:
                    assert entry.mean_likes == Fraction(sum(likes), len(likes))
                else:
                    assert entry.mean_likes is None

        # evaluate: randomized labeled sets against a fixed model
        vocab = ["uva", "pera", "higo", "clavo", "sierra", "tuerca", "lima", "nuez"]
        train_set = [(" ".join(rng.sample(vocab, 3)), rng.randrange(7)) for _ in range(60)]
        model = train(train_set, TrainConfig(epochs=5, seed=2))
        for trial in range(100):
            size = int(10 ** rng.uniform(0.7, 2.5))
            heldout = [
                (" ".join(rng.sample(vocab, rng.randint(1, 4))), rng.randrange(7))
                for _ in range(size)
            ]
            metrics = evaluate(model, heldout)
            pairs = [(code, predict(model, text)[0]) for text, code in heldout]
            confusion = [[0] * 7 for _ in range(7)]
            for t, p in pairs:
                confusion[t][p] += 1
            assert metrics.confusion == confusion, f"evaluate trial {trial}"
            correct = sum(1 for t, p in pairs if t == p)
            assert metrics.accuracy == Fraction(correct, len(pairs))
            for k in range(7):
                tp = confusion[k][k]
                pred_k = sum(confusion[t][k] for t in range(7))
                true_k = sum(confusion[k])
                assert metrics.precision[k] == (Fraction(tp, pred_k) if pred_k else 0)
                assert metrics.recall[k] == (Fraction(tp, true_k) if true_k else 0)


def test_gradient_check():
    """Analytic gradient vs central finite differences, 1e-5 relative, on a
    dimension-16, 5-example instance."""
    with criterion("gradient check: analytic vs central differences within 1e-5"):
        texts = ["alfa beta", "gamma delta", "épsilon", "zeta eta theta", "iota"]
        codes = [0, 2, 4, 6, 1]
        features = [featurize(tokenize(t), salt=5, dim=16) for t in texts]
        rng = np.random.default_rng(20)
        weights = rng.normal(scale=0.7, size=(7, 16))
        bias = rng.normal(scale=0.2, size=7)
        l2 = 0.003

        _, grad_w, grad_b = loss_and_gradient(weights, bias, features, codes, l2)

        eps = 1e-6
        num_w = np.zeros_like(weights)
        for k in range(7):
            for d in range(16):
                wp = weights.copy(); wp[k, d] += eps
                wm = weights.copy(); wm[k, d] -= eps
                lp, _, _ = loss_and_gradient(wp, bias, features, codes, l2)
                lm, _, _ = loss_and_gradient(wm, bias, features, codes, l2)
                num_w[k, d] = (lp - lm) / (2 * eps)
        num_b = np.zeros_like(bias)
        for k in range(7):
            bp = bias.copy(); bp[k] += eps
            bm = bias.copy(); bm[k] -= eps
            lp, _, _ = loss_and_gradient(weights, bp, features, codes, l2)
            lm, _, _ = loss_and_gradient(weights, bm, features, codes, l2)
            num_b[k] = (lp - lm) / (2 * eps)

        rel_w = np.linalg.norm(grad_w - num_w) / max(np.linalg.norm(grad_w), np.linalg.norm(num_w))
        rel_b = np.linalg.norm(grad_b - num_b) / max(np.linalg.norm(grad_b), np.linalg.norm(num_b))
        assert rel_w < 1e-5, f"weights gradient relative error {rel_w:.2e}"
        assert rel_b < 1e-5, f"bias gradient relative error {rel_b:.2e}"


def test_determinism_across_runs(tmp_path):
    """Identical (fixture, seed, config) produce bit-identical model file,
    predictions CSV, and report JSON."""
    with criterion("determinism: bit-identical model, predictions, report JSON"):
        data = make_corpus(SynthConfig(seed=77, n_comments=900, n_videos=8))

        def one_run(run_dir: Path) -> dict[str, bytes]:
            run_dir.mkdir()
            raw = CorpusStore(run_dir / "raw.jsonl")
            write_corpus_jsonl(data, raw.path)
            clean = CorpusStore(run_dir / "clean.jsonl")
            clean_corpus(raw, DEFAULT_WINDOW, clean)
            ids = sample_for_annotation(clean, 700, seed=7)
            session = AnnotationSession(clean, ids, run_dir / "ann.jsonl", quota=QuotaTarget(40))
            progress = session.progress()
            for cid in ids:
                if progress.all_met():
                    break
                code = data.truth.get(cid)
                if code is None or progress.per_label[code] >= 40:
                    continue
                progress = session.record_label(cid, code, "oracle")
            export_training_set(session, run_dir / "train.csv")
            dataset = load_training_set(run_dir / "train.csv")
            model = train(dataset, TrainConfig(epochs=15, seed=13))
            save_model(model, run_dir / "model.json")
            predict_corpus(model, clean, run_dir / "predictions.csv")
            from polemos.analysis import build_report
            from polemos.classifier import read_predictions

            build_report(
                clean,
                read_predictions(run_dir / "predictions.csv"),
                run_dir / "report",
                anchor=ANCHOR,
                trained_codes=model.trained_codes,
                charts=False,
            )
            return {
                "model": (run_dir / "model.json").read_bytes(),
                "predictions": (run_dir / "predictions.csv").read_bytes(),
                "summary": (run_dir / "report" / "summary.json").read_bytes(),
                "lead_changes": (run_dir / "report" / "lead_changes.json").read_bytes(),
            }

        first = one_run(tmp_path / "run1")
        second = one_run(tmp_path / "run2")
        for name in first:
            assert first[name] == second[name], f"{name} differs between runs"


def test_percent_difference_reported_values():
    """The two headline percent figures reproduce from their inputs."""
    with criterion("percent_difference: (29884, 29820) -> 0.21 and 1.3416b form -> 34.16"):
        assert format_rational(percent_difference(29884, 29820)) == "0.21"
        b = 12500
        a = Fraction(13416, 10000) * b  # a = 1.3416 * b
        assert format_rational(percent_difference(a, b)) == "34.16"
        assert format_rational(percent_difference(Fraction("134.16"), 100)) == "34.16"


def test_binning_boundaries():
    """Anchor, anchor+13d23h59m59s, anchor+14d land in bins 0, 0, 1."""
    with criterion("fortnight binning boundaries 0, 0, 1"):
        assert bin_index_for(ANCHOR, ANCHOR) == 0
        assert bin_index_for(ANCHOR + timedelta(days=13, hours=23, minutes=59, seconds=59), ANCHOR) == 0
        assert bin_index_for(ANCHOR + timedelta(days=14), ANCHOR) == 1


def test_ingestion_client_against_mock_fixture(tmp_path):
    """6 videos, one comments-disabled, 3 pages per enabled video: counters
    match the fixture totals exactly and quota accounting balances."""
    with criterion("ingestion: mock fixture totals exact, quota balances"):
        data = make_corpus(
            SynthConfig(seed=11, n_videos=6, comments_per_video=60, dirt=False, disabled_videos=1)
        )
        fixture = tmp_path / "fixture"
        manifest = write_mock_fixture(data, fixture, thread_page_size=20)
        server = MockPlatformApi(fixture)
        server.start_background()
        try:
            client = YouTubeClient(server.url, api_key="k", retries=3, backoff_base=0.0)
            store = CorpusStore(tmp_path / "raw.jsonl")
            budget = QuotaBudget(units_total=10_000, cost_per_search=100, cost_per_thread_page=1)
            queries = [
                SearchQuery(term, DEFAULT_WINDOW.start, DEFAULT_WINDOW.end, max_videos=50)
                for term in data.queries
            ]
            report = ingest(queries, client, store, budget)
        finally:
            server.stop()

        assert report.videos_found == manifest["videos"] == 6
        assert report.videos_with_comments_disabled == len(manifest["disabled"]) == 1
        assert report.comments_fetched == manifest["comments"] == 300
        assert report.pages_fetched == manifest["thread_requests"]
        assert report.search_pages_fetched == sum(manifest["search_pages"].values())
        assert report.quota_spent == (
            report.pages_fetched * budget.cost_per_thread_page
            + report.search_pages_fetched * budget.cost_per_search
        )
        assert report.quota_spent == budget.units_spent
