"""Classifier: tokenization, features, training, evaluation, persistence."""
from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polemos.classifier import (
    Model,
    SparseVector,
    TrainConfig,
    detect_class_collapse,
    encode,
    evaluate,
    featurize,
    load_model,
    loss_and_gradient,
    metrics_from_confusion,
    predict,
    predict_corpus,
    predict_features,
    save_model,
    softmax,
    split_dataset,
    tokenize,
    train,
    MissingLabelWarning,
)
from fractions import Fraction

from polemos.corpus import CorpusStore

from conftest import make_comment


# Two-label toy set with disjoint vocabularies. The brute-force separability
# oracle below checks the disjointness that makes perfect accuracy possible.
TOY_WORDS_A = ["manzana", "pera", "uva", "ciruela", "higo"]
TOY_WORDS_B = ["tuerca", "clavo", "tornillo", "martillo", "sierra"]


def toy_dataset() -> list[tuple[str, int]]:
    rng = random.Random(99)
    rows = []
    for i in range(10):
        rows.append((" ".join(rng.sample(TOY_WORDS_A, 3)), 5))
        rows.append((" ".join(rng.sample(TOY_WORDS_B, 3)), 6))
    return rows


def test_toy_set_is_separable_by_vocabulary():
    vocab_a = set(TOY_WORDS_A)
    vocab_b = set(TOY_WORDS_B)
    assert not vocab_a & vocab_b
    for text, code in toy_dataset():
        tokens = set(tokenize(text))
        assert tokens <= (vocab_a if code == 5 else vocab_b)
        assert not tokens & (vocab_b if code == 5 else vocab_a)


class TestTokenize:
    @given(st.text(max_size=80))
    @settings(max_examples=120, deadline=None)
    def test_tokens_never_empty_and_lowercase(self, text):
        for tok in tokenize(text):
            assert tok
            assert tok == tok.lower()

    @given(st.text(max_size=60))
    @settings(max_examples=80, deadline=None)
    def test_tokenize_is_idempotent_on_joined_tokens(self, text):
        tokens = tokenize(text)
        assert tokenize(" ".join(tokens)) == tokens

    def test_basic_rule(self):
        assert tokenize("Viva Palestina!") == ["viva", "palestina"]

    def test_empty(self):
        assert tokenize("") == []

    def test_flag_stays_one_token(self):
        assert tokenize("Palestina 🇵🇸 libre") == ["palestina", "🇵🇸", "libre"]

    def test_pictographs_split_individually(self):
        assert tokenize("gracias😂😂🙏") == ["gracias", "😂", "😂", "🙏"]

    def test_numbers_join_runs(self):
        assert tokenize("año 2024, covid19") == ["año", "2024", "covid19"]

    def test_variation_selector_dropped(self):
        assert tokenize("amor ❤️ total") == ["amor", "❤", "total"]

    def test_no_empty_tokens(self):
        for text in ["", "  ", "...!", "a b", "¿qué? ¡sí!"]:
            assert all(tok for tok in tokenize(text))


class TestEncode:
    def test_empty_tokens_mask_all_zero(self):
        enc = encode([], 8)
        assert enc.input_mask == [0] * 8
        assert enc.input_word_ids == [0] * 8
        assert enc.input_type_ids == [0] * 8

    def test_three_tokens_mask(self):
        enc = encode(["a", "b", "c"], 8)
        assert enc.input_mask == [1, 1, 1, 0, 0, 0, 0, 0]
        assert all(i > 0 for i in enc.input_word_ids[:3])
        assert enc.input_word_ids[3:] == [0] * 5

    def test_truncation(self):
        enc = encode([f"t{i}" for i in range(10)], 8)
        assert len(enc.input_word_ids) == 8
        assert enc.input_mask == [1] * 8

    def test_lengths_equal(self):
        enc = encode(["x"], 16)
        assert len(enc.input_word_ids) == len(enc.input_mask) == len(enc.input_type_ids) == 16

    @given(st.integers(min_value=0, max_value=40), st.integers(min_value=1, max_value=32))
    @settings(max_examples=60, deadline=None)
    def test_mask_marks_exactly_real_positions(self, n_tokens, length):
        enc = encode([f"t{i}" for i in range(n_tokens)], length)
        real = min(n_tokens, length)
        assert enc.input_mask == [1] * real + [0] * (length - real)
        assert all(i > 0 for i in enc.input_word_ids[:real])
        assert all(i == 0 for i in enc.input_word_ids[real:])
        assert enc.input_type_ids == [0] * length


class TestFeaturize:
    def test_empty_is_zero_vector(self):
        fv = featurize([])
        assert fv.idx.size == 0

    def test_two_tokens_three_buckets(self):
        fv = featurize(["a", "b"])
        assert fv.idx.size == 3  # a, b, and the bigram
        assert np.isclose(np.linalg.norm(fv.val), 1.0)

    def test_deterministic_across_runs(self):
        f1 = featurize(["hola", "mundo", "hola"], salt=4)
        f2 = featurize(["hola", "mundo", "hola"], salt=4)
        assert np.array_equal(f1.idx, f2.idx)
        assert np.array_equal(f1.val, f2.val)

    def test_salt_changes_buckets(self):
        f1 = featurize(["hola", "mundo"], salt=1)
        f2 = featurize(["hola", "mundo"], salt=2)
        assert not np.array_equal(f1.idx, f2.idx)

    @given(st.lists(st.text(min_size=1, max_size=8), min_size=1, max_size=30))
    @settings(max_examples=60, deadline=None)
    def test_norm_one_and_indices_in_range(self, tokens):
        fv = featurize(tokens)
        assert np.isclose(np.linalg.norm(fv.val), 1.0, atol=1e-12)
        assert fv.idx.size == 0 or (0 <= fv.idx.min() and fv.idx.max() < 2 ** 18)
        assert np.all(np.diff(fv.idx) > 0)  # sorted, collision-merged


class TestSoftmax:
    @given(
        st.lists(
            st.floats(min_value=-300, max_value=300, allow_nan=False),
            min_size=7, max_size=7,
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_sums_to_one(self, logits):
        p = softmax(np.array(logits))
        assert abs(p.sum() - 1.0) < 1e-9
        assert np.all(p >= 0)

    @given(
        st.lists(
            st.floats(min_value=-15, max_value=15, allow_nan=False),
            min_size=7, max_size=7,
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_components_in_open_interval(self, logits):
        # spread bounded so (0,1) strictness survives float64 rounding
        p = softmax(np.array(logits))
        assert np.all(p > 0) and np.all(p < 1)


class TestTrainPredict:
    def test_toy_separable_reaches_perfect_holdout(self):
        config = TrainConfig(epochs=15, seed=3)
        dataset = toy_dataset()
        model = train(dataset, config)
        _, holdout = split_dataset(dataset, config.seed, config.holdout_fraction)
        metrics = evaluate(model, holdout)
        assert metrics.accuracy == 1

    def test_single_example_perfect_after_first_epoch(self):
        with pytest.warns(MissingLabelWarning):
            model = train([("texto único", 2)], TrainConfig(epochs=3, seed=1))
        assert model.train_history[0][1] == 1.0

    def test_training_is_bit_deterministic(self):
        dataset = toy_dataset()
        m1 = train(dataset, TrainConfig(seed=5))
        m2 = train(dataset, TrainConfig(seed=5))
        assert np.array_equal(m1.weights, m2.weights)
        assert np.array_equal(m1.bias, m2.bias)
        assert m1.train_history == m2.train_history

    def test_zero_model_uniform_prediction(self):
        code, probs = predict(Model.zero(), "cualquier texto")
        assert code == 0
        assert np.allclose(probs, 1 / 7, atol=1e-12)
        assert abs(probs.sum() - 1.0) < 1e-9

    def test_toy_model_recovers_training_codes(self):
        dataset = toy_dataset()
        model = train(dataset, TrainConfig(seed=3))
        for text, code in dataset:
            assert predict(model, text)[0] == code

    def test_identical_token_sequences_identical_outputs(self):
        model = train(toy_dataset(), TrainConfig(seed=3))
        _, p1 = predict(model, "¡Viva, PALESTINA!")
        _, p2 = predict(model, "viva palestina…")
        assert np.array_equal(p1, p2)

    def test_loss_non_increasing_with_small_lr(self):
        model = train(toy_dataset(), TrainConfig(epochs=15, learning_rate=0.01, seed=11))
        losses = [loss for loss, _ in model.train_history]
        for a, b in zip(losses, losses[1:]):
            assert b <= a + 1e-12

    def test_missing_label_warns_not_fatal(self):
        with pytest.warns(MissingLabelWarning):
            train([("solo una clase", 3)] * 4, TrainConfig(epochs=1, seed=1))

    def test_argmax_invariant_under_positive_scaling(self):
        rng = np.random.default_rng(8)
        model = Model.zero(dim=64)
        model.weights = rng.normal(size=(7, 64))
        model.bias = np.zeros(7)
        for trial in range(20):
            idx = np.sort(rng.choice(64, size=5, replace=False)).astype(np.int64)
            val = rng.random(5) + 0.1
            fv = SparseVector(idx, val)
            scaled = SparseVector(idx, val * 37.5)
            assert predict_features(model, fv)[0] == predict_features(model, scaled)[0]


class TestGradient:
    def test_analytic_matches_central_differences(self):
        # 5-example, dimension-16 instance; finite differences are the oracle
        texts = ["uno dos", "tres cuatro", "cinco", "seis siete ocho", "nueve"]
        codes = [0, 2, 4, 6, 1]
        features = [featurize(tokenize(t), salt=77, dim=16) for t in texts]
        rng = np.random.default_rng(123)
        weights = rng.normal(scale=0.5, size=(7, 16))
        bias = rng.normal(scale=0.1, size=7)
        l2 = 0.01

        loss, grad_w, grad_b = loss_and_gradient(weights, bias, features, codes, l2)

        eps = 1e-6
        num_w = np.zeros_like(weights)
        for k in range(weights.shape[0]):
            for d in range(weights.shape[1]):
                wp = weights.copy(); wp[k, d] += eps
                wm = weights.copy(); wm[k, d] -= eps
                lp, _, _ = loss_and_gradient(wp, bias, features, codes, l2)
                lm, _, _ = loss_and_gradient(wm, bias, features, codes, l2)
                num_w[k, d] = (lp - lm) / (2 * eps)
        num_b = np.zeros_like(bias)
        for k in range(bias.size):
            bp = bias.copy(); bp[k] += eps
            bm = bias.copy(); bm[k] -= eps
            lp, _, _ = loss_and_gradient(weights, bp, features, codes, l2)
            lm, _, _ = loss_and_gradient(weights, bm, features, codes, l2)
            num_b[k] = (lp - lm) / (2 * eps)

        rel_w = np.linalg.norm(grad_w - num_w) / max(np.linalg.norm(grad_w), np.linalg.norm(num_w))
        rel_b = np.linalg.norm(grad_b - num_b) / max(np.linalg.norm(grad_b), np.linalg.norm(num_b))
        assert rel_w < 1e-5
        assert rel_b < 1e-5


class TestEvaluate:
    def test_diagonal_accuracy(self):
        confusion = [[0] * 7 for _ in range(7)]
        for k in range(7):
            confusion[k][k] = 1
        confusion[0][0] = 3  # 9 correct of 10
        confusion[1][2] = 1
        metrics = metrics_from_confusion(confusion)
        assert metrics.accuracy == Fraction(9, 10)

    def test_all_predictions_one_category(self):
        confusion = [[0] * 7 for _ in range(7)]
        confusion[3][3] = 4  # everything predicted 3
        confusion[5][3] = 6
        metrics = metrics_from_confusion(confusion)
        assert metrics.recall[3] == 1
        assert metrics.recall[5] == 0
        assert metrics.precision[5] == 0  # 0/0 defined as 0
        assert metrics.precision[3] == Fraction(2, 5)

    def test_confusion_row_sums_are_true_counts(self):
        dataset = toy_dataset()
        model = train(dataset, TrainConfig(seed=3))
        metrics = evaluate(model, dataset)
        true_counts = [sum(1 for _, c in dataset if c == k) for k in range(7)]
        assert [sum(row) for row in metrics.confusion] == true_counts

    def test_matches_independent_recount(self):
        dataset = toy_dataset()
        model = train(dataset, TrainConfig(seed=3))
        metrics = evaluate(model, dataset)
        # independent recount over prediction pairs
        pairs = [(code, predict(model, text)[0]) for text, code in dataset]
        total = len(pairs)
        correct = sum(1 for t, p in pairs if t == p)
        assert metrics.accuracy == (correct and correct / total or 0) or float(metrics.accuracy) == correct / total
        for k in range(7):
            tp = sum(1 for t, p in pairs if t == k and p == k)
            pred_k = sum(1 for _, p in pairs if p == k)
            true_k = sum(1 for t, _ in pairs if t == k)
            assert float(metrics.precision[k]) == (tp / pred_k if pred_k else 0)
            assert float(metrics.recall[k]) == (tp / true_k if true_k else 0)


class TestClassCollapse:
    def test_zero_code_zero_reported(self):
        counts = [0, 10, 8, 30, 40, 9, 12]
        assert detect_class_collapse(counts) == [0]

    def test_all_positive_reports_nothing(self):
        assert detect_class_collapse([1] * 7) == []

    def test_all_zero_reports_all_seven(self):
        assert detect_class_collapse([0] * 7) == list(range(7))

    def test_untrained_codes_excluded(self):
        counts = [0, 0, 5, 5, 5, 5, 5]
        assert detect_class_collapse(counts, trained_codes=[1, 2, 3, 4, 5, 6]) == [1]


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        model = train(toy_dataset(), TrainConfig(seed=3))
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.weights, model.weights)
        assert np.array_equal(loaded.bias, model.bias)
        assert loaded.train_history == model.train_history
        assert loaded.trained_codes == model.trained_codes
        path2 = tmp_path / "model2.json"
        save_model(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()


class TestPredictCorpus:
    def test_hundred_rows_and_summary(self, tmp_path):
        store = CorpusStore(tmp_path / "clean.jsonl")
        store.append_comments([make_comment(i, text=f"texto {i} uva") for i in range(100)])
        model = train(toy_dataset(), TrainConfig(seed=3))
        out = tmp_path / "pred.csv"
        summary = predict_corpus(model, store, out)
        assert summary["rows"] == 100
        assert sum(summary["predicted_counts"].values()) == 100
        assert len(out.read_text().splitlines()) == 101

    def test_rerun_identical_bytes(self, tmp_path):
        store = CorpusStore(tmp_path / "clean.jsonl")
        store.append_comments([make_comment(i, text=f"texto número {i}") for i in range(25)])
        model = train(toy_dataset(), TrainConfig(seed=3))
        out = tmp_path / "pred.csv"
        predict_corpus(model, store, out)
        first = out.read_bytes()
        predict_corpus(model, store, out)
        assert out.read_bytes() == first
