"""Stance classifier: tokenizer, hashed n-gram features, softmax model.

The model is a multinomial logistic regression over hashed unigram+bigram
counts, trained by shuffled full-pass SGD on softmax cross-entropy with L2.
It stands behind the same predict contract as the remote inference adapter
(see ``remote.py``), so either can classify the corpus.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import random
import unicodedata
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import StorageError
from .labels import NUM_CLASSES, VALID_CODES, check_code
from .textutil import is_emoji_extender, is_pictographic, is_regional_indicator

logger = logging.getLogger(__name__)

FEATURE_DIM = 2 ** 18
VOCAB_SIZE = 2 ** 15
DEFAULT_SEQUENCE_LENGTH = 128
DEFAULT_SALT = 20231007
MODEL_FORMAT = "polemos-model-v1"


class MissingLabelWarning(UserWarning):
    """A schema label had no examples in the training split."""


# ---------------------------------------------------------------------------
# Tokenization and encoding


def tokenize(text: str) -> list[str]:
    """Segment text into lowercase tokens.

    Rule: NFC-normalize and lowercase; contiguous alphanumeric runs become
    tokens; each pictographic code point becomes its own token, except that
    a pair of regional-indicator symbols combines into one flag token;
    variation selectors and ZWJ are dropped; everything else separates.
    """
    tokens: list[str] = []
    run: list[str] = []
    pending_ri: str | None = None

    def flush_run():
        if run:
            tokens.append("".join(run))
            run.clear()

    def flush_ri():
        nonlocal pending_ri
        if pending_ri is not None:
            tokens.append(pending_ri)
            pending_ri = None

    for ch in unicodedata.normalize("NFC", text).lower():
        if is_regional_indicator(ch):
            flush_run()
            if pending_ri is None:
                pending_ri = ch
            else:
                tokens.append(pending_ri + ch)
                pending_ri = None
            continue
        flush_ri()
        if ch.isalnum():
            run.append(ch)
        elif is_pictographic(ch):
            flush_run()
            tokens.append(ch)
        elif is_emoji_extender(ch):
            continue
        else:
            flush_run()
    flush_run()
    flush_ri()
    return tokens


@dataclass(frozen=True)
class EncodedInput:
    input_word_ids: list[int]
    input_mask: list[int]
    input_type_ids: list[int]


def encode(
    tokens: list[str],
    length: int = DEFAULT_SEQUENCE_LENGTH,
    salt: int = DEFAULT_SALT,
) -> EncodedInput:
    """Map tokens to stable hashed ids, truncated/padded to ``length``.

    Id 0 is reserved for padding; the mask is 1 exactly on real tokens;
    type ids are all 0 (single segment).
    """
    if length <= 0:
        raise ValueError("length must be positive")
    ids = [1 + _stable_hash("v:" + tok, salt) % (VOCAB_SIZE - 1) for tok in tokens]
    ids = ids[:length]
    mask = [1] * len(ids)
    pad = length - len(ids)
    return EncodedInput(
        input_word_ids=ids + [0] * pad,
        input_mask=mask + [0] * pad,
        input_type_ids=[0] * length,
    )


# ---------------------------------------------------------------------------
# Hashed features


def _stable_hash(key: str, salt: int) -> int:
    digest = hashlib.blake2b(
        key.encode("utf-8"),
        digest_size=8,
        key=salt.to_bytes(8, "little", signed=False),
    ).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class SparseVector:
    """L2-normalized sparse feature vector with sorted indices."""

    idx: np.ndarray  # int64, strictly increasing
    val: np.ndarray  # float64


def featurize(tokens: list[str], salt: int = DEFAULT_SALT, dim: int = FEATURE_DIM) -> SparseVector:
    """Hash unigrams and adjacent bigrams into ``dim`` buckets and normalize."""
    counts: dict[int, float] = {}
    for tok in tokens:
        bucket = _stable_hash("1:" + tok, salt) % dim
        counts[bucket] = counts.get(bucket, 0.0) + 1.0
    for a, b in zip(tokens, tokens[1:]):
        bucket = _stable_hash("2:" + a + "\x1f" + b, salt) % dim
        counts[bucket] = counts.get(bucket, 0.0) + 1.0
    if not counts:
        return SparseVector(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))
    idx = np.array(sorted(counts), dtype=np.int64)
    val = np.array([counts[i] for i in idx], dtype=np.float64)
    val /= np.linalg.norm(val)
    return SparseVector(idx, val)


# ---------------------------------------------------------------------------
# Model


@dataclass
class TrainConfig:
    epochs: int = 15
    learning_rate: float = 0.1  # decays as 1/sqrt(epoch)
    l2: float = 1e-6
    seed: int = 13
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if not 0 < self.holdout_fraction < 1:
            raise ValueError("holdout_fraction must be in (0,1)")


@dataclass
class Model:
    weights: np.ndarray  # (NUM_CLASSES, dim)
    bias: np.ndarray  # (NUM_CLASSES,)
    salt: int = DEFAULT_SALT
    dim: int = FEATURE_DIM
    train_history: list[tuple[float, float]] = field(default_factory=list)
    trained_codes: list[int] = field(default_factory=list)

    @classmethod
    def zero(cls, dim: int = FEATURE_DIM, salt: int = DEFAULT_SALT) -> "Model":
        return cls(
            weights=np.zeros((NUM_CLASSES, dim), dtype=np.float64),
            bias=np.zeros(NUM_CLASSES, dtype=np.float64),
            salt=salt,
            dim=dim,
        )


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / e.sum()


def _logits(model: Model, fv: SparseVector) -> np.ndarray:
    if fv.idx.size == 0:
        return model.bias.copy()
    return model.weights[:, fv.idx] @ fv.val + model.bias


def predict_features(model: Model, fv: SparseVector) -> tuple[int, np.ndarray]:
    probs = softmax(_logits(model, fv))
    return int(np.argmax(probs)), probs  # argmax takes the lowest code on ties


def predict(model: Model, text: str) -> tuple[int, np.ndarray]:
    return predict_features(model, featurize(tokenize(text), model.salt, model.dim))


def split_dataset(
    dataset: list[tuple[str, int]], seed: int, holdout_fraction: float
) -> tuple[list[tuple[str, int]], list[tuple[str, int]]]:
    """Seeded shuffle split; the same (seed, fraction) always yields the
    same partition, so training and evaluation agree on the holdout."""
    order = list(range(len(dataset)))
    random.Random(f"{seed}/split").shuffle(order)
    n_holdout = int(round(len(dataset) * holdout_fraction))
    n_holdout = min(max(n_holdout, 1), len(dataset) - 1) if len(dataset) > 1 else 0
    holdout_idx = set(order[:n_holdout])
    train = [dataset[i] for i in range(len(dataset)) if i not in holdout_idx]
    holdout = [dataset[i] for i in range(len(dataset)) if i in holdout_idx]
    return train, holdout


def dataset_loss(
    weights: np.ndarray,
    bias: np.ndarray,
    features: list[SparseVector],
    codes: list[int],
    l2: float,
) -> tuple[float, float]:
    """Mean cross-entropy plus L2 penalty, and accuracy, at fixed parameters."""
    total = 0.0
    correct = 0
    for fv, code in zip(features, codes):
        if fv.idx.size == 0:
            logits = bias.copy()
        else:
            logits = weights[:, fv.idx] @ fv.val + bias
        z = logits - np.max(logits)
        log_probs = z - math.log(np.exp(z).sum())
        total += -log_probs[code]
        if int(np.argmax(log_probs)) == code:
            correct += 1
    n = len(codes)
    loss = total / n + 0.5 * l2 * float(np.sum(weights * weights))
    return loss, correct / n


def loss_and_gradient(
    weights: np.ndarray,
    bias: np.ndarray,
    features: list[SparseVector],
    codes: list[int],
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Full-batch analytic gradient of the training loss.

    loss = mean cross-entropy + (l2/2)·||W||²; the bias is not regularized.
    """
    n = len(codes)
    grad_w = np.zeros_like(weights)
    grad_b = np.zeros_like(bias)
    total = 0.0
    for fv, code in zip(features, codes):
        if fv.idx.size == 0:
            logits = bias.copy()
        else:
            logits = weights[:, fv.idx] @ fv.val + bias
        z = logits - np.max(logits)
        exp_z = np.exp(z)
        probs = exp_z / exp_z.sum()
        total += -(z[code] - math.log(exp_z.sum()))
        err = probs.copy()
        err[code] -= 1.0
        if fv.idx.size:
            grad_w[:, fv.idx] += np.outer(err, fv.val)
        grad_b += err
    grad_w /= n
    grad_b /= n
    grad_w += l2 * weights
    loss = total / n + 0.5 * l2 * float(np.sum(weights * weights))
    return loss, grad_w, grad_b


def train(
    dataset: list[tuple[str, int]],
    config: TrainConfig,
    dim: int = FEATURE_DIM,
    salt: int = DEFAULT_SALT,
) -> Model:
    """Train on the seeded train split of ``dataset``; deterministic.

    Each epoch is a shuffled full pass of per-example SGD steps; the L2 term
    is applied lazily to the columns each example touches. Per-epoch loss and
    train accuracy are measured after the pass and recorded in the history.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    for _, code in dataset:
        check_code(code)

    train_split, _ = split_dataset(dataset, config.seed, config.holdout_fraction)
    if not train_split:
        train_split = list(dataset)

    features = [featurize(tokenize(text), salt, dim) for text, _ in train_split]
    codes = [code for _, code in train_split]

    trained_codes = sorted(set(codes))
    for code in sorted(VALID_CODES - set(codes)):
        message = f"label {code} has no examples in the training split"
        warnings.warn(message, MissingLabelWarning)
        logger.warning(message)

    model = Model.zero(dim=dim, salt=salt)
    model.trained_codes = trained_codes
    shuffle_rng = random.Random(f"{config.seed}/shuffle")
    order = list(range(len(train_split)))
    for epoch in range(1, config.epochs + 1):
        lr = config.learning_rate / math.sqrt(epoch)
        shuffle_rng.shuffle(order)
        for i in order:
            fv = features[i]
            probs = softmax(_logits(model, fv))
            err = probs.copy()
            err[codes[i]] -= 1.0
            if fv.idx.size:
                cols = model.weights[:, fv.idx]
                model.weights[:, fv.idx] = cols - lr * (np.outer(err, fv.val) + config.l2 * cols)
            model.bias -= lr * err
        loss, acc = dataset_loss(model.weights, model.bias, features, codes, config.l2)
        model.train_history.append((loss, acc))
        logger.info("epoch %d/%d loss=%.6f train_acc=%.4f", epoch, config.epochs, loss, acc)
    return model


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class Metrics:
    confusion: list[list[int]]  # confusion[true][pred]
    accuracy: Fraction
    precision: list[Fraction]
    recall: list[Fraction]
    f1: list[Fraction]

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion,
            "accuracy": float(self.accuracy),
            "precision": [float(p) for p in self.precision],
            "recall": [float(r) for r in self.recall],
            "f1": [float(f) for f in self.f1],
        }


def metrics_from_confusion(confusion: list[list[int]]) -> Metrics:
    total = sum(sum(row) for row in confusion)
    trace = sum(confusion[i][i] for i in range(NUM_CLASSES))
    accuracy = Fraction(trace, total) if total else Fraction(0)
    precision: list[Fraction] = []
    recall: list[Fraction] = []
    f1: list[Fraction] = []
    for k in range(NUM_CLASSES):
        pred_k = sum(confusion[t][k] for t in range(NUM_CLASSES))
        true_k = sum(confusion[k])
        p = Fraction(confusion[k][k], pred_k) if pred_k else Fraction(0)
        r = Fraction(confusion[k][k], true_k) if true_k else Fraction(0)
        f = 2 * p * r / (p + r) if (p + r) else Fraction(0)
        precision.append(p)
        recall.append(r)
        f1.append(f)
    return Metrics(confusion, accuracy, precision, recall, f1)


def evaluate(model: Model, heldout: list[tuple[str, int]]) -> Metrics:
    """Exact confusion matrix of model predictions over labeled pairs."""
    if not heldout:
        raise ValueError("heldout set is empty")
    confusion = [[0] * NUM_CLASSES for _ in range(NUM_CLASSES)]
    for text, code in heldout:
        check_code(code)
        pred, _ = predict(model, text)
        confusion[code][pred] += 1
    return metrics_from_confusion(confusion)


def detect_class_collapse(
    predicted_counts: list[int] | dict[int, int],
    schema_codes=tuple(sorted(VALID_CODES)),
    trained_codes=None,
) -> list[int]:
    """Codes the schema declares (and training saw) that never got predicted."""
    if isinstance(predicted_counts, dict):
        counts = {int(k): int(v) for k, v in predicted_counts.items()}
    else:
        counts = {code: int(n) for code, n in enumerate(predicted_counts)}
    collapsed = []
    for code in schema_codes:
        if counts.get(code, 0) != 0:
            continue
        if trained_codes is not None and code not in trained_codes:
            continue
        collapsed.append(code)
        logger.warning("class collapse: label %d was never predicted", code)
    return collapsed


def collapse_messages(collapsed: list[int]) -> list[str]:
    from .labels import label_for

    return [
        f"label {code} ({label_for(code).name}) appears in the schema and training "
        "data but was never predicted on the corpus"
        for code in collapsed
    ]


# ---------------------------------------------------------------------------
# Corpus prediction and model persistence


def predict_corpus(model: Model, store, out_path: Path) -> dict:
    """One (comment_id, code, confidence) CSV row per stored comment.

    Output order equals store order; the file is written atomically and the
    same model+corpus always produce identical bytes.
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_path.with_suffix(out_path.suffix + ".tmp")
    counts = {code: 0 for code in sorted(VALID_CODES)}
    rows = 0
    try:
        with tmp.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["comment_id", "code", "confidence"])
            for comment in store.iter_comments():
                code, probs = predict(model, comment.text)
                writer.writerow([comment.comment_id, code, repr(float(probs[code]))])
                counts[code] += 1
                rows += 1
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise StorageError(f"writing predictions failed: {exc}")
    os.replace(tmp, out_path)
    return {"rows": rows, "predicted_counts": counts}


def read_predictions(path: Path) -> dict[str, int]:
    """comment_id -> predicted code, from a predictions CSV."""
    out: dict[str, int] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            out[row["comment_id"]] = int(row["code"])
    return out


def save_model(model: Model, path: Path) -> None:
    """Versioned JSON dump of salt, bias, and nonzero weight columns.

    Floats are serialized with shortest round-trip repr, so save→load→save
    is byte-identical.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nonzero_cols = np.flatnonzero(np.any(model.weights != 0.0, axis=0))
    payload = {
        "format": MODEL_FORMAT,
        "classes": NUM_CLASSES,
        "dim": int(model.dim),
        "salt": int(model.salt),
        "bias": [float(x) for x in model.bias],
        "weights": [
            [int(col), [float(x) for x in model.weights[:, col]]]
            for col in nonzero_cols
        ],
        "train_history": [[float(l), float(a)] for l, a in model.train_history],
        "trained_codes": list(model.trained_codes),
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, separators=(",", ":"))
        f.write("\n")
    os.replace(tmp, path)


def load_model(path: Path) -> Model:
    with Path(path).open("r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format") != MODEL_FORMAT:
        raise StorageError(f"unsupported model format in {path}")
    model = Model.zero(dim=int(payload["dim"]), salt=int(payload["salt"]))
    model.bias = np.array(payload["bias"], dtype=np.float64)
    for col, column in payload["weights"]:
        model.weights[:, int(col)] = np.array(column, dtype=np.float64)
    model.train_history = [(float(l), float(a)) for l, a in payload["train_history"]]
    model.trained_codes = [int(c) for c in payload["trained_codes"]]
    return model
