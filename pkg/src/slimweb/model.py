"""Feed-forward script classifier: counts in, category probabilities out.

The network is deliberately small — two ReLU hidden layers of 350 and 50
units feeding an 8-way softmax — and is implemented directly on numpy so
training is deterministic given a seed. Classification applies a
confidence gate: the argmax category is returned only when its
probability strictly exceeds the threshold, otherwise the script is
left unassigned (and is therefore treated as critical downstream).
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .categories import CATEGORIES, CATEGORY_INDEX, N_CATEGORIES, UNASSIGNED
from .dataset import LabeledDataset, stratified_split
from .features import FeatureVector

DEFAULT_HIDDEN = (350, 50)
DEFAULT_THRESHOLD = 0.5


class TrainingDiverged(RuntimeError):
    """Raised when the loss stops being finite."""


@dataclass
class ModelParameters:
    """Weights and biases for each layer, plus provenance metadata."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    vocab_version: str = ""
    category_encoding: dict[str, int] = field(
        default_factory=lambda: dict(CATEGORY_INDEX)
    )
    version: str = ""

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.layer_dims)
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("layer count does not match layer_dims")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise ValueError(f"layer {i} has shape {w.shape}, expected "
                                 f"{(dims[i], dims[i + 1])}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i} contains non-finite values")
        self.layer_dims = dims

    @property
    def n_features(self) -> int:
        return self.layer_dims[0]

    def copy(self) -> "ModelParameters":
        return replace(
            self,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            category_encoding=dict(self.category_encoding),
        )


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 64
    epochs: int = 60
    seed: int = 0
    l2_penalty: float = 0.0
    early_stop_patience: int = 0  # 0 disables early stopping

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        if self.l2_penalty < 0 or self.early_stop_patience < 0:
            raise ValueError("penalties and patience must be nonnegative")


@dataclass(frozen=True)
class ClassificationResult:
    """Gated prediction: a category (or unassigned) with its confidence."""

    category: str
    confidence: float
    probs: np.ndarray


def init_model(
    n_features: int,
    seed: int = 0,
    hidden: tuple[int, ...] = DEFAULT_HIDDEN,
    vocab_version: str = "",
) -> ModelParameters:
    """He-initialized network of shape (n_features, *hidden, 8)."""
    if n_features < 1:
        raise ValueError("n_features must be at least 1")
    dims = (n_features, *hidden, N_CATEGORIES)
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParameters(
        layer_dims=dims, weights=weights, biases=biases, vocab_version=vocab_version
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_input(model: ModelParameters, x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        x = x.counts
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] != model.n_features:
        raise ValueError(
            f"input has {arr.shape[-1]} features, model expects {model.n_features}"
        )
    return arr


def _forward_pass(model: ModelParameters, X: np.ndarray) -> list[np.ndarray]:
    """Return layer activations [a0, a1, ..., probs]."""
    activations = [X]
    a = X
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        a = softmax(z) if i == last else np.maximum(z, 0.0)
        activations.append(a)
    return activations


def forward(model: ModelParameters, x) -> np.ndarray:
    """Probabilities over the 8 categories; accepts a vector or a matrix."""
    arr = _as_input(model, x)
    single = arr.ndim == 1
    probs = _forward_pass(model, np.atleast_2d(arr))[-1]
    return probs[0] if single else probs


def cross_entropy(model: ModelParameters, X, y: np.ndarray) -> float:
    """Mean negative log-likelihood of the true categories."""
    probs = forward(model, np.atleast_2d(_as_input(model, X)))
    picked = probs[np.arange(len(y)), np.asarray(y, dtype=np.int64)]
    return float(-np.log(np.maximum(picked, 1e-300)).mean())


def _gradients(
    model: ModelParameters, X: np.ndarray, y: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backprop gradients of the mean cross-entropy over the batch."""
    n = len(y)
    acts = _forward_pass(model, X)
    delta = acts[-1].copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads_w: list[np.ndarray] = [None] * len(model.weights)  # type: ignore[list-item]
    grads_b: list[np.ndarray] = [None] * len(model.biases)  # type: ignore[list-item]
    for i in reversed(range(len(model.weights))):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return grads_w, grads_b


def train(
    model: ModelParameters,
    dataset: LabeledDataset,
    cfg: TrainConfig | None = None,
) -> tuple[ModelParameters, list[float]]:
    """Mini-batch gradient descent; returns (trained model, loss history).

    ``loss_history[0]`` is the full-dataset loss before any update, then
    one entry per epoch. With ``early_stop_patience`` set, a stratified
    20% validation slice is carved out of the dataset and the parameters
    from the best validation epoch are returned.
    """
    cfg = cfg or TrainConfig()
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if dataset.n_features != model.n_features:
        raise ValueError("dataset feature count does not match model")

    if cfg.early_stop_patience > 0 and len(dataset) >= 10:
        train_set, val_set = stratified_split(dataset, 0.2, seed=cfg.seed)
        if len(val_set) == 0:
            train_set, val_set = dataset, None
    else:
        train_set, val_set = dataset, None

    model = model.copy()
    X = train_set.X.astype(np.float64)
    y = train_set.y
    rng = np.random.default_rng(cfg.seed)
    losses = [cross_entropy(model, X, y)]
    best: tuple[float, ModelParameters] | None = None
    stall = 0

    for _ in range(cfg.epochs):
        order = rng.permutation(len(y))
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            grads_w, grads_b = _gradients(model, X[batch], y[batch])
            for i in range(len(model.weights)):
                step = grads_w[i]
                if cfg.l2_penalty:
                    step = step + cfg.l2_penalty * model.weights[i]
                model.weights[i] -= cfg.learning_rate * step
                model.biases[i] -= cfg.learning_rate * grads_b[i]
        epoch_loss = cross_entropy(model, X, y)
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(
                f"loss became non-finite after epoch {len(losses)}; "
                f"lower the learning rate (current {cfg.learning_rate})"
            )
        losses.append(epoch_loss)

        if val_set is not None:
            val_loss = cross_entropy(model, val_set.X, val_set.y)
            if best is None or val_loss < best[0] - 1e-9:
                best = (val_loss, model.copy())
                stall = 0
            else:
                stall += 1
                if stall >= cfg.early_stop_patience:
                    break

    if best is not None:
        model = best[1]
    return model, losses


def gradient_check(
    model: ModelParameters,
    X,
    y: np.ndarray,
    epsilon: float = 1e-5,
    n_coords: int = 200,
    seed: int = 0,
) -> float:
    """Max relative error between backprop and central finite differences.

    Samples ``n_coords`` parameter coordinates (at least 200 recommended)
    and perturbs each by ±epsilon around the current value.
    """
    X = np.atleast_2d(_as_input(model, X)).astype(np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("batch is empty")
    grads_w, grads_b = _gradients(model, X, y)
    tensors = [(model.weights, grads_w), (model.biases, grads_b)]
    sizes = [t.size for params, _ in tensors for t in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_coords, total), replace=False)

    flat_params = [t for params, _ in tensors for t in params]
    flat_grads = [g for _, grads in tensors for g in grads]
    offsets = np.cumsum([0] + sizes)

    worst = 0.0
    for pick in picks:
        which = int(np.searchsorted(offsets, pick, side="right")) - 1
        local = int(pick - offsets[which])
        tensor = flat_params[which]
        idx = np.unravel_index(local, tensor.shape)
        original = tensor[idx]
        tensor[idx] = original + epsilon
        up = cross_entropy(model, X, y)
        tensor[idx] = original - epsilon
        down = cross_entropy(model, X, y)
        tensor[idx] = original
        numeric = (up - down) / (2.0 * epsilon)
        analytic = flat_grads[which][idx]
        # the 1e-6 floor keeps finite-difference rounding noise on
        # exactly-zero gradients (dead ReLU paths) from reading as error
        denom = max(abs(numeric) + abs(analytic), 1e-6)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst


def gate(probs: np.ndarray, threshold: float) -> tuple[str, float]:
    """Confidence gate: the argmax category only if it strictly beats
    ``threshold``, else unassigned. Ties go to the lowest category index."""
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must be in [0, 1)")
    probs = np.asarray(probs, dtype=np.float64)
    best = int(np.argmax(probs))
    confidence = float(probs[best])
    if confidence > threshold:
        return CATEGORIES[best], confidence
    return UNASSIGNED, confidence


def assign_category(
    model: ModelParameters, x, threshold: float = DEFAULT_THRESHOLD
) -> ClassificationResult:
    """Classify one script's feature vector through the confidence gate."""
    probs = forward(model, x)
    if probs.ndim != 1:
        raise ValueError("assign_category takes a single feature vector")
    category, confidence = gate(probs, threshold)
    return ClassificationResult(category=category, confidence=confidence, probs=probs)


# --- evaluation -------------------------------------------------------------

@dataclass
class EvalReport:
    confusion: np.ndarray  # [true, predicted], assigned predictions only
    per_class: dict[str, dict[str, float]]
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    accuracy: float
    unassigned: int = 0

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "per_class": self.per_class,
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
            "accuracy": self.accuracy,
            "unassigned": self.unassigned,
        }


def evaluate(
    model: ModelParameters, dataset: LabeledDataset, threshold: float = 0.0
) -> EvalReport:
    """Confusion matrix and support-weighted precision/recall/F1.

    The default threshold of 0 disables the gate so every row lands in
    the confusion matrix; with a positive threshold, unassigned
    predictions are counted separately and excluded from the matrix.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    probs = forward(model, dataset.X)
    best = probs.argmax(axis=1)
    confident = probs[np.arange(len(best)), best] > threshold
    k = N_CATEGORIES
    confusion = np.zeros((k, k), dtype=np.int64)
    for truth, pred in zip(dataset.y[confident], best[confident]):
        confusion[truth, pred] += 1

    support = np.bincount(dataset.y, minlength=k).astype(np.int64)
    per_class: dict[str, dict[str, float]] = {}
    precisions = np.zeros(k)
    recalls = np.zeros(k)
    f1s = np.zeros(k)
    for c in range(k):
        tp = confusion[c, c]
        predicted = confusion[:, c].sum()
        precision = tp / predicted if predicted else 0.0
        recall = tp / support[c] if support[c] else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if (precision + recall) > 0
            else 0.0
        )
        precisions[c], recalls[c], f1s[c] = precision, recall, f1
        per_class[CATEGORIES[c]] = {
            "precision": float(precision),
            "recall": float(recall),
            "f1": float(f1),
            "support": int(support[c]),
        }

    total = support.sum()
    weighted = lambda values: float((values * support).sum() / total)
    accuracy = float(np.trace(confusion) / total)
    return EvalReport(
        confusion=confusion,
        per_class=per_class,
        weighted_precision=weighted(precisions),
        weighted_recall=weighted(recalls),
        weighted_f1=weighted(f1s),
        accuracy=accuracy,
        unassigned=int((~confident).sum()),
    )


# --- model file I/O ---------------------------------------------------------

def save_model(
    model: ModelParameters,
    path: str | Path,
    threshold_default: float = DEFAULT_THRESHOLD,
) -> str:
    """Write the model file; returns the (possibly computed) version id.

    Floats are serialized as shortest round-tripping decimals, so loading
    reproduces the exact in-memory parameter values.
    """
    version = model.version
    if not version:
        digest = hashlib.sha256()
        for w, b in zip(model.weights, model.biases):
            digest.update(w.tobytes())
            digest.update(b.tobytes())
        version = f"nn-{digest.hexdigest()[:12]}"
    payload = {
        "version": version,
        "vocab_version": model.vocab_version,
        "category_encoding": model.category_encoding,
        "layer_dims": list(model.layer_dims),
        "layers": [
            {"weights": w.tolist(), "bias": b.tolist()}
            for w, b in zip(model.weights, model.biases)
        ],
        "threshold_default": threshold_default,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")
    return version


def load_model(path: str | Path) -> tuple[ModelParameters, float]:
    """Read a model file; returns (model, threshold_default)."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    dims = tuple(payload["layer_dims"])
    weights = [
        np.asarray(layer["weights"], dtype=np.float64)
        for layer in payload["layers"]
    ]
    biases = [
        np.asarray(layer["bias"], dtype=np.float64) for layer in payload["layers"]
    ]
    model = ModelParameters(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        vocab_version=payload["vocab_version"],
        category_encoding={k: int(v) for k, v in payload["category_encoding"].items()},
        version=payload["version"],
    )
    return model, float(payload.get("threshold_default", DEFAULT_THRESHOLD))
