"""Recursive feature elimination over a count vocabulary.

Each round fits a single-layer softmax classifier on the surviving
features, ranks features by the L2 norm of their weight rows, and drops
the weakest until the target size remains. The whole procedure is
deterministic: the ranking fit starts from zeros and runs full-batch
gradient descent, so there is no randomness to seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .categories import N_CATEGORIES
from .dataset import LabeledDataset
from .features import Vocabulary

log = logging.getLogger(__name__)


@dataclass
class RfeConfig:
    target_k: int = 508
    step: int | None = None  # None: drop max(1, 5% of remaining) per round
    ranking_trainer: str = "softmax"

    def __post_init__(self) -> None:
        if self.target_k < 1:
            raise ValueError("target_k must be positive")
        if self.step is not None and self.step < 1:
            raise ValueError("step must be at least 1")
        if self.ranking_trainer not in RANKING_TRAINERS:
            raise ValueError(
                f"unknown ranking trainer {self.ranking_trainer!r}; "
                f"known: {sorted(RANKING_TRAINERS)}"
            )


def softmax_importance(
    X: np.ndarray,
    y: np.ndarray,
    iters: int = 120,
    learning_rate: float = 0.5,
    l2_penalty: float = 1e-3,
) -> np.ndarray:
    """Feature importances from a softmax regression fit.

    Features are standardized internally (fit-local, never recorded
    anywhere) so the importances are scale-free; the returned score for
    feature ``i`` is the L2 norm of row ``i`` of the weight matrix.
    """
    n, d = X.shape
    X = X.astype(np.float64)
    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma[sigma == 0] = 1.0
    Z = (X - mu) / sigma

    W = np.zeros((d, N_CATEGORIES))
    b = np.zeros(N_CATEGORIES)
    onehot = np.zeros((n, N_CATEGORIES))
    onehot[np.arange(n), y] = 1.0
    for _ in range(iters):
        logits = Z @ W + b
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        probs = e / e.sum(axis=1, keepdims=True)
        delta = (probs - onehot) / n
        W -= learning_rate * (Z.T @ delta + l2_penalty * W)
        b -= learning_rate * delta.sum(axis=0)
    return np.linalg.norm(W, axis=1)


RANKING_TRAINERS = {"softmax": softmax_importance}


def rfe_select(
    dataset: LabeledDataset, vocab: Vocabulary, cfg: RfeConfig | None = None
) -> tuple[Vocabulary, list[str]]:
    """Shrink ``vocab`` to ``cfg.target_k`` names; returns the surviving
    vocabulary (input order preserved) and the removed names worst-first."""
    cfg = cfg or RfeConfig()
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if dataset.n_features != len(vocab):
        raise ValueError("dataset feature count does not match vocabulary")
    if cfg.target_k > len(vocab):
        raise ValueError(
            f"target_k={cfg.target_k} exceeds vocabulary size {len(vocab)}"
        )

    rank = RANKING_TRAINERS[cfg.ranking_trainer]
    active = np.arange(len(vocab))
    eliminated: list[str] = []
    while len(active) > cfg.target_k:
        scores = rank(dataset.X[:, active], dataset.y)
        per_round = cfg.step or max(1, int(0.05 * len(active)))
        n_drop = min(per_round, len(active) - cfg.target_k)
        # stable order: ties drop the lower original index first
        order = np.lexsort((active, scores))
        drop_local = order[:n_drop]
        eliminated.extend(vocab.names[active[i]] for i in drop_local)
        keep = np.ones(len(active), dtype=bool)
        keep[drop_local] = False
        active = active[keep]
        log.debug("rfe round: %d features remain", len(active))

    survivors = tuple(vocab.names[i] for i in sorted(active))
    selected = Vocabulary(
        names=survivors,
        selected_from=vocab.version,
    )
    return selected, eliminated
