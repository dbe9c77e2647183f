"""Synthetic marker-feature datasets for desk-scale training and selection.

Each of the eight categories owns one marker feature (slots 0..7). A row
of class ``c`` draws low Poisson noise everywhere and a strong extra count
on marker ``c``, so the Bayes-optimal rule "argmax over markers" is
essentially error-free and a correctly trained classifier must approach
100% accuracy. The remaining slots are pure noise, which is exactly what
feature elimination should discard.
"""

from __future__ import annotations

import numpy as np

from .categories import CATEGORIES
from .dataset import LabeledDataset
from .features import Vocabulary

MARKER_NAMES = tuple(f"marker_{cat}" for cat in CATEGORIES)


def synthetic_vocabulary(n_features: int) -> Vocabulary:
    """Vocabulary with the eight markers first, noise names after."""
    if n_features < len(MARKER_NAMES):
        raise ValueError("need at least one feature per category")
    names = MARKER_NAMES + tuple(
        f"noise_{i:04d}" for i in range(n_features - len(MARKER_NAMES))
    )
    return Vocabulary(names=names)  # content-derived version round-trips


def marker_dataset(
    n_rows: int,
    n_features: int = 64,
    seed: int = 0,
    noise_mean: float = 0.7,
    marker_boost: int = 4,
) -> tuple[LabeledDataset, Vocabulary]:
    """Generate a balanced, linearly separable 8-class count dataset."""
    vocab = synthetic_vocabulary(n_features)
    rng = np.random.default_rng(seed)
    y = rng.integers(0, len(CATEGORIES), size=n_rows)
    X = rng.poisson(noise_mean, size=(n_rows, n_features))
    X[np.arange(n_rows), y] += marker_boost + rng.poisson(3.0, size=n_rows)
    dataset = LabeledDataset(
        X=X.astype(np.int64), y=y, vocab_version=vocab.version, split_seed=seed
    )
    return dataset, vocab
