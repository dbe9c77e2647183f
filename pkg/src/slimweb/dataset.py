"""Labeled feature matrices and split helpers."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .categories import CATEGORIES, CATEGORY_INDEX
from .features import FeatureVector, read_feature_matrix, write_feature_matrix


@dataclass
class LabeledDataset:
    """Feature rows with category labels, tied to one vocabulary version.

    ``X`` is an ``(n, d)`` int64 count matrix, ``y`` the ``(n,)`` int64
    category codes (0..7). ``keys`` optionally names each row (script URL
    or ``hash:`` key) for traceability.
    """

    X: np.ndarray
    y: np.ndarray
    vocab_version: str
    keys: list[str] | None = None
    split_seed: int = 0

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-dimensional")
        if len(self.X) != len(self.y):
            raise ValueError("X and y row counts differ")
        if len(self.y) and not ((self.y >= 0) & (self.y < len(CATEGORIES))).all():
            raise ValueError("labels must be valid category codes")
        if self.keys is not None and len(self.keys) != len(self.y):
            raise ValueError("keys and y lengths differ")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def rows(self) -> Iterator[tuple[FeatureVector, str]]:
        """Iterate ``(FeatureVector, category)`` pairs."""
        for i in range(len(self)):
            yield (
                FeatureVector(counts=self.X[i], vocab_version=self.vocab_version),
                CATEGORIES[self.y[i]],
            )

    def category_counts(self) -> dict[str, int]:
        counts = Counter(int(code) for code in self.y)
        return {cat: counts.get(i, 0) for i, cat in enumerate(CATEGORIES)}

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        keys = [self.keys[i] for i in indices] if self.keys is not None else None
        return LabeledDataset(
            X=self.X[indices],
            y=self.y[indices],
            vocab_version=self.vocab_version,
            keys=keys,
            split_seed=self.split_seed,
        )

    def to_jsonl(self, path: str | Path) -> int:
        keys = self.keys or [f"row:{i}" for i in range(len(self))]
        return write_feature_matrix(
            path,
            (
                (keys[i], CATEGORIES[self.y[i]],
                 FeatureVector(counts=self.X[i], vocab_version=self.vocab_version))
                for i in range(len(self))
            ),
        )

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "LabeledDataset":
        keys: list[str] = []
        labels: list[int] = []
        rows: list[np.ndarray] = []
        version = ""
        for key, label, vector in read_feature_matrix(path):
            if label is None:
                continue  # unlabeled pool rows share the file format
            if version and vector.vocab_version != version:
                raise ValueError(f"{path}: mixed vocabulary versions")
            version = vector.vocab_version
            keys.append(key)
            labels.append(CATEGORY_INDEX[label])
            rows.append(vector.counts)
        if not rows:
            raise ValueError(f"{path}: no labeled rows")
        return cls(
            X=np.stack(rows),
            y=np.asarray(labels, dtype=np.int64),
            vocab_version=version,
            keys=keys,
        )


def stratified_split(
    dataset: LabeledDataset, holdout_fraction: float = 0.2, seed: int = 0
) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded per-category shuffle split into (train, holdout)."""
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx: list[np.ndarray] = []
    hold_idx: list[np.ndarray] = []
    for code in np.unique(dataset.y):
        members = np.flatnonzero(dataset.y == code)
        rng.shuffle(members)
        n_hold = int(round(len(members) * holdout_fraction))
        hold_idx.append(members[:n_hold])
        train_idx.append(members[n_hold:])
    train = np.sort(np.concatenate(train_idx))
    hold = np.sort(np.concatenate(hold_idx)) if hold_idx else np.empty(0, np.int64)
    return dataset.subset(train), dataset.subset(hold)
