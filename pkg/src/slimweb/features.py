"""Feature vectors: fixed-order API-name counts over a vocabulary.

A vocabulary is an ordered list of API token names. A script's feature
vector is the per-name occurrence count of its identifier tokens. The
package bundles a large catalog of DOM / HTML API names under
``slimweb/data/api_catalog.txt``; trained models record the vocabulary
version so a mismatched catalog cannot be silently substituted.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .tokenizer import tokenize

BUNDLED_CATALOG = "api_catalog.txt"


def _names_version(names: Iterable[str]) -> str:
    digest = hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()
    return f"sha256:{digest[:16]}"


@dataclass(frozen=True)
class Vocabulary:
    """Ordered, duplicate-free list of API token names."""

    names: tuple[str, ...]
    version: str = ""
    selected_from: str | None = None

    def __post_init__(self) -> None:
        if not self.names:
            raise ValueError("vocabulary is empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("vocabulary contains duplicate names")
        if not self.version:
            object.__setattr__(self, "version", _names_version(self.names))

    def __len__(self) -> int:
        return len(self.names)

    @property
    def index(self) -> dict[str, int]:
        cached = getattr(self, "_index", None)
        if cached is None:
            cached = {name: i for i, name in enumerate(self.names)}
            object.__setattr__(self, "_index", cached)
        return cached


@dataclass(frozen=True)
class FeatureVector:
    """Nonnegative token counts, one slot per vocabulary name."""

    counts: np.ndarray
    vocab_version: str

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if (counts < 0).any():
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    def __len__(self) -> int:
        return len(self.counts)


def extract_features(source: str | bytes, vocab: Vocabulary) -> FeatureVector:
    """Count occurrences of each vocabulary name among the source tokens."""
    index = vocab.index
    counts = np.zeros(len(vocab), dtype=np.int64)
    for token in tokenize(source):
        slot = index.get(token)
        if slot is not None:
            counts[slot] += 1
    return FeatureVector(counts=counts, vocab_version=vocab.version)


def load_api_catalog(path: str | Path) -> Vocabulary:
    """Load a vocabulary from a catalog file (one name per line).

    Blank lines and ``#`` comment lines are ignored. A duplicate name is
    an error: slot positions would become ambiguous.
    """
    text = Path(path).read_text(encoding="utf-8")
    names: list[str] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in seen:
            raise ValueError(f"{path}:{lineno}: duplicate catalog name {line!r}")
        seen.add(line)
        names.append(line)
    if not names:
        raise ValueError(f"{path}: catalog contains no names")
    return Vocabulary(names=tuple(names))


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    """Write a vocabulary in the catalog file format."""
    lines = []
    if vocab.selected_from:
        lines.append(f"# selected from: {vocab.selected_from}")
    lines.extend(vocab.names)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def builtin_catalog() -> Vocabulary:
    """The bundled DOM / HTML API name catalog."""
    ref = resources.files("slimweb").joinpath("data").joinpath(BUNDLED_CATALOG)
    with resources.as_file(ref) as path:
        return load_api_catalog(path)


# --- feature matrix interchange (JSON Lines) -------------------------------

def write_feature_matrix(
    path: str | Path,
    rows: Iterable[tuple[str, str | None, FeatureVector]],
) -> int:
    """Write ``(key, label, vector)`` rows as JSONL; returns the row count."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for key, label, vector in rows:
            fh.write(json.dumps({
                "key": key,
                "label": label,
                "counts": vector.counts.tolist(),
                "vocab_version": vector.vocab_version,
            }) + "\n")
            count += 1
    return count


def read_feature_matrix(
    path: str | Path,
) -> Iterator[tuple[str, str | None, FeatureVector]]:
    """Yield ``(key, label, vector)`` rows from a feature-matrix JSONL file."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            yield obj["key"], obj.get("label"), FeatureVector(
                counts=np.asarray(obj["counts"], dtype=np.int64),
                vocab_version=obj["vocab_version"],
            )
