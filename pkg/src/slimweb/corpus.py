"""Crawl ingestion: script discovery, entity matching, dataset building.

Training labels come from a bundled snapshot of known third-party
entities (library/provider name, serving-domain suffixes, category).
A crawled script is labeled when its serving host matches an entity
domain suffix on whole-label boundaries; everything else lands in the
unlabeled pool and can only be classified, never used for training.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from html.parser import HTMLParser
from importlib import resources
from pathlib import Path
from urllib.parse import urljoin, urlparse

import numpy as np

from .categories import CATEGORIES, CATEGORY_INDEX
from .dataset import LabeledDataset
from .features import Vocabulary, extract_features

log = logging.getLogger(__name__)

BUNDLED_ENTITIES = "entities.json"

# Upstream entity files use their own category vocabulary; anything not
# in this table is skipped (and counted) at load time.
SOURCE_CATEGORY_MAP = {
    "ad": "advertising",
    "advertising": "advertising",
    "analytics": "analytics",
    "social": "social",
    "video": "video",
    "customer-success": "customer_success",
    "customer_success": "customer_success",
    "utility": "utility",
    "hosting": "hosting",
    "content": "content",
}


def content_hash(source: bytes) -> str:
    return hashlib.sha256(source).hexdigest()


@dataclass(frozen=True)
class ScriptRecord:
    """One crawled JS element. ``url`` is empty for inline scripts."""

    url: str
    source: bytes
    page_url: str
    content_hash: str = ""
    fetched_at: int = 0

    def __post_init__(self) -> None:
        if self.url and not urlparse(self.url).scheme:
            raise ValueError(f"script url must be absolute: {self.url!r}")
        digest = content_hash(self.source)
        if self.content_hash and self.content_hash != digest:
            raise ValueError("content_hash does not match source")
        object.__setattr__(self, "content_hash", digest)

    @property
    def key(self) -> str:
        """Exact URL for external scripts, ``hash:<digest>`` for inline."""
        return self.url if self.url else f"hash:{self.content_hash}"


@dataclass(frozen=True)
class Entity:
    name: str
    domains: tuple[str, ...]
    category: str

    def __post_init__(self) -> None:
        if not self.domains:
            raise ValueError(f"entity {self.name!r} has no domains")
        if self.category not in CATEGORY_INDEX:
            raise ValueError(f"entity {self.name!r} has bad category "
                             f"{self.category!r}")


class EntityRepository:
    """Suffix-indexed entity set; read-only after construction."""

    def __init__(self, entities: list[Entity]):
        self.entities = list(entities)
        self.suffix_index: dict[str, Entity] = {}
        for entity in self.entities:
            for suffix in entity.domains:
                suffix = suffix.lower().lstrip(".")
                existing = self.suffix_index.get(suffix)
                if existing is not None and existing is not entity:
                    log.warning(
                        "entity domain conflict on %r: keeping %s, ignoring %s",
                        suffix, existing.name, entity.name,
                    )
                    continue
                self.suffix_index[suffix] = entity

    def __len__(self) -> int:
        return len(self.entities)

    def match_host(self, hostname: str) -> Entity | None:
        """Longest label-aligned domain-suffix match, or None."""
        labels = hostname.lower().strip(".").split(".")
        for start in range(len(labels)):
            candidate = ".".join(labels[start:])
            entity = self.suffix_index.get(candidate)
            if entity is not None:
                return entity
        return None

    def category_counts(self) -> dict[str, int]:
        counts = {cat: 0 for cat in CATEGORIES}
        for entity in self.entities:
            counts[entity.category] += 1
        return counts


def load_entities(path: str | Path) -> EntityRepository:
    """Load an entities file (JSON array of name/domains/category).

    Records whose category has no mapping to the eight categories are
    skipped with a logged count; structurally broken records raise.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read entities file {path}: {exc}") from exc
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON array of entities")
    entities: list[Entity] = []
    skipped = 0
    for i, record in enumerate(data):
        try:
            name = record["name"]
            domains = tuple(record["domains"])
            source_category = record["category"]
        except (TypeError, KeyError) as exc:
            raise ValueError(f"{path}: malformed entity record #{i}") from exc
        category = SOURCE_CATEGORY_MAP.get(source_category)
        if category is None:
            skipped += 1
            continue
        entities.append(Entity(name=name, domains=domains, category=category))
    if skipped:
        log.info("load_entities: skipped %d records with unmapped categories",
                 skipped)
    repo = EntityRepository(entities)
    repo.skipped_categories = skipped  # type: ignore[attr-defined]
    return repo


def builtin_entities() -> EntityRepository:
    """The bundled third-party entity snapshot."""
    ref = resources.files("slimweb").joinpath("data").joinpath(BUNDLED_ENTITIES)
    with resources.as_file(ref) as path:
        return load_entities(path)


def registrable_domain(url: str) -> str:
    """Lowercased hostname of ``url``; suffix matching happens elsewhere."""
    hostname = urlparse(url).hostname
    if not hostname:
        raise ValueError(f"url has no hostname: {url!r}")
    return hostname.lower()


def match_entity(url: str, repo: EntityRepository) -> tuple[Entity, str] | None:
    """Match a script URL's host against the repository; None on miss."""
    hostname = urlparse(url).hostname
    if not hostname:
        return None
    entity = repo.match_host(hostname)
    if entity is None:
        return None
    return entity, entity.category


class _ScriptTagParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.srcs: list[str] = []
        self.inline: list[str] = []
        self._in_inline_script = False
        self._inline_parts: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag != "script":
            return
        src = next((v for k, v in attrs if k == "src" and v), None)
        if src is not None:
            self.srcs.append(src)
        else:
            self._in_inline_script = True
            self._inline_parts = []

    def handle_startendtag(self, tag, attrs):
        if tag == "script":
            src = next((v for k, v in attrs if k == "src" and v), None)
            if src is not None:
                self.srcs.append(src)

    def handle_endtag(self, tag):
        if tag == "script" and self._in_inline_script:
            body = "".join(self._inline_parts)
            if body.strip():
                self.inline.append(body)
            self._in_inline_script = False

    def handle_data(self, data):
        if self._in_inline_script:
            self._inline_parts.append(data)


def _parse_scripts(html: str) -> _ScriptTagParser:
    parser = _ScriptTagParser()
    try:
        parser.feed(html)
        parser.close()
    except Exception:  # malformed HTML: keep whatever was collected
        log.debug("script tag scan stopped early on malformed HTML")
    return parser


def extract_script_urls(html: str, base_url: str) -> list[str]:
    """External script references, resolved and deduplicated in order."""
    if not urlparse(base_url).scheme:
        raise ValueError(f"base_url must be absolute: {base_url!r}")
    seen: set[str] = set()
    urls: list[str] = []
    for src in _parse_scripts(html).srcs:
        try:
            absolute = urljoin(base_url, src.strip())
        except ValueError:
            continue
        if absolute and absolute not in seen:
            seen.add(absolute)
            urls.append(absolute)
    return urls


def extract_inline_scripts(html: str) -> list[str]:
    """Bodies of script tags without a source attribute, document order."""
    return _parse_scripts(html).inline


def build_dataset(
    scripts: list[ScriptRecord],
    repo: EntityRepository,
    vocab: Vocabulary,
) -> tuple[LabeledDataset, list[ScriptRecord]]:
    """Split scripts into (entity-labeled dataset, unlabeled pool).

    Input is deduplicated by content hash first, so mirrored copies of a
    library contribute one row. Rows are sorted by content hash to keep
    the output independent of input order.

    At production crawl scale expect only a minority of scripts to match
    a known entity (roughly a quarter on a large popular-page crawl);
    the rest stay unlabeled and are usable for classification only.
    """
    unique: dict[str, ScriptRecord] = {}
    for record in scripts:
        unique.setdefault(record.content_hash, record)

    labeled: list[tuple[str, str, int]] = []  # (hash, key, category code)
    unlabeled: list[ScriptRecord] = []
    for digest in sorted(unique):
        record = unique[digest]
        match = match_entity(record.url, repo) if record.url else None
        if match is None:
            unlabeled.append(record)
        else:
            labeled.append((digest, record.key, CATEGORY_INDEX[match[1]]))

    if labeled:
        X = np.stack([
            extract_features(unique[digest].source, vocab).counts
            for digest, _, _ in labeled
        ])
        y = np.asarray([code for _, _, code in labeled], dtype=np.int64)
        keys = [key for _, key, _ in labeled]
    else:
        X = np.zeros((0, len(vocab)), dtype=np.int64)
        y = np.zeros(0, dtype=np.int64)
        keys = []
    dataset = LabeledDataset(X=X, y=y, vocab_version=vocab.version, keys=keys)
    log.info(
        "build_dataset: %d labeled / %d unlabeled; per category %s",
        len(dataset), len(unlabeled), dataset.category_counts(),
    )
    return dataset, unlabeled


# --- corpus directory layout -------------------------------------------------

def write_corpus_dir(scripts: list[ScriptRecord], root: str | Path) -> int:
    """Persist scripts as <hash>.js files plus an index.jsonl sidecar."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    written = 0
    with open(root / "index.jsonl", "w", encoding="utf-8") as index:
        for record in scripts:
            (root / f"{record.content_hash}.js").write_bytes(record.source)
            index.write(json.dumps({
                "hash": record.content_hash,
                "url": record.url,
                "page_url": record.page_url,
                "fetched_at": record.fetched_at,
            }) + "\n")
            written += 1
    return written


def read_corpus_dir(root: str | Path) -> list[ScriptRecord]:
    """Load a corpus directory written by :func:`write_corpus_dir`."""
    root = Path(root)
    records: list[ScriptRecord] = []
    with open(root / "index.jsonl", "r", encoding="utf-8") as index:
        for line in index:
            line = line.strip()
            if not line:
                continue
            meta = json.loads(line)
            source = (root / f"{meta['hash']}.js").read_bytes()
            records.append(ScriptRecord(
                url=meta["url"],
                source=source,
                page_url=meta.get("page_url", ""),
                fetched_at=int(meta.get("fetched_at", 0)),
            ))
    return records
