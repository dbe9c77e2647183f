"""Persistent label database and the criticality policy.

The store maps script keys (exact URL, or ``hash:<digest>`` for inline
scripts) to category labels and enforces a byte capacity with
least-recently-used eviction. Capacity is accounted in serialized
snapshot-line bytes, which makes the budget independent of the private
on-disk format (an append-only log that is compacted when it grows past
twice the live size).

Unknown scripts stay unknown: a lookup falls back to a domain-level
label only when every stored label on that domain agrees, and the
returned entry is flagged as inferred.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from urllib.parse import urlparse

from .categories import CATEGORIES, LABEL_VALUES, UNASSIGNED, require_label

log = logging.getLogger(__name__)

DEFAULT_CAPACITY_BYTES = 50 * 2**20  # label cache budget: 50 MB
DEFAULT_NONCRITICAL = frozenset({"advertising", "analytics"})


@dataclass
class LabelEntry:
    key: str
    domain: str
    category: str
    confidence: float
    labeled_at: int
    last_used: int = 0
    inferred: bool = False  # runtime-only: set on domain-consensus hits

    def __post_init__(self) -> None:
        if not self.key:
            raise ValueError("entry key is empty")
        require_label(self.category)
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")
        if self.last_used == 0:
            self.last_used = self.labeled_at


def snapshot_line(entry: LabelEntry) -> str:
    """Canonical interchange line for one entry (no trailing newline)."""
    return json.dumps({
        "key": entry.key,
        "domain": entry.domain,
        "category": entry.category,
        "confidence": entry.confidence,
        "labeled_at": entry.labeled_at,
    }, separators=(",", ":"))


def parse_snapshot_line(line: str) -> LabelEntry:
    obj = json.loads(line)
    return LabelEntry(
        key=obj["key"],
        domain=obj["domain"],
        category=require_label(obj["category"]),
        confidence=float(obj["confidence"]),
        labeled_at=int(obj["labeled_at"]),
    )


def entry_size(entry: LabelEntry) -> int:
    return len(snapshot_line(entry).encode("utf-8")) + 1  # newline included


@dataclass
class StoreConfig:
    path: str | Path
    capacity_bytes: int = DEFAULT_CAPACITY_BYTES

    def __post_init__(self) -> None:
        if self.capacity_bytes <= 0:
            raise ValueError("capacity_bytes must be positive")


class LabelStore:
    """Capacity-bounded key→label map; many readers, one writer."""

    def __init__(self, config: StoreConfig):
        self.config = config
        self._lock = threading.RLock()
        self._entries: dict[str, LabelEntry] = {}
        self._by_domain: dict[str, set[str]] = {}
        self._size = 0
        self._log_records = 0
        path = Path(config.path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.exists():
            self._replay(path)
        self._fh = open(path, "a", encoding="utf-8")

    # -- lifecycle

    def _replay(self, path: Path) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                self._log_records += 1
                try:
                    op = json.loads(line)
                    if op["op"] == "put":
                        entry = LabelEntry(
                            key=op["key"],
                            domain=op["domain"],
                            category=require_label(op["category"]),
                            confidence=float(op["confidence"]),
                            labeled_at=int(op["labeled_at"]),
                            last_used=int(op["last_used"]),
                        )
                        self._insert(entry)
                    elif op["op"] == "del":
                        self._remove(op["key"])
                    elif op["op"] == "touch":
                        entry = self._entries.get(op["key"])
                        if entry is not None:
                            entry.last_used = int(op["t"])
                except (ValueError, KeyError, TypeError):
                    log.warning("store %s: skipping corrupt log line", path)

    def close(self) -> None:
        with self._lock:
            self._fh.close()

    def __enter__(self) -> "LabelStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    @property
    def size_bytes(self) -> int:
        with self._lock:
            return self._size

    # -- private bookkeeping (callers hold the lock)

    def _insert(self, entry: LabelEntry) -> None:
        self._remove(entry.key)
        self._entries[entry.key] = entry
        self._by_domain.setdefault(entry.domain, set()).add(entry.key)
        self._size += entry_size(entry)

    def _remove(self, key: str) -> None:
        entry = self._entries.pop(key, None)
        if entry is None:
            return
        self._size -= entry_size(entry)
        keys = self._by_domain.get(entry.domain)
        if keys is not None:
            keys.discard(key)
            if not keys:
                del self._by_domain[entry.domain]

    def _append(self, record: dict) -> None:
        self._fh.write(json.dumps(record, separators=(",", ":")) + "\n")
        self._fh.flush()
        self._log_records += 1
        if self._log_records > max(4 * len(self._entries), 1024):
            self._compact()

    def _compact(self) -> None:
        path = Path(self.config.path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for entry in self._entries.values():
                fh.write(json.dumps(self._put_record(entry),
                                    separators=(",", ":")) + "\n")
        self._fh.close()
        os.replace(tmp, path)
        self._fh = open(path, "a", encoding="utf-8")
        self._log_records = len(self._entries)

    @staticmethod
    def _put_record(entry: LabelEntry) -> dict:
        return {
            "op": "put",
            "key": entry.key,
            "domain": entry.domain,
            "category": entry.category,
            "confidence": entry.confidence,
            "labeled_at": entry.labeled_at,
            "last_used": entry.last_used,
        }

    # -- operations

    def put(self, entry: LabelEntry) -> None:
        """Insert or replace; evicts LRU entries to stay within capacity."""
        needed = entry_size(entry)
        if needed > self.config.capacity_bytes:
            raise ValueError(
                f"entry for {entry.key!r} is {needed} bytes, larger than the "
                f"whole capacity {self.config.capacity_bytes}"
            )
        with self._lock:
            self._insert(entry)
            self._append(self._put_record(entry))
            while self._size > self.config.capacity_bytes:
                victim = min(
                    (e for e in self._entries.values() if e.key != entry.key),
                    key=lambda e: (e.last_used, e.labeled_at, e.key),
                )
                self._remove(victim.key)
                self._append({"op": "del", "key": victim.key})

    def get(self, key: str) -> LabelEntry | None:
        """Exact lookup, then domain-consensus fallback for URL keys."""
        now = int(time.time())
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None:
                entry.last_used = now
                self._append({"op": "touch", "key": key, "t": now})
                return replace(entry)
            domain = _domain_of_key(key)
            if not domain:
                return None
            peer_keys = self._by_domain.get(domain)
            if not peer_keys:
                return None
            peers = [self._entries[k] for k in peer_keys]
            categories = {p.category for p in peers}
            if len(categories) != 1:
                return None
            return LabelEntry(
                key=key,
                domain=domain,
                category=categories.pop(),
                confidence=min(p.confidence for p in peers),
                labeled_at=max(p.labeled_at for p in peers),
                last_used=now,
                inferred=True,
            )

    def snapshot_since(self, ts: int) -> list[LabelEntry]:
        """Entries labeled strictly after ``ts``, oldest first."""
        with self._lock:
            newer = [replace(e) for e in self._entries.values()
                     if e.labeled_at > ts]
        return sorted(newer, key=lambda e: (e.labeled_at, e.key))

    def keys(self) -> list[str]:
        with self._lock:
            return list(self._entries)

    def export_jsonl(self, path: str | Path) -> int:
        """Write all entries as snapshot lines; returns the count."""
        with self._lock:
            entries = sorted(self._entries.values(),
                             key=lambda e: (e.labeled_at, e.key))
            with open(path, "w", encoding="utf-8") as fh:
                for entry in entries:
                    fh.write(snapshot_line(entry) + "\n")
        return len(entries)

    def import_jsonl(self, path: str | Path) -> int:
        """Load snapshot lines via put(); malformed lines are skipped.

        last_used is reset to labeled_at, so freshly imported entries age
        by label time until they are actually used.
        """
        imported = 0
        skipped = 0
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = parse_snapshot_line(line)
                except (ValueError, KeyError, TypeError):
                    skipped += 1
                    continue
                self.put(entry)
                imported += 1
        if skipped:
            log.warning("import %s: skipped %d malformed lines", path, skipped)
        return imported


def _domain_of_key(key: str) -> str | None:
    if key.startswith("hash:"):
        return None
    try:
        hostname = urlparse(key).hostname
    except ValueError:
        return None
    return hostname.lower() if hostname else None


# --- criticality policy -------------------------------------------------------

@dataclass(frozen=True)
class Policy:
    """Which categories may be blocked, with per-page exceptions.

    ``per_page_overrides`` re-enables categories on one page origin:
    those categories are treated as critical there.
    """

    noncritical: frozenset[str] = DEFAULT_NONCRITICAL
    per_page_overrides: dict[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for cat in self.noncritical:
            if cat == UNASSIGNED or cat not in CATEGORIES:
                raise ValueError(f"{cat!r} cannot be marked noncritical")
        for origin, cats in self.per_page_overrides.items():
            for cat in cats:
                if cat not in CATEGORIES:
                    raise ValueError(
                        f"override for {origin!r} names unknown category {cat!r}"
                    )


def default_policy() -> Policy:
    return Policy()


def decide_criticality(
    category: str, policy: Policy, page_origin: str | None = None
) -> str:
    """Map a label to "critical" or "noncritical" under the policy.

    Unassigned is always critical. A per-page override makes the
    category critical again on that page only.
    """
    if category == UNASSIGNED or category not in policy.noncritical:
        return "critical"
    if page_origin is not None:
        if category in policy.per_page_overrides.get(page_origin, frozenset()):
            return "critical"
    return "noncritical"


def policy_to_json(policy: Policy) -> str:
    return json.dumps({
        "noncritical": sorted(policy.noncritical),
        "per_page_overrides": {
            origin: sorted(cats)
            for origin, cats in policy.per_page_overrides.items()
        },
    }, indent=1)


def policy_from_json(text: str) -> Policy:
    obj = json.loads(text)
    return Policy(
        noncritical=frozenset(obj.get("noncritical", [])),
        per_page_overrides={
            origin: frozenset(cats)
            for origin, cats in obj.get("per_page_overrides", {}).items()
        },
    )


def load_policy(path: str | Path) -> Policy:
    return policy_from_json(Path(path).read_text(encoding="utf-8"))


def save_policy(policy: Policy, path: str | Path) -> None:
    Path(path).write_text(policy_to_json(policy) + "\n", encoding="utf-8")
