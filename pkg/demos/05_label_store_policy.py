"""The label store's capacity, fallbacks, and the criticality policy.

Run: python demos/05_label_store_policy.py
"""

import tempfile
import time
from pathlib import Path

from slimweb.store import (
    LabelEntry,
    LabelStore,
    Policy,
    StoreConfig,
    decide_criticality,
    default_policy,
)

now = int(time.time())
root = Path(tempfile.mkdtemp(prefix="slimweb-demo-"))

# a deliberately tiny capacity so eviction is visible
store = LabelStore(StoreConfig(path=root / "labels.db", capacity_bytes=1200))
for i in range(12):
    store.put(LabelEntry(
        key=f"https://cdn{i}.tracker.example/t.js",
        domain=f"cdn{i}.tracker.example",
        category="analytics",
        confidence=0.9,
        labeled_at=now - 100 + i,
        last_used=now - 100 + i,
    ))
print(f"after 12 puts into a 1200-byte store: {len(store)} entries survive, "
      f"{store.size_bytes} bytes used (oldest were evicted first)")

# domain consensus: three agreeing labels on one domain let an unseen URL
# inherit the label, flagged as inferred
for i in range(3):
    store.put(LabelEntry(
        key=f"https://pixel.example/{i}.js", domain="pixel.example",
        category="advertising", confidence=0.8 + i * 0.05, labeled_at=now,
    ))
inferred = store.get("https://pixel.example/brand-new.js")
print(f"\nunseen URL on a unanimous domain -> {inferred.category} "
      f"(inferred={inferred.inferred}, confidence {inferred.confidence:.2f})")

snapshot = store.snapshot_since(now - 1)
print(f"snapshot_since(now-1): {len(snapshot)} fresh entries to distribute")

print("\npolicy decisions (default: advertising and analytics blockable):")
policy = default_policy()
for category in ("analytics", "advertising", "video", "unassigned"):
    print(f"  {category:<12} -> {decide_criticality(category, policy)}")

page = "https://broken-page.example"
fixed = Policy(per_page_overrides={page: frozenset({"analytics"})})
print(f"\nuser re-enabled analytics on {page}:")
print("  analytics there ->",
      decide_criticality("analytics", fixed, page))
print("  analytics elsewhere ->",
      decide_criticality("analytics", fixed, "https://other.example"))
store.close()
