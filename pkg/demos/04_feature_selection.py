"""Recursive feature elimination: shrinking the catalog to what matters.

Run: python demos/04_feature_selection.py
(Scaled down from the production 1262->508 run so it finishes in seconds;
the acceptance suite exercises the full size.)
"""

from slimweb.rfe import RfeConfig, rfe_select
from slimweb.synth import marker_dataset

dataset, vocab = marker_dataset(1500, n_features=300, seed=3)
print(f"dataset: {len(dataset)} rows over {len(vocab)} features "
      f"(8 informative markers + {len(vocab) - 8} noise)")

selected, eliminated = rfe_select(dataset, vocab, RfeConfig(target_k=32))
print(f"\nselected {len(selected)} features "
      f"({len(eliminated)} eliminated, worst dropped first)")

markers = [name for name in selected.names if name.startswith("marker_")]
print(f"all 8 informative features survived: {len(markers) == 8}")
print("first surviving names:", selected.names[:12])
print("first eliminated (least informative):", eliminated[:5])
print(f"\nselection provenance: version {selected.version} "
      f"selected from {selected.selected_from}")

again, _ = rfe_select(dataset, vocab, RfeConfig(target_k=32))
print("rerun is deterministic:", again.names == selected.names)
