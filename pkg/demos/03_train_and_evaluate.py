"""Training the classifier and reading its evaluation report.

Run: python demos/03_train_and_evaluate.py
"""

import numpy as np

from slimweb.dataset import stratified_split
from slimweb.model import (
    TrainConfig,
    assign_category,
    evaluate,
    forward,
    init_model,
    load_model,
    save_model,
    train,
)
from slimweb.synth import marker_dataset

dataset, vocab = marker_dataset(6000, n_features=64, seed=0)
train_set, holdout = stratified_split(dataset, 0.2, seed=0)
print(f"synthetic dataset: {len(train_set)} train / {len(holdout)} held out, "
      f"{dataset.n_features} features")

model = init_model(dataset.n_features, seed=0, vocab_version=vocab.version)
print("network dims:", model.layer_dims)

trained, losses = train(model, train_set, TrainConfig(epochs=30, seed=0))
print(f"cross-entropy: {losses[0]:.4f} before training "
      f"(ln 8 = {np.log(8):.4f}), {losses[-1]:.4f} after {len(losses)-1} epochs")

report = evaluate(trained, holdout)
print(f"\nheld-out accuracy {report.accuracy:.4f}, "
      f"weighted P/R/F1 = {report.weighted_precision:.3f}/"
      f"{report.weighted_recall:.3f}/{report.weighted_f1:.3f}")
print("per-category F1:")
for category, metrics in report.per_class.items():
    print(f"  {category:<17} f1={metrics['f1']:.3f} "
          f"(support {metrics['support']})")

# the confidence gate: confident predictions get a category, the rest stay
# unassigned and will be treated as critical downstream
confident = assign_category(trained, holdout.X[0], threshold=0.5)
print(f"\nconfident sample -> {confident.category} "
      f"(confidence {confident.confidence:.3f})")
ambiguous = assign_category(trained, np.zeros(dataset.n_features), 0.5)
print(f"all-zero sample  -> {ambiguous.category} "
      f"(confidence {ambiguous.confidence:.3f})")

version = save_model(trained, "/tmp/slimweb-demo-model.json")
reloaded, threshold = load_model("/tmp/slimweb-demo-model.json")
same = all((a == b).all() for a, b in zip(trained.weights, reloaded.weights))
print(f"\nmodel file round trip: version {version}, "
      f"default threshold {threshold}, bitwise identical: {same}")
