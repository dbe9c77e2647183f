"""SlimWeb: classify page JavaScript without executing it, block the rest.

The package is organized as a small numpy library plus the two network
components built on it:

* :mod:`slimweb.tokenizer` / :mod:`slimweb.features` — JS lexing and
  API-name count vectors,
* :mod:`slimweb.rfe` — recursive feature elimination over a vocabulary,
* :mod:`slimweb.corpus` — crawl ingestion and entity-based labeling,
* :mod:`slimweb.model` — the feed-forward classifier and its metrics,
* :mod:`slimweb.store` — persisted label database and blocking policy,
* :mod:`slimweb.service` — the label distribution HTTP service,
* :mod:`slimweb.proxy` — the label-driven blocking forward proxy.
"""

from .categories import CATEGORIES, CATEGORY_INDEX, UNASSIGNED
from .features import (
    FeatureVector,
    Vocabulary,
    builtin_catalog,
    extract_features,
    load_api_catalog,
)
from .tokenizer import tokenize

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES",
    "CATEGORY_INDEX",
    "UNASSIGNED",
    "FeatureVector",
    "Vocabulary",
    "builtin_catalog",
    "extract_features",
    "load_api_catalog",
    "tokenize",
    "__version__",
]
