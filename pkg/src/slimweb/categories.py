"""The eight script categories and their stable integer encoding."""

from __future__ import annotations

# Order is load-bearing: it fixes the integer encoding recorded in model
# files and the class axis of every probability vector.
CATEGORIES: tuple[str, ...] = (
    "advertising",
    "analytics",
    "social",
    "video",
    "customer_success",
    "utility",
    "hosting",
    "content",
)

CATEGORY_INDEX: dict[str, int] = {name: i for i, name in enumerate(CATEGORIES)}

N_CATEGORIES = len(CATEGORIES)

# Fallback label when the classifier's confidence does not clear the
# threshold. Never blockable: policies must treat it as critical.
UNASSIGNED = "unassigned"

# Every string a label record may carry.
LABEL_VALUES: tuple[str, ...] = CATEGORIES + (UNASSIGNED,)


def require_category(name: str) -> str:
    """Return ``name`` if it is one of the eight categories, else raise."""
    if name not in CATEGORY_INDEX:
        raise ValueError(f"unknown category: {name!r}")
    return name


def require_label(name: str) -> str:
    """Like :func:`require_category` but also accepts ``unassigned``."""
    if name not in LABEL_VALUES:
        raise ValueError(f"unknown label: {name!r}")
    return name
