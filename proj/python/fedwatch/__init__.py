"""Python access to the fedwatch core: synthetic corpora, features, models and watchlists."""

from __future__ import annotations

import json
import os
from typing import Any, Optional

from ._core import (
    Error,
    Model,
    Store,
    StoreError,
    UndefinedStatistic,
    UnsupportedFamily,
    ValidationError,
    box_cox,
    classify_default,
    fit_box_cox,
    spearman,
)
from . import _core

__all__ = [
    "Error",
    "Model",
    "Store",
    "StoreError",
    "UndefinedStatistic",
    "UnsupportedFamily",
    "ValidationError",
    "box_cox",
    "classify_default",
    "features",
    "fit_box_cox",
    "open_store",
    "response_lags",
    "spearman",
    "synth",
    "train_global",
    "watchlist",
]


def synth(params: dict[str, Any], out: str | os.PathLike[str]) -> dict[str, Any]:
    """Write a synthetic store to `out` and return its manifest."""
    return json.loads(_core.synth_json(json.dumps(params), os.fspath(out)))


def open_store(path: str | os.PathLike[str]) -> Store:
    """Open an existing store; raises Error when `path` holds none."""
    return Store.open(os.fspath(path))


def features(store: Store, begin: Optional[int] = None, end: Optional[int] = None) -> dict[str, Any]:
    """Feature table over [begin, end), defaulting to the whole observation.

    Returns {"columns": [...], "rows": {domain: [...]}, "lambdas": {...}} with
    Box-Cox lambdas fitted on the returned rows.
    """
    return json.loads(_core.features_json(store, begin, end))


def train_global(
    store: Store,
    family: str,
    seed: int = 1,
    train_fraction: float = 0.8,
    grid: Optional[dict[str, list[Any]]] = None,
    ablate_posts: bool = False,
) -> tuple[Model, dict[str, Any]]:
    """Grid-search, refit and evaluate one family on the global task."""
    model, metrics = _core.train_global(
        store, family, seed, train_fraction, json.dumps(grid) if grid is not None else "", ablate_posts
    )
    return model, json.loads(metrics)


def watchlist(
    model: Model, store: Store, threshold: float = 0.5, top_k: Optional[int] = None
) -> list[dict[str, Any]]:
    """Ranked instances the model expects to be targeted."""
    return json.loads(_core.watchlist_json(model, store, threshold, top_k))


def response_lags(store: Store) -> list[dict[str, Any]]:
    """Days between first federating with a peer and first acting against it."""
    return json.loads(_core.lags_json(store))
