"""Published benchmark numbers, loaded from the bundled data file.

These values annotate reports produced by the CLI; they are not reproducible
from the bundled synthetic data and are never used as test expectations.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

__all__ = ["load_reference", "sweep_reference"]


@lru_cache(maxsize=1)
def load_reference() -> dict:
    payload = resources.files("irbmotion").joinpath("data/reference_tables.json")
    return json.loads(payload.read_text(encoding="utf-8"))


def sweep_reference(total_features: int) -> tuple[float, float] | None:
    """Reference (train loss, validation loss) for a sweep feature total."""
    row = load_reference()["feature_sweep"].get(str(total_features))
    if row is None:
        return None
    return row["train_loss"], row["val_loss"]
