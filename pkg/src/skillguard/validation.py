"""Small input checks shared by the estimators and the CLI."""

from __future__ import annotations

import math
from collections import Counter
from typing import Iterable

from .exceptions import DuplicateSkillError


def check_threshold(threshold) -> float:
    try:
        value = float(threshold)
    except (TypeError, ValueError):
        raise ValueError(f"threshold must be a number, got {threshold!r}") from None
    if math.isnan(value) or value < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold!r}")
    return value


def check_probability(p, name="probability") -> float:
    value = float(p)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p!r}")
    return value


def check_unique_ids(ids: Iterable[str]) -> None:
    dupes = sorted(k for k, n in Counter(ids).items() if n > 1)
    if dupes:
        raise DuplicateSkillError(f"duplicate skill ids: {dupes}")


def check_nonempty_seq(seq, name="sequence"):
    if seq is None or len(seq) == 0:
        raise ValueError(f"{name} must be non-empty")
    return seq
