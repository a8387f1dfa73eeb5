"""Deterministic random streams.

Every stage derives its generator from one run seed plus a stage name, so
reruns with the same seed reproduce every artifact byte for byte while
stages stay statistically independent.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag(value) -> int:
    digest = hashlib.sha256(repr(value).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *names) -> np.random.Generator:
    """Child generator for a named stage, e.g. substream(7, "train", epoch)."""
    return np.random.default_rng([int(seed)] + [_tag(n) for n in names])
