"""Seed derivation.

Every random quantity is drawn from a Philox stream keyed by a tuple
``(seed, trial, purpose)``, hashed through ``SeedSequence``.  A trial's draws
therefore do not depend on which worker runs it or in what order, which is
what makes ``--parallel`` output-invariant.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

from .errors import InputError

# purpose tags; new tags must be appended, never renumbered
FORWARD = 0
BACKWARD = 1
STOPPING = 2
LIMIT_WALK = 3

SEED_MAX = 2**64 - 1

T = TypeVar("T")


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise InputError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([check_seed(seed), *path])))


def map_trials(fn: Callable[[int], T], trials: int, parallel: int = 1) -> list[T]:
    """Evaluate ``fn`` on trial indices 0..trials-1, results in trial order.

    Hot loops release the GIL, so threads give real concurrency.
    """
    if parallel <= 1 or trials < 2:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=parallel) as ex:
        return list(ex.map(fn, range(trials)))


def fsum_mean(values: Iterable[float]) -> float:
    vals = list(values)
    return math.fsum(vals) / len(vals)
