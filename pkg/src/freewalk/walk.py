"""Seeded one- and two-sided random walks, linear drift, escape diagnostics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import InputError
from .freegroup import Word, from_array, identity, multiply
from .rng import BACKWARD, FORWARD, check_seed, map_trials, stream
from .stepmeasure import StepDistribution, draw_choices, reflect


@dataclass(frozen=True, eq=False)
class PathSample:
    """A realisation (g_1, ..., g_N) with partial products w_n = g_1 ... g_n.

    Only the support indices are stored; positions are rebuilt on demand.
    """

    measure: StepDistribution
    choices: np.ndarray
    seed: int
    stream: tuple[int, ...] = ()

    @property
    def N(self) -> int:
        return int(self.choices.shape[0])

    @property
    def rank(self) -> int:
        return self.measure.rank

    @cached_property
    def increments(self) -> tuple[Word, ...]:
        support = self.measure.support
        return tuple(support[i] for i in self.choices)

    @cached_property
    def lengths(self) -> np.ndarray:
        """|w_n| for n = 0..N."""
        table, lens = self.measure.table
        return _kernels.path_lengths(table, lens, self.choices)

    def position(self, n: int) -> Word:
        if not 0 <= n <= self.N:
            raise IndexError(n)
        table, lens = self.measure.table
        return from_array(_kernels.word_after(table, lens, self.choices, n), self.rank)

    @cached_property
    def positions(self) -> tuple[Word, ...]:
        """w_0 = identity, w_1, ..., w_N.  Memory grows like N times the drift; keep N modest."""
        out = [identity(self.rank)]
        for g in self.increments:
            out.append(multiply(out[-1], g))
        return tuple(out)

    def agreement(self, ref: Word | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(|w_n|, common prefix length of w_n with ref) for n = 0..N."""
        table, lens = self.measure.table
        arr = ref if isinstance(ref, np.ndarray) else np.asarray(ref.letters, dtype=np.int8)
        return _kernels.agreement(table, lens, self.choices, arr)

    def serialize(self) -> bytes:
        return json.dumps(
            {"seed": self.seed, "stream": list(self.stream), "increments": [g.text for g in self.increments]},
            separators=(",", ":"),
        ).encode("utf-8")


@dataclass(frozen=True, eq=False)
class BilateralSample:
    """Forward walk driven by m and backward walk driven by reflect(m), on independent streams."""

    forward: PathSample
    backward: PathSample


@dataclass(frozen=True)
class DriftEstimate:
    mean: float
    ci_halfwidth: float
    N: int
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "ci": self.ci_halfwidth, "N": self.N, "trials": self.trials, "seed": self.seed}


def sample_path(m: StepDistribution, N: int, seed: int, trial: int = 0, direction: int = FORWARD) -> PathSample:
    if N < 1:
        raise InputError("N must be at least 1")
    key = (trial, direction)
    choices = draw_choices(m, stream(seed, *key), N)
    return PathSample(m, choices, check_seed(seed), key)


def sample_bilateral(m: StepDistribution, N: int, seed: int, trial: int = 0, backward_N: int | None = None) -> BilateralSample:
    fwd = sample_path(m, N, seed, trial, FORWARD)
    bwd = sample_path(reflect(m), backward_N or N, seed, trial, BACKWARD)
    return BilateralSample(fwd, bwd)


def _final_length(m: StepDistribution, N: int, seed: int, trial: int) -> int:
    table, lens = m.table
    choices = draw_choices(m, stream(seed, trial, FORWARD), N)
    return int(_kernels.path_lengths(table, lens, choices)[-1])


def drift_estimate(m: StepDistribution, N: int, trials: int, seed: int, parallel: int = 1) -> DriftEstimate:
    """Mean of |w_N|/N over independent trials with a normal-approximation 95% interval."""
    if N < 100 or trials < 10:
        raise InputError("drift_estimate needs N >= 100 and trials >= 10")
    finals = map_trials(lambda t: _final_length(m, N, seed, t), trials, parallel)
    vals = [f / N for f in finals]
    mean = math.fsum(vals) / trials
    var = math.fsum((v - mean) ** 2 for v in vals) / (trials - 1)
    return DriftEstimate(mean, 1.96 * math.sqrt(var / trials), N, trials, check_seed(seed))


def escape_check(path: PathSample) -> bool:
    """Heuristic surrogate for |w_n| -> infinity: the last 10% of the path stays
    strictly farther out than anything reached in the first 10%."""
    lengths = path.lengths[1:]
    k = max(1, len(lengths) // 10)
    return bool(lengths[-k:].min() > lengths[:k].max())


def confirmed_prefix(path: PathSample, nstar: int) -> tuple[np.ndarray, int]:
    """(letters of w_nstar, length of its prefix kept by every later position)."""
    table, lens = path.measure.table
    ref, low = _kernels.confirmed(table, lens, path.choices, nstar)
    return ref, int(low)
