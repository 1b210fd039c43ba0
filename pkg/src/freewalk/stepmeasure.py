"""Finitely supported probability measures on F_k.

Probabilities are either all ``Fraction`` (exact mode) or all ``float``.
Exact mode is used for convolution powers and coset measures, floats for
anything that is aggregated from Monte Carlo draws.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Union

import numpy as np

from .errors import InputError, InvalidMeasureError, ResourceError
from .freegroup import Alphabet, Word, identity, multiply, reduce, sort_key, to_array

Prob = Union[Fraction, float]

DEFAULT_SUPPORT_CAP = 10**6
FLOAT_TOL = 1e-12


def _as_prob(v) -> Prob:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        v = v.strip()
        if "/" in v:
            return Fraction(v)
        return float(v)
    return float(v)


@dataclass(frozen=True, eq=False)
class StepDistribution:
    """A probability measure m on F_k with finite support.

    Build with :func:`measure` rather than directly; that normalises keys and
    checks the total mass.
    """

    probs: Mapping[Word, Prob]
    rank: int = 2

    def __post_init__(self):
        if not self.probs:
            raise InvalidMeasureError("empty support")
        for w, p in self.probs.items():
            if w.rank != self.rank:
                raise InputError(f"word {w} has rank {w.rank}, measure has rank {self.rank}")
            if not p > 0:
                raise InvalidMeasureError(f"non-positive probability {p} at {w}")
        total = self.total_mass
        if self.exact:
            if total != 1:
                raise InvalidMeasureError(f"total mass {total} != 1")
        elif abs(total - 1.0) > FLOAT_TOL:
            raise InvalidMeasureError(f"total mass {total!r} differs from 1 by more than {FLOAT_TOL}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepDistribution):
            return NotImplemented
        return self.rank == other.rank and dict(self.probs) == dict(other.probs)

    def __repr__(self) -> str:
        items = ", ".join(f"{w.text or 'e'}: {p}" for w, p in self.items())
        return f"StepDistribution({{{items}}})"

    def __getitem__(self, w: Word | str) -> Prob:
        if isinstance(w, str):
            w = reduce(w, self.rank)
        return self.probs.get(w, Fraction(0) if self.exact else 0.0)

    @cached_property
    def exact(self) -> bool:
        return all(isinstance(p, Fraction) for p in self.probs.values())

    @cached_property
    def total_mass(self) -> Prob:
        if self.exact:
            return sum(self.probs.values(), Fraction(0))
        return math.fsum(float(p) for p in self.probs.values())

    def items(self) -> list[tuple[Word, Prob]]:
        """Support in shortlex order."""
        return list(self._sorted)

    @cached_property
    def _sorted(self) -> tuple[tuple[Word, Prob], ...]:
        return tuple(sorted(self.probs.items(), key=lambda kv: sort_key(kv[0])))

    @cached_property
    def support(self) -> tuple[Word, ...]:
        return tuple(w for w, _ in self._sorted)

    @cached_property
    def max_length(self) -> int:
        return max(len(w) for w in self.probs)

    def to_float(self) -> "StepDistribution":
        return StepDistribution({w: float(p) for w, p in self.probs.items()}, self.rank)

    # kernel encoding
    @cached_property
    def table(self) -> tuple[np.ndarray, np.ndarray]:
        words = self.support
        width = max(1, self.max_length)
        table = np.zeros((len(words), width), dtype=np.int8)
        lens = np.zeros(len(words), dtype=np.int64)
        for i, w in enumerate(words):
            table[i, : len(w)] = to_array(w)
            lens[i] = len(w)
        return table, lens

    @cached_property
    def cumulative(self) -> np.ndarray:
        cum = np.cumsum([float(p) for _, p in self.items()])
        cum[-1] = 1.0
        return cum

    def to_json(self) -> str:
        d = {w.text: (f"{p.numerator}/{p.denominator}" if isinstance(p, Fraction) else repr(float(p))) for w, p in self.items()}
        return json.dumps(d, indent=1)


def measure(mapping: Mapping[Word | str, object], rank: int = 2) -> StepDistribution:
    """Build a measure from ``{word: probability}``; string keys are reduced, duplicates merged.

    String values may be ``"p/q"`` rationals or decimals.  A mix of exact and
    float values is coerced to float.
    """
    probs: dict[Word, Prob] = {}
    for k, v in mapping.items():
        w = reduce(k, rank) if isinstance(k, str) else k
        p = _as_prob(v)
        probs[w] = probs[w] + p if w in probs else p
    if not all(isinstance(p, Fraction) for p in probs.values()):
        probs = {w: float(p) for w, p in probs.items()}
    return StepDistribution(probs, rank)


def uniform(words, rank: int = 2) -> StepDistribution:
    words = [reduce(w, rank) if isinstance(w, str) else w for w in words]
    if not words:
        raise InvalidMeasureError("empty support")
    p = Fraction(1, len(words))
    mapping: dict[Word, Fraction] = {}
    for w in words:
        mapping[w] = mapping.get(w, Fraction(0)) + p
    return StepDistribution(mapping, rank)


def delta(word: Word | str, rank: int = 2) -> StepDistribution:
    return uniform([word], rank)


def nn_uniform(rank: int = 2) -> StepDistribution:
    return uniform(list(Alphabet(rank).chars), rank)


def lazy_nn(rank: int = 2, hold: Fraction = Fraction(1, 2)) -> StepDistribution:
    rest = (1 - hold) / (2 * rank)
    mapping = {identity(rank): hold}
    mapping.update({Word(c, rank): rest for c in Alphabet(rank).chars})
    return StepDistribution(mapping, rank)


def squares(rank: int = 2) -> StepDistribution:
    return uniform([c + c for c in Alphabet(rank).chars], rank)


PRESETS = {"nn-uniform": nn_uniform, "lazy-nn": lazy_nn, "squares": squares}


def load_measure(spec: str, rank: int = 2) -> StepDistribution:
    """Resolve a CLI measure argument.

    Accepts a preset name, ``delta:<word>``, ``uniform:<w1>,<w2>,...``, or a
    path to a JSON file mapping words to probabilities.
    """
    if spec in PRESETS:
        return PRESETS[spec](rank)
    if spec.startswith("delta:"):
        return delta(spec[len("delta:"):], rank)
    if spec.startswith("uniform:"):
        return uniform([w for w in spec[len("uniform:"):].split(",")], rank)
    if os.path.exists(spec):
        with open(spec) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise InputError(f"{spec}: expected a JSON object mapping words to probabilities")
        return measure(data, rank)
    raise InputError(f"unknown measure {spec!r}; presets are {', '.join(sorted(PRESETS))}")


# --- operations -------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostics:
    total_mass: Prob
    symmetric: bool
    generates: bool
    subgroup_index: float
    support_size: int


def is_symmetric(m: StepDistribution) -> bool:
    if m.exact:
        return all(m[w.inverse()] == p for w, p in m.probs.items())
    return all(abs(m[w.inverse()] - p) <= FLOAT_TOL for w, p in m.probs.items())


def validate(m: StepDistribution) -> Diagnostics:
    """Mass, symmetry, and whether supp m generates F_k as a group."""
    from .subgroup import fold, index

    total = m.total_mass
    if (m.exact and total != 1) or (not m.exact and abs(total - 1) > FLOAT_TOL):
        raise InvalidMeasureError(f"total mass {total} != 1")
    idx = index(fold(m.support, m.rank))
    return Diagnostics(total, is_symmetric(m), idx == 1, idx, len(m.probs))


def draw_choices(m: StepDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    """n i.i.d. support indices (into ``m.support``)."""
    if len(m.probs) == 1:
        return np.zeros(n, dtype=np.int64)
    idx = np.searchsorted(m.cumulative, rng.random(n), side="right")
    return np.minimum(idx, len(m.probs) - 1).astype(np.int64)


def sample(m: StepDistribution, rng: np.random.Generator) -> Word:
    return m.support[int(draw_choices(m, rng, 1)[0])]


def reflect(m: StepDistribution) -> StepDistribution:
    """g -> m(g^-1); the step law of the backward walk."""
    return StepDistribution({w.inverse(): p for w, p in m.probs.items()}, m.rank)


def convolve(m1: StepDistribution, m2: StepDistribution, cap: int = DEFAULT_SUPPORT_CAP) -> StepDistribution:
    """Law of g.h with g ~ m1, h ~ m2 independent."""
    if m1.rank != m2.rank:
        raise InputError(f"alphabet mismatch: rank {m1.rank} vs rank {m2.rank}")
    exact = m1.exact and m2.exact
    out: dict[Word, Prob] = {}
    for g, p in m1.items():
        for h, q in m2.items():
            w = multiply(g, h)
            out[w] = out.get(w, 0) + (p * q if exact else float(p) * float(q))
            if len(out) > cap:
                raise ResourceError(f"convolution support exceeds the cap of {cap} entries")
    if not exact:
        # renormalise away accumulated rounding so the result passes the mass check
        total = math.fsum(out.values())
        out = {w: v / total for w, v in out.items()}
    return StepDistribution(out, m1.rank)


def power(m: StepDistribution, n: int, cap: int = DEFAULT_SUPPORT_CAP) -> StepDistribution:
    """n-fold convolution power m^{*n}; n = 0 gives the point mass at the identity."""
    if n < 0:
        raise InputError("convolution power must be non-negative")
    out = delta(identity(m.rank), m.rank)
    if not m.exact:
        out = out.to_float()
    for _ in range(n):
        out = convolve(out, m, cap)
    return out


@dataclass(frozen=True)
class MomentReport:
    first_moment: Prob
    p: float
    p_moment: float


def moments(m: StepDistribution, p: float = 1.0) -> MomentReport:
    """Exact sum of |g| m(g), together with the sum of |g|^p m(g)."""
    if m.exact:
        first = sum((len(w) * q for w, q in m.probs.items()), Fraction(0))
    else:
        first = math.fsum(len(w) * q for w, q in m.probs.items())
    pm = math.fsum(float(q) * len(w) ** p for w, q in m.probs.items())
    return MomentReport(first, p, pm)


def describe(m: StepDistribution) -> str:
    return ", ".join(f"{w.text or 'e'}:{p}" for w, p in m.items())

