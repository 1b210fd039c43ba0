"""Hitting measures on the boundary of the tree, seen through depth-L cylinders."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

from . import _kernels
from .errors import InputError, ResolutionError, UnstableLimitError
from .freegroup import ESTIMATED, Alphabet, BoundaryPoint, Word, from_array, multiply, sort_key, sphere
from .rng import FORWARD, check_seed, map_trials, stream
from .stepmeasure import StepDistribution, draw_choices
from .walk import PathSample, confirmed_prefix

Mass = Union[Fraction, float]

CSV_HEADER = ["word", "mass", "stderr"]


@dataclass(frozen=True, eq=False)
class CylinderMeasure:
    """Masses of depth-L cylinders.  Masses sum to 1 minus the failed extractions.

    Empirical measures keep their integer ``counts`` so that they merge
    exactly; analytic ones have ``trials == 0`` and exact masses.
    """

    depth: int
    masses: Mapping[Word, Mass]
    trials: int = 0
    escapes_failed: int = 0
    rank: int = 2
    counts: Mapping[Word, int] | None = field(default=None, repr=False)

    def __post_init__(self):
        for w in self.masses:
            if len(w) != self.depth:
                raise InputError(f"cylinder {w.text!r} does not have depth {self.depth}")

    @classmethod
    def from_counts(cls, depth: int, counts: Mapping[Word, int], trials: int, failed: int, rank: int = 2) -> "CylinderMeasure":
        counts = {w: c for w, c in counts.items() if c}
        masses = {w: c / trials for w, c in counts.items()}
        return cls(depth, masses, trials, failed, rank, counts)

    @property
    def exact(self) -> bool:
        return self.trials == 0 and all(isinstance(v, Fraction) for v in self.masses.values())

    @property
    def total(self) -> Mass:
        if self.exact:
            return sum(self.masses.values(), Fraction(0))
        return math.fsum(float(v) for v in self.masses.values())

    @property
    def deficit(self) -> Mass:
        return 1 - self.total

    def mass(self, w: Word | str) -> Mass:
        if isinstance(w, str):
            w = Word(w, self.rank)
        return self.masses.get(w, Fraction(0) if self.exact else 0.0)

    def stderr(self, w: Word | str) -> float:
        if self.trials == 0:
            return 0.0
        p = float(self.mass(w))
        return math.sqrt(p * (1 - p) / self.trials)

    def words(self) -> list[Word]:
        return sorted(self.masses, key=sort_key)

    def truncate(self, depth: int) -> "CylinderMeasure":
        """Pushforward to a shallower depth."""
        if not 0 < depth <= self.depth:
            raise InputError(f"cannot truncate depth {self.depth} to {depth}")
        if self.counts is not None:
            counts: Counter = Counter()
            for w, c in self.counts.items():
                counts[w.prefix(depth)] += c
            return CylinderMeasure.from_counts(depth, counts, self.trials, self.escapes_failed, self.rank)
        masses: dict[Word, Mass] = defaultdict(lambda: Fraction(0) if self.exact else 0.0)
        for w, v in self.masses.items():
            masses[w.prefix(depth)] += v
        return CylinderMeasure(depth, dict(masses), self.trials, self.escapes_failed, self.rank)

    def merge(self, other: "CylinderMeasure") -> "CylinderMeasure":
        """Pool two empirical measures (frequency addition)."""
        if self.counts is None or other.counts is None:
            raise InputError("only empirical measures with counts can be merged")
        if self.depth != other.depth or self.rank != other.rank:
            raise InputError("depth or alphabet mismatch")
        counts = Counter(self.counts)
        counts.update(other.counts)
        return CylinderMeasure.from_counts(
            self.depth, counts, self.trials + other.trials, self.escapes_failed + other.escapes_failed, self.rank
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(CSV_HEADER)
        for w in self.words():
            writer.writerow([w.text, repr(float(self.masses[w])), repr(self.stderr(w))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, rank: int = 2) -> "CylinderMeasure":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != CSV_HEADER:
            raise InputError(f"expected CSV header {','.join(CSV_HEADER)}")
        masses = {}
        depth = None
        for row in rows[1:]:
            if not row:
                continue
            w = Word(row[0], rank)
            if depth is None:
                depth = len(w)
            masses[w] = float(row[1])
        if depth is None:
            raise InputError("empty cylinder CSV")
        return cls(depth, masses, 0, 0, rank)


def uniform_cylinder_measure(rank: int, depth: int) -> CylinderMeasure:
    """Hitting measure of the simple random walk: every depth-L cylinder has mass 1/(2k (2k-1)^(L-1))."""
    mass = Fraction(1, 2 * rank * (2 * rank - 1) ** (depth - 1))
    return CylinderMeasure(depth, {w: mass for w in sphere(rank, depth)}, 0, 0, rank)


# --- limit extraction ---------------------------------------------------------


def _split(N: int, horizon_fraction: float) -> int:
    if not 0 < horizon_fraction < 1:
        raise InputError("horizon_fraction must lie in (0, 1)")
    return N - int(math.floor(horizon_fraction * N))


def extract_limit(path: PathSample, L: int, horizon_fraction: float = 0.5) -> BoundaryPoint:
    """Depth-L germ of lim w_n, read at n* = N - floor(h N) and confirmed by all later positions."""
    nstar = _split(path.N, horizon_fraction)
    ref, low = confirmed_prefix(path, nstar)
    if len(ref) < L:
        raise ResolutionError(f"|w_n*| = {len(ref)} < L = {L}")
    if low < L:
        raise UnstableLimitError(f"prefix of length {L} not kept after step {nstar} (kept {low})")
    return BoundaryPoint(from_array(ref[:L], path.rank), ESTIMATED, path.N - nstar)


def confirmed_germ(path: PathSample, horizon_fraction: float = 0.5, min_depth: int = 1) -> BoundaryPoint:
    """The deepest germ the path confirms: the prefix of w_n* kept by every later position."""
    nstar = _split(path.N, horizon_fraction)
    ref, low = confirmed_prefix(path, nstar)
    if len(ref) < min_depth:
        raise ResolutionError(f"|w_n*| = {len(ref)} < {min_depth}")
    if low < min_depth:
        raise UnstableLimitError(f"only {low} letters confirmed after step {nstar}, need {min_depth}")
    return BoundaryPoint(from_array(ref[:low], path.rank), ESTIMATED, path.N - nstar)


def _trial_germ(m: StepDistribution, L: int, N: int, seed: int, trial: int, nstar: int) -> str | None:
    table, lens = m.table
    choices = draw_choices(m, stream(seed, trial, FORWARD), N)
    ref, low = _kernels.confirmed(table, lens, choices, nstar)
    if len(ref) < L or low < L:
        return None
    return from_array(ref[:L], m.rank).text


def empirical_cylinder_measure(
    m: StepDistribution,
    L: int,
    trials: int,
    N: int,
    seed: int,
    horizon_fraction: float = 0.5,
    parallel: int = 1,
) -> CylinderMeasure:
    """Frequencies of confirmed depth-L germs over independent trials; failures go to the deficit."""
    check_seed(seed)
    if L < 1:
        raise InputError("depth must be positive")
    nstar = _split(N, horizon_fraction)
    germs = map_trials(lambda t: _trial_germ(m, L, N, seed, t, nstar), trials, parallel)
    counts = Counter(g for g in germs if g is not None)
    failed = sum(1 for g in germs if g is None)
    return CylinderMeasure.from_counts(L, {Word(t, m.rank): c for t, c in counts.items()}, trials, failed, m.rank)


# --- comparisons --------------------------------------------------------------


def _extensions(v: Word, depth: int) -> list[Word]:
    chars = Alphabet(v.rank).chars
    out = [v.text]
    while len(out[0]) < depth:
        out = [t + c for t in out for c in chars if c != t[-1].swapcase()]
    return [Word(t, v.rank) for t in out]


@dataclass(frozen=True)
class Residual:
    value: Mass
    redistributed: Mass


def translate(m: StepDistribution, cm: CylinderMeasure) -> tuple[dict[Word, Mass], Mass]:
    """sum_g m(g) g.cm on depth-L cylinders, plus the mass that landed on shallower cylinders.

    g.[w] = [g w] exactly when |w| > |g|.  A translate shallower than L is
    spread evenly over its depth-L sub-cylinders.
    """
    L = cm.depth
    if L <= m.max_length:
        raise InputError(f"depth {L} too shallow for steps of length up to {m.max_length}")
    exact = m.exact and cm.exact
    zero: Mass = Fraction(0) if exact else 0.0
    out: dict[Word, Mass] = defaultdict(lambda: zero)
    spread = zero
    for g, p in m.items():
        p = p if exact else float(p)
        for w, q in cm.masses.items():
            q = q if exact else float(q)
            v = multiply(g, w)
            if len(v) >= L:
                out[v.prefix(L)] += p * q
            else:
                ext = _extensions(v, L)
                share = p * q / len(ext)
                for u in ext:
                    out[u] += share
                spread += p * q
    return dict(out), spread


def _tv(a: Mapping[Word, Mass], b: Mapping[Word, Mass], exact: bool) -> Mass:
    keys = set(a) | set(b)
    zero: Mass = Fraction(0) if exact else 0.0
    diffs = [abs(a.get(k, zero) - b.get(k, zero)) for k in keys]
    if exact:
        return sum(diffs, Fraction(0)) / 2
    return math.fsum(diffs) / 2


def stationarity_residual(m: StepDistribution, cm: CylinderMeasure) -> Residual:
    """Total variation between cm and m * cm at depth L (0 for a stationary measure)."""
    pushed, spread = translate(m, cm)
    exact = m.exact and cm.exact
    return Residual(_tv(cm.masses, pushed, exact), spread)


def tv_lower_bound(cm1: CylinderMeasure, cm2: CylinderMeasure) -> Mass:
    """Half the l1 distance over depth-L cylinders; a lower bound for the TV of the limit measures."""
    if cm1.depth != cm2.depth:
        raise InputError(f"depth mismatch: {cm1.depth} vs {cm2.depth}")
    return _tv(cm1.masses, cm2.masses, cm1.exact and cm2.exact)


def tv_error_bar(cm1: CylinderMeasure, cm2: CylinderMeasure) -> float:
    """Crude one-sigma bar for tv_lower_bound: half the sum of per-cylinder standard errors."""
    keys = set(cm1.masses) | set(cm2.masses)
    return 0.5 * math.fsum(math.hypot(cm1.stderr(k), cm2.stderr(k)) for k in keys)


@dataclass(frozen=True)
class AtomReport:
    depths: tuple[int, ...]
    max_masses: tuple[float, ...]
    strictly_decreasing: bool
    atom_candidate: bool


def atom_diagnostic(cms: Sequence[CylinderMeasure], threshold: float = 0.2) -> AtomReport:
    """Largest cylinder mass per depth.  An atom is suspected when it stops shrinking above ``threshold``."""
    cms = sorted(cms, key=lambda c: c.depth)
    depths = tuple(c.depth for c in cms)
    if len(set(depths)) != len(depths):
        raise InputError("depths must be distinct")
    maxes = tuple(float(max(c.masses.values(), default=0.0)) for c in cms)
    decreasing = all(b < a for a, b in zip(maxes, maxes[1:]))
    plateau = len(maxes) >= 2 and maxes[-1] >= threshold and maxes[-1] >= 0.9 * maxes[-2]
    return AtomReport(depths, maxes, decreasing, plateau)


def prepend(word: Word, germ: BoundaryPoint, depth: int) -> Word | None:
    """Depth-``depth`` germ of word.zeta given a germ of zeta, or None if the germ is too shallow."""
    v = multiply(word, germ.prefix)
    cancelled = (len(word) + len(germ.prefix) - len(v)) // 2
    if cancelled >= len(germ.prefix) or len(v) < depth:
        return None
    return v.prefix(depth)


__all__ = [
    "CylinderMeasure",
    "Residual",
    "AtomReport",
    "uniform_cylinder_measure",
    "extract_limit",
    "confirmed_germ",
    "empirical_cylinder_measure",
    "stationarity_residual",
    "translate",
    "tv_lower_bound",
    "tv_error_bar",
    "atom_diagnostic",
    "prepend",
]
