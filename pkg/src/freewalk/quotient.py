"""Abelian quotients, first-return stopping times and induced measures on the kernel.

For a homomorphism pi: F_k -> Z^j the walk is run until pi(w_n) first returns
to 0.  That time is tau and xi = w_tau lies in the kernel H.  The law of xi is
the induced measure m' on H; it shares the stationary measure of m.
"""

from __future__ import annotations

import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from . import _kernels
from .boundary import CylinderMeasure, empirical_cylinder_measure, prepend, tv_lower_bound
from .errors import InputError, InsufficientDataError
from .freegroup import ESTIMATED, Alphabet, BoundaryPoint, Word, from_array, reduce
from .rng import LIMIT_WALK, STOPPING, check_seed, map_trials, stream
from .stepmeasure import StepDistribution, draw_choices, is_symmetric, measure

_ENTRY = re.compile(r"^\s*([a-z])\s*:\s*(-?\d+(?:\s*/\s*-?\d+)?)\s*$")


@dataclass(frozen=True)
class AbelianProjection:
    """pi: F_k -> Z^j (j = 1 or 2) given by generator images, optionally modulo ``modulus``.

    The kernel is infinitely generated in the infinite case, so it is only
    ever represented through pi.
    """

    images: tuple[tuple[int, ...], ...]
    modulus: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.images:
            raise InputError("a projection needs at least one generator image")
        j = len(self.images[0])
        if j not in (1, 2) or any(len(v) != j for v in self.images):
            raise InputError("images must all be vectors in Z^1 or all in Z^2")
        if self.modulus is not None and (len(self.modulus) != j or any(q < 1 for q in self.modulus)):
            raise InputError("modulus needs one positive entry per coordinate")

    @property
    def rank(self) -> int:
        return len(self.images)

    @property
    def j(self) -> int:
        return len(self.images[0])

    @property
    def mods(self) -> np.ndarray:
        return np.array(self.modulus or (0,) * self.j, dtype=np.int64)

    @classmethod
    def parse(cls, text: str, rank: int = 2, modulus: Sequence[int] | None = None) -> "AbelianProjection":
        """``"a:1,b:0"`` for Z, ``"a:1/0,b:0/1"`` for Z^2.  Every generator must be given once."""
        images: dict[str, tuple[int, ...]] = {}
        for part in text.split(","):
            match = _ENTRY.match(part)
            if not match:
                raise InputError(f"cannot parse projection entry {part!r}")
            letter, value = match.groups()
            if letter in images:
                raise InputError(f"generator {letter!r} given twice")
            images[letter] = tuple(int(v) for v in value.split("/"))
        chars = Alphabet(rank).chars[::2]
        if set(images) != set(chars):
            raise InputError(f"projection must give images for exactly {', '.join(chars)}")
        return cls(tuple(images[c] for c in chars), tuple(modulus) if modulus else None)

    def project(self, w: Word | str) -> tuple[int, ...]:
        if isinstance(w, str):
            w = reduce(w, self.rank)
        out = [0] * self.j
        for x in w.letters:
            sign = 1 if x > 0 else -1
            for i, v in enumerate(self.images[abs(x) - 1]):
                out[i] += sign * v
        if self.modulus:
            out = [v % q for v, q in zip(out, self.modulus)]
        return tuple(out)

    def in_kernel(self, w: Word | str) -> bool:
        return not any(self.project(w))

    def step_images(self, m: StepDistribution) -> np.ndarray:
        return np.array([self.project(w) for w in m.support], dtype=np.int64).reshape(len(m.support), self.j)

    def stallings(self):
        raise InputError("the kernel of an abelian projection is handled through pi only; it has no Stallings graph here")

    def describe(self) -> str:
        chars = Alphabet(self.rank).chars[::2]
        return ",".join(f"{c}:{'/'.join(map(str, v))}" for c, v in zip(chars, self.images))


def project(pi: AbelianProjection, w: Word | str) -> int | tuple[int, ...]:
    """pi(w); a plain integer when j = 1."""
    v = pi.project(w)
    return v[0] if pi.j == 1 else v


# --- stopping times ---------------------------------------------------------------


@dataclass(frozen=True)
class StoppingSample:
    """tau and xi = g_1 ... g_tau, or a capped run (tau = cap, no xi)."""

    tau: int
    xi: Word | None
    cap: int

    @property
    def capped(self) -> bool:
        return self.xi is None


def stopping_time(increments: Sequence[Word | str], pi: AbelianProjection) -> StoppingSample:
    """First return of the projection to 0 along a given increment sequence."""
    pos = np.zeros(pi.j, dtype=np.int64)
    w = Word("", pi.rank)
    for n, g in enumerate(increments, start=1):
        g = reduce(g, pi.rank) if isinstance(g, str) else g
        pos += np.array(pi.project(g))
        if pi.modulus:
            pos %= pi.mods
        w = w * g
        if not pos.any():
            return StoppingSample(n, w, len(increments))
    return StoppingSample(len(increments), None, len(increments))


_FIRST_CHUNK = 64


def stopping_sample(m: StepDistribution, pi: AbelianProjection, cap: int, rng: np.random.Generator) -> StoppingSample:
    """Run the m-walk until pi returns to 0, for at most ``cap`` steps."""
    if cap < 1:
        raise InputError("cap must be positive")
    proj = pi.step_images(m)
    mods = pi.mods
    pos = np.zeros(pi.j, dtype=np.int64)
    chunks = []
    done = 0
    size = _FIRST_CHUNK
    while done < cap:
        chunk = draw_choices(m, rng, min(size, cap - done))
        chunks.append(chunk)
        hit = _kernels.first_return(proj, mods, chunk, pos)
        if hit > 0:
            tau = done + hit
            choices = np.concatenate(chunks)[:tau]
            table, lens = m.table
            xi = from_array(_kernels.word_after(table, lens, choices, tau), m.rank)
            return StoppingSample(tau, xi, cap)
        done += chunk.shape[0]
        size *= 2
    return StoppingSample(cap, None, cap)


@dataclass(frozen=True, eq=False)
class StoppingBatch:
    """Independent stopping samples in trial order."""

    taus: np.ndarray
    capped: np.ndarray
    xis: tuple[str | None, ...]
    cap: int
    seed: int

    @property
    def trials(self) -> int:
        return int(self.taus.shape[0])

    @property
    def cap_rate(self) -> float:
        return float(self.capped.mean())

    def xi_lengths(self) -> np.ndarray:
        """|xi| over uncapped samples, in trial order."""
        return np.array([len(x) for x in self.xis if x is not None], dtype=np.int64)

    def to_csv(self) -> str:
        rows = ["trial,tau,capped"]
        rows += [f"{i},{int(t)},{int(c)}" for i, (t, c) in enumerate(zip(self.taus, self.capped))]
        return "\r\n".join(rows) + "\r\n"

    @classmethod
    def from_csv(cls, text: str) -> "StoppingBatch":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "trial,tau,capped":
            raise InputError("expected CSV header trial,tau,capped")
        body = np.array([[int(v) for v in ln.split(",")] for ln in lines[1:]], dtype=np.int64).reshape(-1, 3)
        taus, capped = body[:, 1], body[:, 2].astype(bool)
        cap = int(taus[capped].max()) if capped.any() else int(taus.max(initial=0))
        return cls(taus, capped, (None,) * len(taus), cap, 0)


def _require_symmetric(m: StepDistribution) -> None:
    if not is_symmetric(m):
        raise InputError("the induced-measure construction needs a symmetric step distribution")


def stopping_batch(m: StepDistribution, pi: AbelianProjection, trials: int, cap: int, seed: int, parallel: int = 1) -> StoppingBatch:
    check_seed(seed)
    _require_symmetric(m)
    if pi.rank != m.rank:
        raise InputError(f"alphabet mismatch: rank {m.rank} vs rank {pi.rank}")
    out = map_trials(lambda t: stopping_sample(m, pi, cap, stream(seed, t, STOPPING)), trials, parallel)
    taus = np.array([s.tau for s in out], dtype=np.int64)
    capped = np.array([s.capped for s in out], dtype=bool)
    return StoppingBatch(taus, capped, tuple(None if s.xi is None else s.xi.text for s in out), cap, seed)


@dataclass(frozen=True, eq=False)
class InducedMeasure:
    """Empirical m' over uncapped samples, with the cap report."""

    measure: StepDistribution
    counts: dict[Word, int]
    trials: int
    capped: int
    batch: StoppingBatch = field(repr=False)

    @property
    def cap_rate(self) -> float:
        return self.capped / self.trials

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "capped": self.capped,
            "cap_rate": self.cap_rate,
            "cap": self.batch.cap,
            "seed": self.batch.seed,
            "support_size": len(self.counts),
            "measure": {w.text: c for w, c in sorted(self.counts.items(), key=lambda kv: (-kv[1], len(kv[0]), kv[0].text))},
        }


CAP_WARNING_RATE = 0.5


def induced_measure_empirical(
    m: StepDistribution, pi: AbelianProjection, trials: int, cap: int, seed: int, parallel: int = 1
) -> InducedMeasure:
    """Frequencies of xi over uncapped samples.  Every support word is checked to lie in the kernel."""
    batch = stopping_batch(m, pi, trials, cap, seed, parallel)
    counts = Counter(x for x in batch.xis if x is not None)
    ok = sum(counts.values())
    if ok == 0:
        raise InsufficientDataError("every stopping sample hit the cap")
    words = {Word(t, m.rank): c for t, c in counts.items()}
    for w in words:
        if not pi.in_kernel(w):
            raise AssertionError(f"xi = {w.text!r} is not in the kernel")
    capped = int(batch.capped.sum())
    if capped / trials > CAP_WARNING_RATE:
        warnings.warn(f"{capped} of {trials} stopping samples capped at {cap}; m' is badly truncated", RuntimeWarning)
    emp = measure({w: c / ok for w, c in words.items()}, m.rank)
    return InducedMeasure(emp, words, trials, capped, batch)


def symmetry_tv(counts: Mapping[Word, int], max_length: int | None = None) -> float:
    """TV between an empirical measure and its reflection.

    With ``max_length`` set, words longer than it are pooled into one
    self-symmetric bucket; words seen once otherwise dominate the distance.
    """
    total = sum(counts.values())
    if not total:
        raise InsufficientDataError("empty measure")
    kept: Counter = Counter()
    for w, c in counts.items():
        if max_length is None or len(w) <= max_length:
            kept[w] += c
    diff = sum(abs(c - kept.get(w.inverse(), 0)) for w, c in kept.items())
    diff += sum(c for w, c in kept.items() if w.inverse() not in kept)
    return diff / (2 * total)


# --- tail and moments ---------------------------------------------------------------


@dataclass(frozen=True)
class TailFit:
    slope: float
    stderr: float
    rvalue: float
    window: tuple[int, int]
    points: int


def tau_tail_fit(
    taus: np.ndarray,
    capped: np.ndarray | None = None,
    window: tuple[int, int] = (100, 1000),
    min_samples: int = 10_000,
    min_in_window: int = 50,
    points: int = 20,
) -> TailFit:
    """Least-squares slope of log P(tau > n) against log n over ``window``.

    Capped samples count as exceeding every n in the window, which is exact as
    long as the cap is at least the window's upper end.
    """
    taus = np.asarray(taus, dtype=np.int64)
    capped = np.zeros(taus.shape, dtype=bool) if capped is None else np.asarray(capped, dtype=bool)
    lo, hi = window
    if not 1 <= lo < hi:
        raise InputError("window must satisfy 1 <= lo < hi")
    if taus.shape[0] < min_samples:
        raise InsufficientDataError(f"{taus.shape[0]} samples, need {min_samples}")
    if capped.any() and taus[capped].min() < hi:
        raise InputError(f"cap {int(taus[capped].min())} is below the window end {hi}")
    inside = int(((taus > lo) & (taus <= hi) & ~capped).sum())
    if inside < min_in_window:
        raise InsufficientDataError(f"only {inside} uncapped samples with tau in ({lo}, {hi}]")
    grid = np.unique(np.round(np.geomspace(lo, hi, points)).astype(np.int64))
    ordered = np.sort(taus)
    surv = 1.0 - np.searchsorted(ordered, grid, side="right") / taus.shape[0]
    if (surv <= 0).any():
        raise InsufficientDataError("empirical tail vanishes inside the window")
    fit = stats.linregress(np.log(grid), np.log(surv))
    return TailFit(float(fit.slope), float(fit.stderr), float(fit.rvalue), (lo, hi), int(grid.shape[0]))


@dataclass(frozen=True)
class MomentCurve:
    p: float
    n: np.ndarray
    running_mean: np.ndarray
    relative_change: float
    stabilized: bool


STABILITY_TOL = 0.05


def induced_moment_scan(lengths: np.ndarray, p_grid: Sequence[float], checkpoints: int = 41) -> dict[float, MomentCurve]:
    """Running averages of |xi|^p over the sample sequence.

    A curve counts as stabilized when its value at the last sample differs
    from its value a decade earlier (at n/10) by less than 5% relative.
    """
    lengths = np.asarray(lengths, dtype=np.float64)
    n_total = lengths.shape[0]
    if n_total < 10:
        raise InsufficientDataError("need at least 10 samples")
    n = np.arange(1, n_total + 1)
    marks = np.unique(np.round(np.geomspace(1, n_total, checkpoints)).astype(np.int64))
    out = {}
    for p in p_grid:
        vals = np.power(lengths, p)
        running = np.cumsum(vals) / n
        last, earlier = running[-1], running[n_total // 10 - 1]
        change = abs(last - earlier) / last if last else 0.0
        out[float(p)] = MomentCurve(float(p), marks, running[marks - 1], float(change), bool(change < STABILITY_TOL))
    return out


# --- m' * nu = nu ---------------------------------------------------------------------


@dataclass(frozen=True)
class InducedStationarity:
    residual: float
    nu: CylinderMeasure
    pushed: CylinderMeasure
    failures: int
    capped: int


def _normalised(cm: CylinderMeasure) -> CylinderMeasure:
    ok = sum(cm.counts.values()) if cm.counts is not None else 0
    if not ok:
        raise InsufficientDataError("no successful extractions")
    return CylinderMeasure(cm.depth, {w: c / ok for w, c in cm.counts.items()}, 0, 0, cm.rank)


def _pushed_germ(m, pi, L, N, seed, t, cap, nstar, shift):
    if shift is None:
        s = stopping_sample(m, pi, cap, stream(seed, t, STOPPING))
        if s.capped:
            return "capped"
        head = s.xi
    else:
        head = shift
    table, lens = m.table
    ref, low = _kernels.confirmed(table, lens, draw_choices(m, stream(seed, t, LIMIT_WALK), N), nstar)
    if low < 1:
        return None
    v = prepend(head, BoundaryPoint(from_array(ref[:low], m.rank), ESTIMATED, N - nstar), L)
    return None if v is None else v.text


def induced_stationarity_check(
    m: StepDistribution,
    pi: AbelianProjection,
    L: int,
    trials: int,
    seed: int,
    N: int = 2000,
    cap: int = 10_000,
    horizon_fraction: float = 0.5,
    shift: Word | str | None = None,
    parallel: int = 1,
) -> InducedStationarity:
    """TV between the empirical nu and the empirical m' * nu at depth L.

    m' * nu is sampled as xi . zeta with xi a stopping sample and zeta the limit
    of an independent m-walk.  Both measures are normalised over their
    successful trials.  ``shift`` replaces xi by a fixed word (a control).
    """
    _require_symmetric(m)
    if isinstance(shift, str):
        shift = reduce(shift, m.rank)
    nu = empirical_cylinder_measure(m, L, trials, N, seed, horizon_fraction, parallel)
    nstar = N - int(math.floor(horizon_fraction * N))
    germs = map_trials(lambda t: _pushed_germ(m, pi, L, N, seed, t, cap, nstar, shift), trials, parallel)
    capped = sum(1 for g in germs if g == "capped")
    failed = sum(1 for g in germs if g is None)
    counts = Counter(Word(g, m.rank) for g in germs if g not in (None, "capped"))
    pushed = CylinderMeasure.from_counts(L, counts, trials, failed + capped, m.rank)
    residual = float(tv_lower_bound(_normalised(nu), _normalised(pushed)))
    return InducedStationarity(residual, nu, pushed, failed, capped)


__all__ = [
    "AbelianProjection",
    "project",
    "StoppingSample",
    "stopping_time",
    "stopping_sample",
    "StoppingBatch",
    "stopping_batch",
    "InducedMeasure",
    "induced_measure_empirical",
    "symmetry_tv",
    "TailFit",
    "tau_tail_fit",
    "MomentCurve",
    "induced_moment_scan",
    "InducedStationarity",
    "induced_stationarity_check",
]
