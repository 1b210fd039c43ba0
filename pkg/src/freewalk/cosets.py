"""Tracking statistics along random walks and exact Cesàro coset measures.

Tracking compares a walk with the geodesic joining its backward and forward
limits.  The forward germ is the deepest prefix confirmed by the path, so a
walk is normally sampled for twice the counting horizon and only the first
half is scored.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .boundary import confirmed_germ, extract_limit
from .errors import InputError, ResolutionError, ResourceError
from .freegroup import BiInfiniteGeodesic, Word, geodesic_between, letter_char, to_array
from .rng import map_trials
from .stepmeasure import StepDistribution
from .subgroup import DEFAULT_BUDGET, SchreierBall, StallingsGraph, _letter_order
from .walk import BilateralSample, PathSample, sample_bilateral


@dataclass(frozen=True)
class TrackingReport:
    """Fraction of qualifying indices among ``horizon``; failures never count as qualifying."""

    R: int
    horizon: int
    fraction: float
    failures: int = 0

    def to_dict(self) -> dict:
        return {"R": self.R, "horizon": self.horizon, "fraction": self.fraction, "failures": self.failures}


# --- geodesic from a bilateral sample ---------------------------------------------


def tracking_geodesic(bilateral: BilateralSample, L: int, horizon_fraction: float = 0.5) -> BiInfiniteGeodesic:
    """sigma from the backward germ at depth L and the deepest confirmed forward germ (at least L)."""
    minus = extract_limit(bilateral.backward, L, horizon_fraction)
    plus = confirmed_germ(bilateral.forward, horizon_fraction, min_depth=L)
    return geodesic_between(minus, plus)


def _half_line_distances(path: PathSample, sigma: BiInfiniteGeodesic, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Distances from w_1..w_N to sigma restricted to [pivot, +inf), and a mask of undetermined ones."""
    germ = to_array(sigma.positive.prefix)
    lengths, agree = path.agreement(germ)
    lengths, agree = lengths[1 : N + 1], agree[1 : N + 1]
    p = sigma.pivot_distance
    beyond = agree > p
    dist = np.where(beyond, lengths - agree, lengths - agree + (p - agree))
    unknown = (agree == len(germ)) & (lengths > agree)
    return dist, unknown


def thm3_curve(bilateral: BilateralSample, L: int, radii: Sequence[int], N: int | None = None, horizon_fraction: float = 0.5) -> list[TrackingReport]:
    """For each R, the fraction of 1 <= n <= N with dist(w_n, sigma|[0, inf)) <= R.

    ``N`` defaults to half the forward path, leaving the rest to confirm the germ.
    """
    fwd = bilateral.forward
    N = fwd.N // 2 if N is None else N
    if not 1 <= N <= fwd.N:
        raise InputError(f"counting horizon {N} outside 1..{fwd.N}")
    sigma = tracking_geodesic(bilateral, L, horizon_fraction)
    dist, unknown = _half_line_distances(fwd, sigma, N)
    failures = int(unknown.sum())
    known = dist[~unknown]
    return [TrackingReport(int(R), N, int((known <= R).sum()) / N, failures) for R in radii]


def thm3_fraction(bilateral: BilateralSample, L: int, R: int, N: int | None = None, horizon_fraction: float = 0.5) -> TrackingReport:
    return thm3_curve(bilateral, L, [R], N, horizon_fraction)[0]


def _coverage(lengths: np.ndarray, agree: np.ndarray, R: int, lo: int, hi: int) -> int:
    """Number of depths d in [lo, hi) whose ray vertex lies within R of some position.

    A position at length l agreeing with the ray for c letters is within R of
    the ray vertex at depth d exactly when l - R <= d <= 2c - l + R.
    """
    start = np.maximum(lengths - R, lo)
    stop = np.minimum(2 * agree - lengths + R, hi - 1)
    ok = start <= stop
    diff = np.zeros(hi - lo + 1, dtype=np.int64)
    np.add.at(diff, start[ok] - lo, 1)
    np.add.at(diff, stop[ok] - lo + 1, -1)
    return int((np.cumsum(diff[:-1]) > 0).sum())


def thm4_curve(bilateral: BilateralSample, L: int, radii: Sequence[int], T: int, N: int | None = None, horizon_fraction: float = 0.5) -> list[TrackingReport]:
    """For each R, the fraction of the first T vertices of sigma|[0, inf) within R of {w_n : 0 <= n <= N}."""
    fwd = bilateral.forward
    N = fwd.N // 2 if N is None else N
    if not 1 <= N <= fwd.N:
        raise InputError(f"counting horizon {N} outside 1..{fwd.N}")
    if T < 1:
        raise InputError("T must be positive")
    sigma = tracking_geodesic(bilateral, L, horizon_fraction)
    p, depth = sigma.pivot_distance, sigma.positive.depth
    if p + T > depth:
        raise ResolutionError(f"T = {T} needs germ depth {p + T}, only {depth} confirmed")
    lengths, agree = fwd.agreement(sigma.positive.prefix)
    lengths, agree = lengths[: N + 1], agree[: N + 1]
    return [TrackingReport(int(R), T, _coverage(lengths, agree, int(R), p, p + T) / T, 0) for R in radii]


def thm4_fraction(bilateral: BilateralSample, L: int, R: int, T: int, N: int | None = None, horizon_fraction: float = 0.5) -> TrackingReport:
    return thm4_curve(bilateral, L, [R], T, N, horizon_fraction)[0]


def tracking_sample(m: StepDistribution, N: int, seed: int, trial: int = 0) -> BilateralSample:
    """Forward walk of 2N steps (N scored, N confirming) and backward walk of N steps."""
    return sample_bilateral(m, 2 * N, seed, trial, backward_N=N)


def thm3_trials(m: StepDistribution, N: int, L: int, radii: Sequence[int], trials: int, seed: int, parallel: int = 1) -> list[list[TrackingReport]]:
    return map_trials(lambda t: thm3_curve(tracking_sample(m, N, seed, t), L, radii, N), trials, parallel)


def thm4_trials(m: StepDistribution, N: int, L: int, radii: Sequence[int], T: int, trials: int, seed: int, parallel: int = 1) -> list[list[TrackingReport]]:
    return map_trials(lambda t: thm4_curve(tracking_sample(m, N, seed, t), L, radii, T, N), trials, parallel)


# --- coset distances along a walk -------------------------------------------------


def coset_distances(path: PathSample, ball: SchreierBall) -> np.ndarray:
    """Schreier distance of H w_n from the base coset, n = 0..N."""
    steps = [[int(x) for x in to_array(g)] for g in path.measure.support]
    out = np.empty(path.N + 1, dtype=np.int64)
    v = 0
    out[0] = 0
    for n, c in enumerate(path.choices, start=1):
        for x in steps[c]:
            v = ball.act(v, x)
        out[n] = ball.dist[v]
    return out


def lemma52_fraction(path: PathSample, H2: StallingsGraph | SchreierBall, R: int, budget: int = DEFAULT_BUDGET) -> TrackingReport:
    """Fraction of 1 <= n <= N with dist(w_n, H2) < R."""
    ball = H2 if isinstance(H2, SchreierBall) else SchreierBall(H2, budget)
    d = coset_distances(path, ball)[1:]
    return TrackingReport(int(R), path.N, int((d < R).sum()) / path.N, 0)


# --- Cesàro coset measures --------------------------------------------------------


@dataclass(frozen=True)
class CosetMeasure:
    """mu_N on the cosets of H2 within a Schreier ball, plus the mass that left the ball.

    Keys are coset classes.  A class is a single coset, named by its shortest
    representative, or (lumped engine) all cosets at a given depth of one
    hanging tree, named ``<rep>+<j>``: the cosets whose shortest
    representatives extend ``rep`` by j more letters.
    """

    N: int
    masses: Mapping[str, Fraction]
    window_radius: int
    leaked_mass: Fraction
    class_sizes: Mapping[str, int]
    class_dist: Mapping[str, int]
    finite_support: bool
    tail_history: Mapping[int, Fraction] = field(default_factory=dict)

    @property
    def total(self) -> Fraction:
        return sum(self.masses.values(), Fraction(0)) + self.leaked_mass

    def coset_mass(self, key: str) -> Fraction:
        """Mass of one coset in class ``key``."""
        return self.masses[key] / self.class_sizes[key]

    @property
    def argmax(self) -> list[str]:
        """Classes whose cosets carry the largest single-coset mass."""
        if not self.masses:
            return []
        best = max(self.coset_mass(k) for k in self.masses)
        return sorted(k for k in self.masses if self.coset_mass(k) == best)

    def tail_mass(self, r: int) -> Fraction:
        """Mass of cosets farther than r from the base, leaked mass included."""
        inside = sum((v for k, v in self.masses.items() if self.class_dist[k] > r), Fraction(0))
        return inside + self.leaked_mass

    def to_dict(self) -> dict:
        def q(x: Fraction) -> str:
            return f"{x.numerator}/{x.denominator}"

        return {
            "N": self.N,
            "radius": self.window_radius,
            "leaked_mass": q(self.leaked_mass),
            "finite_support": self.finite_support,
            "argmax": self.argmax,
            "masses": {k: q(v) for k, v in sorted(self.masses.items(), key=lambda kv: (self.class_dist[kv[0]], kv[0]))},
            "class_sizes": dict(sorted(self.class_sizes.items())),
        }


FINITE_SUPPORT_TOL = Fraction(1, 1000)


def _representatives(graph: StallingsGraph) -> list[str]:
    """Shortest representative of each core vertex, BFS in letter order."""
    reps: list[str | None] = [None] * graph.n_vertices
    reps[0] = ""
    queue = deque([0])
    order = _letter_order(graph.rank)
    while queue:
        v = queue.popleft()
        for x in order:
            t = graph.edges[v].get(x)
            if t is not None and reps[t] is None:
                reps[t] = reps[v] + letter_char(x)
                queue.append(t)
    return reps  # type: ignore[return-value]


def _is_letter_uniform(m: StepDistribution) -> bool:
    letters = [p for w, p in m.probs.items() if len(w) == 1]
    others = [w for w in m.probs if len(w) > 1]
    return not others and len(letters) == 2 * m.rank and len(set(letters)) == 1


def _checkpoints(N: int) -> list[int]:
    """Cesàro horizons at which the tail is recorded: N, N/2, N/4, N/8 (those >= 1)."""
    return sorted({max(1, N >> s) for s in range(4)})


class _Chain:
    """Sparse exact Markov chain on coset classes with an absorbing 'leaked' state."""

    def __init__(self):
        self.keys: list[str] = []
        self.dist: list[int] = []
        self.size: list[int] = []
        self.moves: list[list[tuple[int, Fraction]]] = []

    def add(self, key: str, dist: int, size: int) -> int:
        self.keys.append(key)
        self.dist.append(dist)
        self.size.append(size)
        self.moves.append([])
        return len(self.keys) - 1


def _run(chain: _Chain, N: int, radius: int, cap: int) -> CosetMeasure:
    n_states = len(chain.keys)
    cur: dict[int, Fraction] = {0: Fraction(1)}
    total: dict[int, Fraction] = {}
    leaked_now = Fraction(0)
    leaked_sum = Fraction(0)
    marks = set(_checkpoints(N))
    history: dict[int, Fraction] = {}
    for n in range(1, N + 1):
        nxt: dict[int, Fraction] = {}
        for s, p in cur.items():
            for t, q in chain.moves[s]:
                if t < 0:
                    leaked_now += p * q
                else:
                    nxt[t] = nxt.get(t, Fraction(0)) + p * q
        if len(nxt) > cap:
            raise ResourceError(f"coset distribution support exceeds the cap of {cap} states")
        cur = nxt
        for s, p in cur.items():
            total[s] = total.get(s, Fraction(0)) + p
        leaked_sum += leaked_now
        if n in marks:
            r_star = radius // 2
            far = sum((p for s, p in total.items() if chain.dist[s] > r_star), Fraction(0))
            history[n] = (far + leaked_sum) / n
    masses = {chain.keys[s]: p / N for s, p in total.items() if p}
    finite = all(v < FINITE_SUPPORT_TOL for v in history.values())
    used = {chain.keys[s] for s in range(n_states)}
    sizes = {chain.keys[s]: chain.size[s] for s in range(n_states) if chain.keys[s] in masses}
    dists = {chain.keys[s]: chain.dist[s] for s in range(n_states) if chain.keys[s] in used}
    return CosetMeasure(N, masses, radius, leaked_sum / N, sizes, dists, finite, history)


def _generic_chain(m: StepDistribution, H2: StallingsGraph, radius: int, budget: int) -> _Chain:
    ball = SchreierBall(H2, budget)
    reps = _representatives(H2)
    names: dict[int, str] = {}

    def name(v: int) -> str:
        if v not in names:
            if v < H2.n_vertices:
                names[v] = reps[v]
            else:
                # a hanging vertex has exactly one neighbour closer to the base
                x, parent = next((x, t) for x, t in ball.out[v].items() if ball.dist[t] < ball.dist[v])
                names[v] = name(parent) + letter_char(-x)
        return names[v]

    chain = _Chain()
    index: dict[int, int] = {}
    verts: list[int] = []

    def state(v: int) -> int:
        if v not in index:
            index[v] = chain.add(name(v), ball.dist[v], 1)
            verts.append(v)
        return index[v]

    steps = [([int(x) for x in to_array(w)], p) for w, p in m.items()]
    state(0)
    s = 0
    while s < len(verts):
        v = verts[s]
        for letters, p in steps:
            t = v
            for x in letters:
                t = ball.act(t, x)
            chain.moves[s].append((-1 if ball.dist[t] > radius else state(t), p))
        s += 1
    return chain


def _lumped_chain(m: StepDistribution, H2: StallingsGraph, radius: int) -> _Chain:
    """Core cosets individually, hanging-tree cosets lumped by (attachment, depth).

    Valid for measures putting equal mass on each letter and any remaining mass
    on the identity: within a hanging tree every coset at depth j then carries
    the same mass, and the walk moves up or down a depth like a birth-death chain.
    """
    k = m.rank
    q = m[Word(letter_char(1), k)]
    hold = m[Word("", k)]
    reps = _representatives(H2)
    dist = [len(r) for r in reps]
    branch = 2 * k - 1
    chain = _Chain()
    for v in range(H2.n_vertices):
        chain.add(reps[v], dist[v], 1)
    hang: dict[tuple[int, int, int], int] = {}
    todo: list[tuple[int, int, int]] = []

    def hanging(v: int, x: int, j: int) -> int:
        if dist[v] + j > radius:
            return -1
        if (v, x, j) not in hang:
            hang[v, x, j] = chain.add(f"{reps[v]}{letter_char(x)}+{j - 1}", dist[v] + j, branch ** (j - 1))
            todo.append((v, x, j))
        return hang[v, x, j]

    for v in range(H2.n_vertices):
        if hold:
            chain.moves[v].append((v, hold))
        for x in _letter_order(k):
            t = H2.edges[v].get(x)
            chain.moves[v].append((t if t is not None else hanging(v, x, 1), q))
    while todo:
        v, x, j = todo.pop()
        s = hang[v, x, j]
        if hold:
            chain.moves[s].append((s, hold))
        chain.moves[s].append((hanging(v, x, j - 1) if j > 1 else v, q))
        chain.moves[s].append((hanging(v, x, j + 1), branch * q))
    return chain


def cesaro_coset_measure(
    m1: StepDistribution,
    H2: StallingsGraph,
    N: int,
    radius: int,
    budget: int = DEFAULT_BUDGET,
    engine: str = "auto",
) -> CosetMeasure:
    """mu_N = (1/N) sum_{n=1..N} law of H2 w_n, exactly, inside the radius-``radius`` Schreier ball.

    Mass reaching a coset farther than ``radius`` is absorbed into ``leaked_mass``.
    ``finite_support`` is set when the mass beyond radius // 2 stays below 1e-3
    at the Cesàro horizons N, N/2, N/4, N/8.
    """
    if not m1.exact:
        raise InputError("cesaro_coset_measure needs an exact (rational) step distribution")
    if m1.rank != H2.rank:
        raise InputError(f"alphabet mismatch: rank {m1.rank} vs rank {H2.rank}")
    if N < 1 or radius < 0:
        raise InputError("need N >= 1 and radius >= 0")
    if engine == "auto":
        engine = "lumped" if _is_letter_uniform(m1) else "generic"
    if engine == "lumped":
        if not _is_letter_uniform(m1):
            raise InputError("the lumped engine needs equal mass on every letter and nothing longer")
        chain = _lumped_chain(m1, H2, radius)
    elif engine == "generic":
        chain = _generic_chain(m1, H2, radius, budget)
    else:
        raise InputError(f"unknown engine {engine!r}")
    return _run(chain, N, radius, budget)


def stationary_distribution(m: StepDistribution, H2: StallingsGraph) -> dict[str, float]:
    """Stationary law of the coset chain for finite-index H2, by a dense linear solve."""
    if any(len(H2.edges[v]) < 2 * H2.rank for v in range(H2.n_vertices)):
        raise InputError("stationary_distribution needs a finite-index subgroup")
    n = H2.n_vertices
    P = np.zeros((n, n))
    for v in range(n):
        for w, p in m.items():
            t = v
            for x in to_array(w):
                t = H2.edges[t][int(x)]
            P[v, t] += float(p)
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    reps = _representatives(H2)
    return {reps[v]: float(pi[v]) for v in range(n)}
