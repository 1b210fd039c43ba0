from collections import defaultdict
from fractions import Fraction as Fr

import numpy as np
import pytest

from freewalk.cosets import (
    _half_line_distances,
    cesaro_coset_measure,
    lemma52_fraction,
    stationary_distribution,
    thm3_curve,
    thm3_fraction,
    thm4_curve,
    thm4_fraction,
    tracking_geodesic,
    tracking_sample,
)
from freewalk.errors import InputError, ResolutionError
from freewalk.freegroup import Word, dist_to_geodesic
from freewalk.stepmeasure import delta, lazy_nn, measure, nn_uniform, squares
from freewalk.subgroup import SchreierBall, fold
from freewalk.walk import sample_path

import oracles

KER_A = fold(["aa", "b", "abA"])
KER_A3 = fold(["aaa", "b", "abA", "aabAA"])
SQUARES = fold(["aa", "bb"])
RADII = list(range(0, 21, 2))


# --- tracking ---------------------------------------------------------------------


@pytest.mark.parametrize("g", ["a", "ab", "aBB", "abab"])
def test_delta_walk_tracks_at_zero(g):
    b = tracking_sample(delta(g), 50, 1)
    T = 40  # confirmed germ depth is |g| * 50
    assert thm3_fraction(b, 5, 0).fraction == 1
    # the ray passes through a position only every |g| vertices; the rest are within |g| // 2
    assert thm4_fraction(b, 5, 0, T=T).fraction == pytest.approx(-(-T // len(g)) / T)
    assert thm4_fraction(b, 5, len(g) // 2, T=T).fraction == 1


def test_half_line_distances_match_direct():
    b = tracking_sample(nn_uniform(), 300, 4)
    sigma = tracking_geodesic(b, 5)
    dist, unknown = _half_line_distances(b.forward, sigma, 300)
    pos = b.forward.positions
    for n in range(1, 301):
        if not unknown[n - 1]:
            assert dist[n - 1] == dist_to_geodesic(pos[n], sigma, half_line=True)


def test_thm3_nn_properties():
    for seed in range(20):
        b = tracking_sample(nn_uniform(), 10_000, seed)
        curve = thm3_curve(b, 20, RADII)
        fr = [r.fraction for r in curve]
        assert 0 < fr[0] < 1
        assert all(x <= y for x, y in zip(fr, fr[1:]))
        assert fr[5] > fr[1]  # R = 10 vs R = 2
        assert all(r.horizon == 10_000 for r in curve)


def test_thm4_nn_monotone():
    for seed in range(10):
        b = tracking_sample(nn_uniform(), 10_000, seed)
        T = int(0.4 * 0.5 * 10_000)
        curve = thm4_curve(b, 20, RADII, T)
        fr = [r.fraction for r in curve]
        assert all(x <= y for x, y in zip(fr, fr[1:]))
        assert fr[5] >= fr[1]


def test_thm4_coverage_brute_force():
    # coverage of ray vertices computed by direct distance to every position
    b = tracking_sample(nn_uniform(), 400, 9)
    sigma = tracking_geodesic(b, 5)
    p = sigma.pivot_distance
    ray = sigma.positive.prefix.text
    T = 40  # confirmed germ depth is |g| * 50
    pos = [w.text for w in b.forward.positions[:401]]
    for R in (0, 1, 3):
        covered = sum(
            any(len(oracles.red(ray[:d][::-1].swapcase() + w)) <= R for w in pos) for d in range(p, p + T)
        )
        assert thm4_fraction(b, 5, R, T, N=400).fraction == covered / T


def test_thm4_needs_depth():
    b = tracking_sample(nn_uniform(), 100, 2)
    with pytest.raises(ResolutionError):
        thm4_fraction(b, 5, 2, T=10_000)


def test_horizon_checked():
    b = tracking_sample(nn_uniform(), 100, 2)
    with pytest.raises(InputError):
        thm3_fraction(b, 5, 2, N=1000)


# --- subgroup orbit ---------------------------------------------------------------------


def test_lemma52_examples():
    p = sample_path(nn_uniform(), 2000, 3)
    assert lemma52_fraction(p, fold(["a", "b"]), 1).fraction == 1
    assert lemma52_fraction(p, KER_A, 2).fraction == 1
    assert lemma52_fraction(p, KER_A, 1).fraction < 1
    assert lemma52_fraction(sample_path(squares(), 2000, 3), SQUARES, 1).fraction == 1


def test_lemma52_against_brute_force():
    ball = SchreierBall(SQUARES)
    for seed in range(10):
        p = sample_path(nn_uniform(), 8, seed)
        d = [oracles.brute_coset_distance(w.text, oracles.in_even_runs, len(w)) for w in p.positions[1:]]
        for R in (1, 2, 3):
            assert lemma52_fraction(p, ball, R).fraction == pytest.approx(np.mean(np.array(d) < R))


def test_lemma52_monotone_in_R():
    p = sample_path(nn_uniform(), 5000, 5)
    fr = [lemma52_fraction(p, SQUARES, R).fraction for R in range(0, 30, 3)]
    assert all(x <= y for x, y in zip(fr, fr[1:]))


# --- Cesàro coset measures ------------------------------------------------------------


def test_cesaro_whole_group():
    mu = cesaro_coset_measure(nn_uniform(), fold(["a", "b"]), 50, 5)
    assert mu.masses == {"": 1}
    assert mu.leaked_mass == 0 and mu.finite_support


@pytest.mark.parametrize("N", [1, 2, 17, 100])
def test_cesaro_index_two(N):
    mu = cesaro_coset_measure(nn_uniform(), KER_A, N, 5)
    assert mu.masses == {"": Fr(1, 2), "a": Fr(1, 2)}
    assert mu.argmax == ["", "a"]


def test_cesaro_squares_leaks():
    mu = cesaro_coset_measure(nn_uniform(), SQUARES, 200, 30)
    assert mu.total == 1
    assert not mu.finite_support
    hist = sorted(mu.tail_history.items())
    assert all(a[1] < b[1] for a, b in zip(hist, hist[1:]))
    short = cesaro_coset_measure(nn_uniform(), SQUARES, 50, 30)
    assert mu.tail_mass(10) > short.tail_mass(10)


@pytest.mark.parametrize("m", [nn_uniform(), lazy_nn()])
def test_lumped_equals_generic(m):
    a = cesaro_coset_measure(m, SQUARES, 25, 7, engine="lumped")
    b = cesaro_coset_measure(m, SQUARES, 25, 7, engine="generic")
    assert a.total == b.total == 1
    assert a.leaked_mass == b.leaked_mass

    def by_dist(mu):
        out = defaultdict(Fr)
        for k, v in mu.masses.items():
            out[mu.class_dist[k]] += v
        return dict(out)

    assert by_dist(a) == by_dist(b)
    # core cosets and depth-1 hanging cosets are single cosets in both engines
    assert a.masses[""] == b.masses[""] and a.masses["a"] == b.masses["a"]
    assert a.masses["ab+0"] == b.masses["ab"]


def test_lumped_rejects_other_measures():
    with pytest.raises(InputError):
        cesaro_coset_measure(squares(), SQUARES, 5, 4, engine="lumped")
    with pytest.raises(InputError):
        cesaro_coset_measure(nn_uniform().to_float(), SQUARES, 5, 4)


def test_cesaro_generic_total_exact():
    m = measure({"a": Fr(1, 3), "b": Fr(1, 3), "AB": Fr(1, 3)})
    mu = cesaro_coset_measure(m, SQUARES, 30, 6)
    assert mu.total == 1
    assert isinstance(mu.leaked_mass, Fr)


def _coset_matrix(m, cosets, coset_of):
    n = len(cosets)
    P = np.zeros((n, n))
    for i, rep in enumerate(cosets):
        for w, p in m.items():
            P[i, coset_of(rep + w.text)] += float(p)
    return P


@pytest.mark.parametrize(
    "m",
    [
        nn_uniform(),
        measure({"a": Fr(1, 2), "b": Fr(1, 4), "B": Fr(1, 4)}),
        measure({"a": Fr(1, 2), "A": Fr(1, 6), "b": Fr(1, 6), "aab": Fr(1, 6)}),
    ],
)
def test_stationary_fixed_point_index_three(m):
    coset_of = lambda w: oracles.exponent_sum(w, "a") % 3  # noqa: E731
    P = _coset_matrix(m, ["", "a", "aa"], coset_of)
    pi = oracles.power_iteration(P)
    mu = cesaro_coset_measure(m, KER_A3, 1000, 3)
    got = np.array([float(mu.masses.get(r, 0)) for r in ("", "a", "A")])
    # representatives "a" and "A" are the cosets with a-exponent 1 and 2
    want = np.array([pi[0], pi[1], pi[2]])
    assert 0.5 * np.abs(got - want).sum() < 0.01
    solved = stationary_distribution(m, KER_A3)
    assert max(abs(solved[r] - w) for r, w in zip(("", "a", "A"), want)) < 1e-9


def test_stationary_index_two_nn():
    mu = cesaro_coset_measure(nn_uniform(), KER_A, 1000, 3)
    assert stationary_distribution(nn_uniform(), KER_A) == pytest.approx({"": 0.5, "a": 0.5})
    assert mu.masses == {"": Fr(1, 2), "a": Fr(1, 2)}


def test_stationary_rejects_infinite_index():
    with pytest.raises(InputError):
        stationary_distribution(nn_uniform(), SQUARES)


def test_argmax_closed_under_support():
    m = measure({"a": Fr(1, 2), "b": Fr(1, 4), "B": Fr(1, 4)})
    mu = cesaro_coset_measure(m, KER_A3, 1000, 3)
    best = max(mu.masses.values())
    near = {k for k, v in mu.masses.items() if best - v < Fr(1, 1000)}
    ball = SchreierBall(KER_A3)
    reps = {ball.trace(k): k for k in mu.masses}
    for k in near:
        for s in m.support:
            assert reps[ball.trace(Word(k).text + s.text)] in near


def test_to_dict_is_serialisable():
    import json

    d = cesaro_coset_measure(nn_uniform(), SQUARES, 10, 4).to_dict()
    json.dumps(d)
    assert d["masses"][""].count("/") == 1
