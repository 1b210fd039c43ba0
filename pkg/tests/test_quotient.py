import itertools
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from freewalk.errors import InputError, InsufficientDataError
from freewalk.freegroup import Word
from freewalk.quotient import (
    AbelianProjection,
    StoppingBatch,
    induced_measure_empirical,
    induced_moment_scan,
    induced_stationarity_check,
    project,
    stopping_batch,
    stopping_sample,
    stopping_time,
    symmetry_tv,
    tau_tail_fit,
)
from freewalk.rng import stream
from freewalk.stepmeasure import delta, measure, nn_uniform, reflect, uniform
from freewalk.walk import sample_path

import oracles

PI = AbelianProjection.parse("a:1,b:0")
PI2 = AbelianProjection.parse("a:1/0,b:0/1")
LAZY_Z = {1: Fr(1, 4), -1: Fr(1, 4), 0: Fr(1, 2)}  # image of the NN walk under PI


@pytest.fixture(scope="module")
def nn_batch():
    return stopping_batch(nn_uniform(), PI, 20_000, 10_000, seed=3)


@pytest.mark.parametrize("w,expected", [("aba", 2), ("bAb", -1), ("", 0), ("abAB", 0)])
def test_project_examples(w, expected):
    assert project(PI, w) == expected


def test_project_j2_and_modulus():
    assert project(PI2, "abAbb") == (0, 3)
    assert project(AbelianProjection.parse("a:1,b:0", modulus=[2]), "aaa") == 1


def test_parse_errors():
    for bad in ("a:1", "a:1,b:0,a:2", "a:x,b:0", "a:1/0,b:1"):
        with pytest.raises(InputError):
            AbelianProjection.parse(bad)
    assert PI2.describe() == "a:1/0,b:0/1"


def test_project_homomorphism_exhaustive():
    ws = oracles.words_upto(4)
    for pi in (PI, PI2, AbelianProjection.parse("a:2,b:-3")):
        for u, v in itertools.product(ws, repeat=2):
            lhs = pi.project(oracles.red(u + v))
            assert lhs == tuple(x + y for x, y in zip(pi.project(u), pi.project(v)))


@given(st.text(alphabet="aAbB", max_size=20))
def test_kernel_is_normal(w):
    w = oracles.red(w)
    for g in oracles.words_upto(2):
        conj = oracles.red(g + w + g[::-1].swapcase())
        assert PI.in_kernel(conj) == PI.in_kernel(w)


def test_stallings_rejected():
    with pytest.raises(InputError, match="Stallings"):
        PI.stallings()


def test_stopping_time_examples():
    s = stopping_time(["b"], PI)
    assert (s.tau, s.xi.text) == (1, "b")
    s = stopping_time(["a", "b", "A", "a"], PI)
    assert (s.tau, s.xi.text) == (3, "abA")
    s = stopping_time(["a", "a", "b"], PI)
    assert s.capped and s.tau == 3


def test_stopping_invariants_on_sampled_paths():
    for seed in range(200):
        p = sample_path(nn_uniform(), 300, seed)
        s = stopping_time(p.increments, PI)
        if s.capped:
            continue
        assert oracles.exponent_sum(s.xi.text, "a") == 0
        prefix = ""
        for g in p.increments[: s.tau - 1]:
            prefix = oracles.red(prefix + g.text)
            assert oracles.exponent_sum(prefix, "a") != 0
        assert s.xi == p.position(s.tau)


def test_stopping_sample_matches_stopping_time():
    # the fast path and the reference path agree on draws from one stream
    from freewalk.stepmeasure import draw_choices

    m = nn_uniform()
    for t in range(100):
        fast = stopping_sample(m, PI, 5000, stream(11, t))
        rng = stream(11, t)
        choices = np.concatenate([draw_choices(m, rng, size) for size in (64, 128, 256, 512, 1024, 2048, 968)])
        slow = stopping_time([m.support[c] for c in choices], PI)
        assert (fast.tau, fast.xi) == (slow.tau, slow.xi)


def test_tau_law_matches_first_return(nn_batch):
    law = oracles.first_return_law(LAZY_Z, 6)
    n = nn_batch.trials
    for k, p in enumerate(law, start=1):
        freq = np.mean(nn_batch.taus == k)
        se = np.sqrt(float(p) * (1 - float(p)) / n)
        assert abs(freq - float(p)) < 4 * se, k
    assert law[0] == Fr(1, 2) and law[1] == Fr(1, 8)


def test_capped_fraction_matches_tail():
    law = oracles.first_return_law({k: float(v) for k, v in LAZY_Z.items()}, 1600)
    m = nn_uniform()
    rates = {}
    for cap in (100, 1600):
        batch = stopping_batch(m, PI, 20_000, cap, seed=5)
        exact = 1 - sum(law[:cap])
        se = np.sqrt(exact * (1 - exact) / 20_000)
        assert abs(batch.cap_rate - exact) < 4 * se
        rates[cap] = batch.cap_rate
    # P(tau > C) ~ c C^(-1/2): a 16-fold cap cuts the rate about 4-fold
    assert 3.2 < rates[100] / rates[1600] < 4.8


def test_induced_measure_small(nn_batch):
    im = induced_measure_empirical(nn_uniform(), PI, 20_000, 10_000, seed=3)
    assert np.array_equal(im.batch.taus, nn_batch.taus)
    assert abs(float(im.measure[Word("b")]) - 0.25) < 0.02
    assert all(PI.in_kernel(w) for w in im.measure.support)
    sym = reflect(im.measure)
    keys = set(im.measure.support) | set(sym.support)
    direct = 0.5 * sum(abs(float(im.measure[k]) - float(sym[k])) for k in keys)
    assert symmetry_tv(im.counts) == pytest.approx(direct)
    assert im.to_dict()["capped"] == im.capped


@pytest.mark.slow
def test_induced_measure_symmetry_full_scale():
    im = induced_measure_empirical(nn_uniform(), PI, 100_000, 10_000, seed=7)
    singletons = sum(c for c in im.counts.values() if c == 1) / sum(im.counts.values())
    # short words: the reflection symmetry is visible at Monte Carlo precision
    assert symmetry_tv(im.counts, max_length=6) < 0.02
    # all words: words seen once have no observed mirror, so they bound the distance from below
    full = symmetry_tv(im.counts)
    assert singletons / 2 <= full <= singletons + 0.02


def test_symmetry_tv_examples():
    assert symmetry_tv({Word("b"): 3, Word("B"): 3}) == 0
    assert symmetry_tv({Word("b"): 1}) == 1
    assert symmetry_tv({Word("b"): 1, Word("abA"): 1}, max_length=2) == 0.5


def test_induced_needs_symmetric():
    with pytest.raises(InputError):
        induced_measure_empirical(delta("a"), PI, 10, 10, seed=1)


def test_degenerate_projection_gives_first_step():
    pi0 = AbelianProjection.parse("a:0,b:0")
    im = induced_measure_empirical(nn_uniform(), pi0, 2000, 10, seed=2)
    assert set(im.batch.taus) == {1}
    assert sorted(w.text for w in im.measure.support) == sorted("aAbB")


def test_cap_warning():
    with pytest.warns(RuntimeWarning):
        induced_measure_empirical(nn_uniform(), PI2, 200, 2, seed=2)


def test_j2_kernel():
    im = induced_measure_empirical(nn_uniform(), PI2, 500, 2000, seed=4)
    for w in im.measure.support:
        assert oracles.exponent_sum(w.text, "a") == 0 and oracles.exponent_sum(w.text, "b") == 0
    assert im.capped > 0


def test_tail_fit_synthetic():
    rng = np.random.default_rng(0)
    taus = np.ceil(rng.random(1_000_000) ** -2).astype(np.int64)
    fit = tau_tail_fit(taus)
    assert abs(fit.slope + 0.5) < 0.01
    assert fit.window == (100, 1000)


def test_tail_fit_refusals():
    with pytest.raises(InsufficientDataError):
        tau_tail_fit(np.ones(20_000, dtype=np.int64))
    with pytest.raises(InsufficientDataError):
        tau_tail_fit(np.full(100, 500))
    with pytest.raises(InputError):
        tau_tail_fit(np.full(20_000, 50), np.ones(20_000, dtype=bool))
    deg = stopping_batch(uniform(["b", "B"]), PI, 10_000, 10_000, seed=1)
    with pytest.raises(InsufficientDataError):
        tau_tail_fit(deg.taus, deg.capped)


def test_tail_fit_nn(nn_batch):
    fit = tau_tail_fit(nn_batch.taus, nn_batch.capped)
    assert -0.6 <= fit.slope <= -0.4


def test_moment_scan():
    rng = np.random.default_rng(1)
    lengths = np.ceil(rng.random(50_000) ** -2).astype(np.int64)
    scan = induced_moment_scan(lengths, [0, 0.25, 1.0])
    assert np.all(scan[0.0].running_mean == 1)
    assert scan[0.0].stabilized
    assert scan[0.25].stabilized
    with pytest.raises(InsufficientDataError):
        induced_moment_scan(np.ones(5), [1])


def test_batch_csv_roundtrip(nn_batch):
    back = StoppingBatch.from_csv(nn_batch.to_csv())
    assert np.array_equal(back.taus, nn_batch.taus)
    assert np.array_equal(back.capped, nn_batch.capped)
    with pytest.raises(InputError):
        StoppingBatch.from_csv("a,b\n1,2\n")


def test_batch_parallel_invariant():
    a = stopping_batch(nn_uniform(), PI, 300, 1000, seed=9)
    b = stopping_batch(nn_uniform(), PI, 300, 1000, seed=9, parallel=4)
    assert a.to_csv() == b.to_csv() and a.xis == b.xis


def test_induced_stationarity_small():
    good = induced_stationarity_check(nn_uniform(), PI, 2, 5000, seed=1, N=500)
    bad = induced_stationarity_check(nn_uniform(), PI, 2, 5000, seed=1, N=500, shift="a")
    assert good.residual < 0.06
    assert bad.residual > 0.1
    assert good.pushed.depth == 2


def test_induced_stationarity_shift_control_exact():
    # translating the exact uniform measure by "a": [A.] cylinders collapse into [aa..]-free mass
    from freewalk.boundary import prepend, uniform_cylinder_measure
    from freewalk.freegroup import BoundaryPoint

    base = uniform_cylinder_measure(2, 3)
    pushed: dict[str, Fr] = {}
    for w, p in base.masses.items():
        v = prepend(Word("a"), BoundaryPoint(w), 2)
        pushed[v.text] = pushed.get(v.text, Fr(0)) + p
    target = uniform_cylinder_measure(2, 2)
    tv = sum(abs(pushed.get(w.text, Fr(0)) - p) for w, p in target.masses.items()) / 2
    assert tv > Fr(1, 10)
