import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from freewalk.errors import InputError
from freewalk.freegroup import Word, distance, multiply
from freewalk.stepmeasure import delta, nn_uniform, uniform
from freewalk.walk import drift_estimate, escape_check, sample_bilateral, sample_path

import oracles


def test_delta_positions():
    p = sample_path(delta("a"), 5, 1)
    assert [w.text for w in p.positions] == ["", "a", "aa", "aaa", "aaaa", "aaaaa"]
    assert all(w.is_identity for w in sample_path(delta(""), 5, 1).positions)
    assert [w.text for w in sample_bilateral(delta("a"), 3, 1).backward.positions] == ["", "A", "AA", "AAA"]


def test_positions_are_partial_products():
    p = sample_path(nn_uniform(), 500, 11)
    pos = p.positions
    for n, g in enumerate(p.increments, start=1):
        assert pos[n] == multiply(pos[n - 1], g)
    assert list(p.lengths) == [len(w) for w in pos]
    assert p.position(321) == pos[321]


def test_reproducible_serialisation():
    a = sample_path(nn_uniform(), 1000, 42).serialize()
    b = sample_path(nn_uniform(), 1000, 42).serialize()
    assert a == b
    assert a != sample_path(nn_uniform(), 1000, 43).serialize()


def test_distinct_seeds_distinct_streams():
    m = nn_uniform()
    for s in range(100):
        a = sample_path(m, 10, s).increments
        b = sample_path(m, 10, s + 1000).increments
        assert a != b


def test_forward_and_backward_are_independent_streams():
    b = sample_bilateral(nn_uniform(), 50, 3)
    assert b.forward.stream != b.backward.stream
    assert b.forward.increments != tuple(g.inverse() for g in b.backward.increments)


def test_forward_backward_length_laws_agree():
    m = nn_uniform()
    fwd, bwd = [], []
    for t in range(1000):
        b = sample_bilateral(m, 1000, 5, trial=t)
        fwd.append(b.forward.lengths[-1])
        bwd.append(b.backward.lengths[-1])
    assert stats.ks_2samp(fwd, bwd).statistic < 0.05 + 0.03  # 0.05 target plus two-sample noise at n = 1000


def test_drift_examples():
    assert drift_estimate(delta("a"), 100, 10, 1).mean == 1.0
    assert drift_estimate(delta("abab"), 100, 10, 1).mean == 4.0
    # abA is not cyclically reduced: (abA)^N = a b^N A, so the rate is the translation length 1
    assert drift_estimate(delta("abA"), 100, 10, 1).mean == pytest.approx(102 / 100)
    assert abs(drift_estimate(uniform(["a", "A"]), 10_000, 20, 1).mean) < 0.05
    est = drift_estimate(nn_uniform(), 10_000, 100, 7)
    assert abs(est.mean - float(oracles.distance_chain_drift(2))) < 0.01
    assert est.to_dict().keys() == {"mean", "ci", "N", "trials", "seed"}


def test_drift_preconditions():
    with pytest.raises(InputError):
        drift_estimate(nn_uniform(), 10, 10, 1)
    with pytest.raises(InputError):
        drift_estimate(nn_uniform(), 100, 2, 1)


def test_drift_parallel_invariant():
    a = drift_estimate(nn_uniform(), 1000, 40, 3, parallel=1)
    b = drift_estimate(nn_uniform(), 1000, 40, 3, parallel=4)
    assert a == b


def test_single_path_drift_in_band():
    hits = sum(0.45 <= sample_path(nn_uniform(), 10_000, s).lengths[-1] / 10_000 <= 0.55 for s in range(100))
    assert hits >= 95


def test_escape_check():
    assert escape_check(sample_path(delta("a"), 100, 1))
    assert not escape_check(sample_path(delta(""), 100, 1))
    assert sum(escape_check(sample_path(nn_uniform(), 10_000, s)) for s in range(100)) >= 99


@given(st.integers(0, 2**64 - 1), st.integers(0, 200), st.integers(0, 200))
def test_subadditivity_witness(seed, n, k):
    p = sample_path(uniform(["a", "B", "ab", "A", "b", "BA"]), 400, seed)
    pos = p.positions
    k = min(k, 400 - n)
    assert len(pos[n + k]) <= len(pos[n]) + distance(pos[n], pos[n + k])
