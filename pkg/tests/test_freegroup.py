import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from freewalk.errors import EmptyGeodesicError, InputError, ResolutionError
from freewalk.freegroup import (
    TREE,
    Alphabet,
    BiInfiniteGeodesic,
    BoundaryPoint,
    Word,
    ball,
    distance,
    dist_to_geodesic,
    geodesic_between,
    gromov_product,
    inverse,
    multiply,
    reduce,
    sphere,
    sphere_size,
)

import oracles

raw_words = st.text(alphabet="aAbB", max_size=14)
words = raw_words.map(reduce)


def W(s):
    return Word(s)


def germ(s):
    return BoundaryPoint(Word(s))


@pytest.mark.parametrize(
    "raw,expected",
    [("a b B a", "aa"), ("", ""), ("a A", ""), ("abBA", ""), ("aBbbA", "abA")],
)
def test_reduce_examples(raw, expected):
    assert reduce(raw).text == expected


def test_reduce_rejects_foreign_letters():
    with pytest.raises(InputError):
        reduce("abc")
    with pytest.raises(InputError):
        Word("aA")


@given(raw_words)
def test_reduce_idempotent_and_minimal(raw):
    w = reduce(raw)
    assert reduce(w.text) == w
    assert w.text == oracles.red(raw)


@pytest.mark.parametrize("u,v,expected", [("ab", "BA", ""), ("ab", "b", "abb"), ("ab", "Ba", "aa")])
def test_multiply_examples(u, v, expected):
    assert multiply(W(u), W(v)).text == expected


def test_multiply_rank_mismatch():
    with pytest.raises(InputError):
        multiply(Word("a", 2), Word("a", 3))


@given(words, words, words)
def test_group_laws(u, v, w):
    assert multiply(multiply(u, v), w) == multiply(u, multiply(v, w))
    assert multiply(u, inverse(u)).is_identity
    assert len(multiply(u, v)) <= len(u) + len(v)


@given(words, words, words)
def test_metric_axioms(x, y, z):
    assert distance(x, y) == distance(y, x)
    assert (distance(x, y) == 0) == (x == y)
    assert distance(x, z) <= distance(x, y) + distance(y, z)
    assert distance(Word(""), x) == len(x)


@pytest.mark.parametrize("x,y,expected", [("aab", "aba", 1), ("ab", "ab", 2), ("a", "A", 0)])
def test_gromov_examples(x, y, expected):
    assert gromov_product(W(x), W(y)) == expected


def test_gromov_formula_exhaustive_radius_6():
    pts = list(ball(2, 6))
    assert len(pts) == 1 + sum(sphere_size(2, n) for n in range(1, 7))
    for x, y in itertools.product(pts, repeat=2):
        formula = (len(x) + len(y) - len(multiply(inverse(x), y))) // 2
        assert formula == gromov_product(x, y)


def test_sphere_matches_oracle():
    for n in range(5):
        assert sorted(w.text for w in sphere(2, n)) == sorted(w for w in oracles.words_upto(n) if len(w) == n)
    assert sphere_size(3, 2) == 6 * 5


def test_tree_model_constants():
    assert (TREE.a, TREE.K, TREE.kappa) == (1, 0, 0)


def test_alphabet():
    assert Alphabet(2).chars == "aAbB"
    with pytest.raises(InputError):
        Alphabet(0)


# --- geodesics -----------------------------------------------------------------------


@pytest.mark.parametrize("minus,plus,pivot", [("A", "a", ""), ("ab", "aB", "a"), ("aab", "aaBB", "aa")])
def test_geodesic_between_examples(minus, plus, pivot):
    g = geodesic_between(germ(minus), germ(plus))
    assert g.pivot.text == pivot
    assert g.pivot_distance == len(pivot) == gromov_product(W(minus), W(plus))


def test_geodesic_errors():
    with pytest.raises(EmptyGeodesicError):
        geodesic_between(germ("a"), germ("a"))
    with pytest.raises(ResolutionError):
        geodesic_between(germ("a"), germ("ab"))


@given(words, words)
def test_geodesic_flip_equivariant(x, y):
    if not x.text or not y.text:
        return
    try:
        g = geodesic_between(BoundaryPoint(x), BoundaryPoint(y))
    except (EmptyGeodesicError, ResolutionError):
        return
    h = geodesic_between(BoundaryPoint(y), BoundaryPoint(x))
    assert h.pivot == g.pivot
    assert h.vertices() == g.vertices()[::-1]
    assert g.reversed().vertices() == h.vertices()


def test_geodesic_json_roundtrip():
    g = geodesic_between(germ("abA"), germ("aBB"))
    assert set(json.loads(g.to_json())) == {"minus_germ", "plus_germ", "pivot"}
    assert BiInfiniteGeodesic.from_json(g.to_json()).vertices() == g.vertices()


AXIS = ("AAAAAAAA", "aaaaaaaa")


@pytest.mark.parametrize("g,expected", [("b", 1), ("", 0), ("ba", 2), ("aab", 1), ("aBa", 2)])
def test_dist_to_geodesic_examples(g, expected):
    sigma = geodesic_between(germ(AXIS[0]), germ(AXIS[1]))
    assert dist_to_geodesic(W(g), sigma) == expected


def test_dist_to_geodesic_matches_bfs():
    sigma = geodesic_between(germ("Abab"), germ("aBBa"))
    known = {w.text for w in sigma.vertices()}
    half = {w.text for w in sigma.vertices() if w.text.startswith("a") or not w.text}
    for g in oracles.words_upto(3):
        if g.startswith(("Abab", "aBBa")):
            continue
        assert dist_to_geodesic(W(g), sigma) == oracles.bfs_distance(g, known, 8)
        assert dist_to_geodesic(W(g), sigma, half_line=True) == oracles.bfs_distance(g, half, 8)


def test_dist_to_geodesic_refuses_beyond_germ():
    sigma = geodesic_between(germ("A"), germ("ab"))
    with pytest.raises(ResolutionError):
        dist_to_geodesic(W("abb"), sigma)


def test_w4_germs_stabilise_along_tracking_sequence():
    # x_n within distance C of sigma(t_n), t_n -> infinity: germs of x_n converge to y+
    plus = "abaBBabaab" * 3
    sigma = geodesic_between(germ("B"), germ(plus))
    for C in range(3):
        for t in range(C + 1, len(plus) - C):
            base = plus[:t]
            for off in oracles.words_upto(C):
                x = W(oracles.red(base + off))
                assert dist_to_geodesic(x, sigma) <= C
                assert gromov_product(x, W(plus)) >= t - C


def test_w5_rays_to_same_end_merge():
    # geodesic rays from u and v towards the same end share every vertex past both branch points
    end = "abABabAB"
    for u, v in itertools.product(oracles.words_upto(2), repeat=2):
        def ray(start):
            c = gromov_product(W(start), W(end))
            down = [start[:n] for n in range(len(start), c - 1, -1)]
            return down + [end[:n] for n in range(c + 1, len(end) + 1)]

        ru, rv = ray(u), ray(v)
        tail = max(gromov_product(W(u), W(end)), gromov_product(W(v), W(end)))
        assert [x for x in ru if len(x) > tail and end.startswith(x)] == [x for x in rv if len(x) > tail and end.startswith(x)]
