"""Free group F_k acting on its Cayley tree, basepoint o = identity.

Words are written in ASCII: generators ``a, b, c, ...`` and their inverses
``A, B, C, ...``.  Integer letters are ``+i`` for the i-th generator and
``-i`` for its inverse; those are what the numeric kernels consume.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import EmptyGeodesicError, InputError, ResolutionError

MAX_RANK = 26
_LOWER = "abcdefghijklmnopqrstuvwxyz"

# ascii code -> signed letter, and signed letter (+32 offset) -> ascii code
_TO_INT = np.zeros(256, dtype=np.int8)
_TO_ASCII = np.zeros(2 * MAX_RANK + 1, dtype=np.uint8)
for _i, _c in enumerate(_LOWER, start=1):
    _TO_INT[ord(_c)] = _i
    _TO_INT[ord(_c.upper())] = -_i
    _TO_ASCII[MAX_RANK + _i] = ord(_c)
    _TO_ASCII[MAX_RANK - _i] = ord(_c.upper())


@dataclass(frozen=True)
class TreeModel:
    """Constants of the abstract setup as realised by a Cayley tree.

    Bi-infinite geodesics are (1, 0)-quasi-geodesics and two rays with the
    same endpoint eventually coincide, so the fellow-travel constant is 0.
    """

    a: float = 1.0
    K: float = 0.0
    kappa: float = 0.0


TREE = TreeModel()


_CANCEL = re.compile("|".join(f"{c}{c.upper()}|{c.upper()}{c}" for c in _LOWER))


def letter_char(x: int) -> str:
    c = _LOWER[abs(x) - 1]
    return c if x > 0 else c.upper()


@dataclass(frozen=True)
class Alphabet:
    rank: int

    def __post_init__(self):
        if not 1 <= self.rank <= MAX_RANK:
            raise InputError(f"rank must be in 1..{MAX_RANK}, got {self.rank}")

    @property
    def letters(self) -> tuple[int, ...]:
        """Signed letters in canonical order a, A, b, B, ..."""
        return tuple(s * i for i in range(1, self.rank + 1) for s in (1, -1))

    @property
    def chars(self) -> str:
        return "".join(letter_char(x) for x in self.letters)

    def check(self, text: str) -> None:
        bad = set(text) - set(self.chars)
        if bad:
            raise InputError(f"letters {''.join(sorted(bad))!r} not in alphabet of rank {self.rank}")

    def parse(self, text: str) -> "Word":
        return reduce(text, self.rank)

    def identity(self) -> "Word":
        return Word("", self.rank)

    def generators(self) -> list["Word"]:
        return [Word(letter_char(i), self.rank) for i in range(1, self.rank + 1)]


@dataclass(frozen=True)
class Word:
    """A freely reduced word; simultaneously a group element and a tree vertex."""

    text: str
    rank: int = 2

    def __post_init__(self):
        Alphabet(self.rank).check(self.text)
        m = _CANCEL.search(self.text)
        if m:
            raise InputError(f"{self.text!r} is not freely reduced at position {m.start()}")

    @classmethod
    def trusted(cls, text: str, rank: int = 2) -> "Word":
        """Skip validation; for text produced by a reduction that cannot fail."""
        w = object.__new__(cls)
        object.__setattr__(w, "text", text)
        object.__setattr__(w, "rank", rank)
        return w

    def __str__(self) -> str:
        return self.text

    def __repr__(self) -> str:
        return f"Word({self.text!r})"

    def __len__(self) -> int:
        return len(self.text)

    def __mul__(self, other: "Word") -> "Word":
        return multiply(self, other)

    def __lt__(self, other: "Word") -> bool:
        return sort_key(self) < sort_key(other)

    @property
    def letters(self) -> tuple[int, ...]:
        return tuple(int(x) for x in to_array(self))

    @property
    def is_identity(self) -> bool:
        return not self.text

    def inverse(self) -> "Word":
        return Word.trusted(self.text[::-1].swapcase(), self.rank)

    def prefix(self, n: int) -> "Word":
        return Word.trusted(self.text[:n], self.rank)


def sort_key(w: Word) -> tuple[int, str]:
    """Shortlex order, used wherever output must be canonical."""
    return (len(w.text), w.text)


def to_array(w: Word | str) -> np.ndarray:
    text = w.text if isinstance(w, Word) else w
    return _TO_INT[np.frombuffer(text.encode("ascii"), dtype=np.uint8)]


def from_array(arr: np.ndarray, rank: int = 2) -> Word:
    """Wrap an int8 letter array that is already reduced."""
    arr = np.asarray(arr, dtype=np.int64)
    text = _TO_ASCII[arr + MAX_RANK].tobytes().decode("ascii")
    return Word.trusted(text, rank)


def _reduce_text(text: str) -> str:
    out: list[str] = []
    for c in text:
        if out and out[-1] == c.swapcase():
            out.pop()
        else:
            out.append(c)
    return "".join(out)


def reduce(raw: str | Sequence[int], rank: int = 2) -> Word:
    """Free reduction of a raw letter sequence (string or signed ints)."""
    if isinstance(raw, str):
        text = "".join(raw.split())
    else:
        letters = list(raw)
        for x in letters:
            if not isinstance(x, (int, np.integer)) or x == 0 or abs(x) > rank:
                raise InputError(f"letter {x!r} not in alphabet of rank {rank}")
        text = "".join(letter_char(int(x)) for x in letters)
    Alphabet(rank).check(text)
    return Word.trusted(_reduce_text(text), rank)


def identity(rank: int = 2) -> Word:
    return Word("", rank)


def _same_rank(u: Word, v: Word) -> None:
    if u.rank != v.rank:
        raise InputError(f"alphabet mismatch: rank {u.rank} vs rank {v.rank}")


def multiply(u: Word, v: Word) -> Word:
    _same_rank(u, v)
    a, b = u.text, v.text
    i = 0
    n = min(len(a), len(b))
    while i < n and a[len(a) - 1 - i] == b[i].swapcase():
        i += 1
    return Word.trusted(a[: len(a) - i] + b[i:], u.rank)


def inverse(u: Word) -> Word:
    return u.inverse()


def common_prefix_length(x: str, y: str) -> int:
    n = min(len(x), len(y))
    if n > 64:
        a = np.frombuffer(x[:n].encode("ascii"), dtype=np.uint8)
        b = np.frombuffer(y[:n].encode("ascii"), dtype=np.uint8)
        diff = np.flatnonzero(a != b)
        return int(diff[0]) if diff.size else n
    i = 0
    while i < n and x[i] == y[i]:
        i += 1
    return i


def distance(u: Word, v: Word) -> int:
    """Tree distance d(u.o, v.o) = |u^-1 v|."""
    _same_rank(u, v)
    p = common_prefix_length(u.text, v.text)
    return len(u) + len(v) - 2 * p


def gromov_product(x: Word, y: Word) -> int:
    """<x, y>_o; in the tree this is the length of the common prefix."""
    _same_rank(x, y)
    return common_prefix_length(x.text, y.text)


def sphere(rank: int, n: int) -> Iterator[Word]:
    """All reduced words of length exactly n, in alphabet order (a, A, b, B, ...)."""
    chars = Alphabet(rank).chars

    def extend(prefix: str) -> Iterator[str]:
        if len(prefix) == n:
            yield prefix
            return
        for c in chars:
            if not prefix or c != prefix[-1].swapcase():
                yield from extend(prefix + c)

    for t in extend(""):
        yield Word(t, rank)


def ball(rank: int, radius: int) -> Iterator[Word]:
    return itertools.chain.from_iterable(sphere(rank, n) for n in range(radius + 1))


def sphere_size(rank: int, n: int) -> int:
    return 1 if n == 0 else 2 * rank * (2 * rank - 1) ** (n - 1)


# --- boundary ---------------------------------------------------------------

EXACT = "exact"
ESTIMATED = "estimated"


@dataclass(frozen=True)
class BoundaryPoint:
    """Finite-depth germ of an end of the tree.

    ``source`` is ``"exact"`` when the germ is a true prefix of the end, or
    ``"estimated"`` when it was read off a finite walk with a confirmation
    horizon (``horizon`` steps).
    """

    prefix: Word
    source: str = EXACT
    horizon: int | None = None

    @property
    def depth(self) -> int:
        return len(self.prefix)

    @property
    def rank(self) -> int:
        return self.prefix.rank

    @classmethod
    def parse(cls, text: str, rank: int = 2) -> "BoundaryPoint":
        w = Word(text, rank)
        return cls(w)


@dataclass(frozen=True)
class BiInfiniteGeodesic:
    """The unique geodesic joining two ends; oriented from ``negative`` to ``positive``."""

    negative: BoundaryPoint
    positive: BoundaryPoint
    pivot: Word

    @property
    def pivot_distance(self) -> int:
        return len(self.pivot)

    def reversed(self) -> "BiInfiniteGeodesic":
        return BiInfiniteGeodesic(self.positive, self.negative, self.pivot)

    def vertices(self) -> list[Word]:
        """Known vertices, from the deepest known point of the negative ray to that of the positive ray."""
        neg = self.negative.prefix
        pos = self.positive.prefix
        down = [neg.prefix(n) for n in range(len(neg), self.pivot_distance, -1)]
        up = [pos.prefix(n) for n in range(self.pivot_distance, len(pos) + 1)]
        return down + up

    def to_json(self) -> str:
        return json.dumps(
            {
                "minus_germ": self.negative.prefix.text,
                "plus_germ": self.positive.prefix.text,
                "pivot": self.pivot.text,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str, rank: int = 2) -> "BiInfiniteGeodesic":
        d = json.loads(text)
        g = geodesic_between(BoundaryPoint.parse(d["minus_germ"], rank), BoundaryPoint.parse(d["plus_germ"], rank))
        if g.pivot.text != d["pivot"]:
            raise InputError(f"pivot {d['pivot']!r} inconsistent with germs (expected {g.pivot.text!r})")
        return g


def geodesic_between(yminus: BoundaryPoint, yplus: BoundaryPoint) -> BiInfiniteGeodesic:
    _same_rank(yminus.prefix, yplus.prefix)
    a, b = yminus.prefix.text, yplus.prefix.text
    p = common_prefix_length(a, b)
    if p == len(a) and p == len(b):
        raise EmptyGeodesicError(f"germs coincide at available depth ({a!r}); no geodesic joins an end to itself")
    if p == min(len(a), len(b)):
        raise ResolutionError(f"germs {a!r} and {b!r} do not branch within the available depth")
    return BiInfiniteGeodesic(yminus, yplus, Word(a[:p], yminus.rank))


def _ray_projection(g: str, germ: str) -> tuple[int, bool]:
    """Common prefix of g with an end known through ``germ``; flag says whether it is exact."""
    c = common_prefix_length(g, germ)
    if c < len(germ) or len(g) == c:
        return c, True
    return c, False


def dist_to_geodesic(g: Word, sigma: BiInfiniteGeodesic, half_line: bool = False) -> int:
    """Exact tree distance from vertex g to sigma (or to its positive half from the pivot)."""
    _same_rank(g, sigma.pivot)
    p = sigma.pivot_distance
    cp, exact_p = _ray_projection(g.text, sigma.positive.prefix.text)
    if not exact_p:
        raise ResolutionError(f"{g.text!r} extends the positive germ; its distance to the ray is not determined")
    if cp > p:
        return len(g) - cp
    if not half_line:
        cm, exact_m = _ray_projection(g.text, sigma.negative.prefix.text)
        if not exact_m:
            raise ResolutionError(f"{g.text!r} extends the negative germ; its distance to the ray is not determined")
        if cm > p:
            return len(g) - cm
    # branches off at or before the pivot; nearest point is the pivot
    c = min(cp, p)
    return len(g) - c + (p - c)
