"""Finitely generated subgroups of F_k through their Stallings graphs.

A Stallings graph is a finite, folded, labelled graph with a base vertex; its
reduced base loops spell exactly the subgroup.  Vertices are numbered by
breadth-first search from the base (letters tried in the order a, A, b, B,
...), so two graphs of the same subgroup serialise identically.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .errors import InputError, ResourceError
from .freegroup import Word, letter_char, reduce, to_array

DEFAULT_BUDGET = 10**6


def _letter_order(rank: int) -> list[int]:
    return [s * i for i in range(1, rank + 1) for s in (1, -1)]


@dataclass(frozen=True, eq=False)
class StallingsGraph:
    """``edges[v]`` maps a signed letter to the target vertex; base is vertex 0."""

    rank: int
    edges: tuple[dict, ...]

    @property
    def n_vertices(self) -> int:
        return len(self.edges)

    @property
    def base(self) -> int:
        return 0

    def degree(self, v: int) -> int:
        return len(self.edges[v])

    @cached_property
    def core_flag(self) -> bool:
        return all(self.degree(v) >= 2 for v in range(1, self.n_vertices))

    @cached_property
    def n_edges(self) -> int:
        return sum(1 for d in self.edges for x in d if x > 0)

    @property
    def free_rank(self) -> int:
        """Rank of the subgroup as a free group (Euler characteristic)."""
        return self.n_edges - self.n_vertices + 1

    def edge_list(self) -> list[tuple[int, int, int]]:
        return sorted((v, x, w) for v, d in enumerate(self.edges) for x, w in d.items() if x > 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, StallingsGraph):
            return NotImplemented
        return self.rank == other.rank and self.edges == other.edges

    def __repr__(self) -> str:
        return f"StallingsGraph(rank={self.rank}, vertices={self.n_vertices}, edges={self.n_edges})"

    def to_json(self) -> str:
        return json.dumps(
            {
                "vertices": self.n_vertices,
                "base": 0,
                "rank": self.rank,
                "edges": [[v, letter_char(x), w] for v, x, w in self.edge_list()],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "StallingsGraph":
        d = json.loads(text)
        try:
            rank = int(d.get("rank", 2))
            n = int(d["vertices"])
            base = int(d.get("base", 0))
            raw = [(int(v), to_array(str(c))[0], int(w)) for v, c, w in d["edges"]]
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InputError(f"malformed graph JSON: {exc}") from None
        folder = _Folder(rank)
        for _ in range(n):
            folder.add_vertex()
        for v, x, w in raw:
            if not (0 <= v < n and 0 <= w < n) or x == 0 or abs(x) > rank:
                raise InputError(f"bad edge {[v, letter_char(x) if x else '?', w]}")
            folder.add_edge(v, int(x), w)
        return _finish(folder.finalise(), base, rank)

    def generators(self) -> list[Word]:
        return basis(self)


class _Folder:
    """Incremental Stallings folding with union-find."""

    def __init__(self, rank: int):
        self.rank = rank
        self.parent: list[int] = []
        self.out: list[dict] = []

    def add_vertex(self) -> int:
        self.parent.append(len(self.parent))
        self.out.append({})
        return len(self.parent) - 1

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def add_edge(self, u: int, x: int, v: int) -> None:
        pending = [(u, x, v)]
        while pending:
            u, x, v = pending.pop()
            for a, y, b in ((u, x, v), (v, -x, u)):
                a, b = self.find(a), self.find(b)
                t = self.out[a].get(y)
                if t is None:
                    self.out[a][y] = b
                    continue
                t = self.find(t)
                if t != b:
                    self._merge(t, b, pending)

    def _merge(self, a: int, b: int, pending: list) -> None:
        a, b = self.find(a), self.find(b)
        if a == b:
            return
        keep, gone = min(a, b), max(a, b)
        self.parent[gone] = keep
        moved, self.out[gone] = self.out[gone], {}
        pending.extend((keep, y, t) for y, t in moved.items())

    def add_loop(self, base: int, letters: Sequence[int]) -> None:
        if not letters:
            return
        u = base
        for i, x in enumerate(letters):
            v = base if i == len(letters) - 1 else self.add_vertex()
            self.add_edge(u, int(x), v)
            u = v

    def finalise(self) -> dict[int, dict]:
        return {
            v: {y: self.find(t) for y, t in self.out[v].items()}
            for v in range(len(self.parent))
            if self.find(v) == v
        }


def _trim(out: dict[int, dict], base: int) -> dict[int, dict]:
    """Remove hanging trees not containing the base."""
    out = {v: dict(d) for v, d in out.items()}
    queue = deque(v for v, d in out.items() if v != base and len(d) <= 1)
    while queue:
        v = queue.popleft()
        if v not in out or len(out[v]) > 1:
            continue
        for y, t in out.pop(v).items():
            if t in out:
                out[t].pop(-y, None)
                if t != base and len(out[t]) <= 1:
                    queue.append(t)
    return out


def _canonical(out: dict[int, dict], base: int, rank: int) -> StallingsGraph:
    order = _letter_order(rank)
    ids = {base: 0}
    queue = deque([base])
    while queue:
        v = queue.popleft()
        for x in order:
            t = out[v].get(x)
            if t is not None and t not in ids:
                ids[t] = len(ids)
                queue.append(t)
    edges: list[dict] = [{} for _ in ids]
    for v, i in ids.items():
        edges[i] = {x: ids[out[v][x]] for x in order if x in out[v]}
    return StallingsGraph(rank, tuple(edges))


def _finish(out: dict[int, dict], base: int, rank: int) -> StallingsGraph:
    return _canonical(_trim(out, base), base, rank)


def _letters(g, rank: int) -> list[int]:
    if isinstance(g, Word):
        if g.rank != rank:
            raise InputError(f"alphabet mismatch: rank {g.rank} vs rank {rank}")
        return list(g.letters)
    if isinstance(g, str):
        return list(reduce(g, rank).letters)
    return list(g)


def fold_letters(generators: Iterable[Sequence[int]], rank: int) -> StallingsGraph:
    """Fold signed-letter generators; works for any rank (used for rewritten subgroups)."""
    folder = _Folder(rank)
    base = folder.add_vertex()
    for g in generators:
        folder.add_loop(base, list(g))
    return _finish(folder.finalise(), base, rank)


def fold(generators: Iterable[Word | str], rank: int | None = None) -> StallingsGraph:
    """Stallings graph of the subgroup generated by ``generators``."""
    gens = list(generators)
    if rank is None:
        ranks = {g.rank for g in gens if isinstance(g, Word)}
        if len(ranks) > 1:
            raise InputError(f"generators from different alphabets: ranks {sorted(ranks)}")
        rank = ranks.pop() if ranks else 2
    return fold_letters((_letters(g, rank) for g in gens), rank)


def parse_generators(text: str, rank: int = 2) -> list[Word]:
    """Comma/whitespace separated generator list; ``e`` or ``1`` denote the identity."""
    parts = [p for p in text.replace(",", " ").split() if p]
    return [reduce("" if p in ("e", "1") else p, rank) for p in parts]


def trace(graph: StallingsGraph, w, start: int = 0) -> int | None:
    """End vertex of the path reading w from ``start``, or None if it falls off."""
    v = start
    for x in _letters(w, graph.rank):
        v = graph.edges[v].get(x)
        if v is None:
            return None
    return v


def contains(graph: StallingsGraph, w) -> bool:
    return trace(graph, w) == 0


def is_complete(graph: StallingsGraph) -> bool:
    return all(len(d) == 2 * graph.rank for d in graph.edges)


def index(graph: StallingsGraph) -> float:
    """[F_k : H]; ``math.inf`` unless every vertex has all 2k directions."""
    return graph.n_vertices if is_complete(graph) else math.inf


def intersect(g1: StallingsGraph, g2: StallingsGraph) -> StallingsGraph:
    """Fibre product at (base, base); its loop language is H1 ∩ H2."""
    if g1.rank != g2.rank:
        raise InputError(f"alphabet mismatch: rank {g1.rank} vs rank {g2.rank}")
    order = _letter_order(g1.rank)
    ids = {(0, 0): 0}
    out: dict[int, dict] = {0: {}}
    queue = deque([(0, 0)])
    while queue:
        p = queue.popleft()
        u1, u2 = p
        for x in order:
            t1 = g1.edges[u1].get(x)
            t2 = g2.edges[u2].get(x)
            if t1 is None or t2 is None:
                continue
            q = (t1, t2)
            if q not in ids:
                ids[q] = len(ids)
                out[ids[q]] = {}
                queue.append(q)
            out[ids[p]][x] = ids[q]
    return _finish(out, 0, g1.rank)


def _spanning_tree(graph: StallingsGraph) -> tuple[list[list[int]], set[tuple[int, int]]]:
    """Tree path labels from the base, and the set of (vertex, letter) tree edges (both orientations)."""
    paths: list[list[int] | None] = [None] * graph.n_vertices
    paths[0] = []
    tree: set[tuple[int, int]] = set()
    queue = deque([0])
    order = _letter_order(graph.rank)
    while queue:
        v = queue.popleft()
        for x in order:
            t = graph.edges[v].get(x)
            if t is not None and paths[t] is None:
                paths[t] = paths[v] + [x]
                tree.add((v, x))
                tree.add((t, -x))
                queue.append(t)
    return paths, tree


@dataclass(frozen=True)
class _Basis:
    words: list[list[int]]
    edge_index: dict[tuple[int, int], int]  # (vertex, signed letter) -> signed basis letter


def _basis(graph: StallingsGraph) -> _Basis:
    paths, tree = _spanning_tree(graph)
    words: list[list[int]] = []
    edge_index: dict[tuple[int, int], int] = {}
    for v, x, t in graph.edge_list():
        if (v, x) in tree:
            continue
        j = len(words) + 1
        back = [-y for y in reversed(paths[t])]
        words.append(paths[v] + [x] + back)
        edge_index[(v, x)] = j
        edge_index[(t, -x)] = -j
    return _Basis(words, edge_index)


def basis(graph: StallingsGraph) -> list[Word]:
    """A free basis of the subgroup, read off a breadth-first spanning tree."""
    return [reduce(w, graph.rank) for w in _basis(graph).words]


def rewrite(graph: StallingsGraph, w, b: _Basis | None = None) -> list[int]:
    """Express an element of the subgroup in the basis from :func:`basis` (signed 1-based indices)."""
    b = b or _basis(graph)
    v = 0
    out: list[int] = []
    for x in _letters(w, graph.rank):
        j = b.edge_index.get((v, x))
        t = graph.edges[v].get(x)
        if t is None:
            raise InputError("word is not in the subgroup")
        if j is not None:
            if out and out[-1] == -j:
                out.pop()
            else:
                out.append(j)
        v = t
    if v != 0:
        raise InputError("word is not in the subgroup")
    return out


def relative_index(sub: StallingsGraph, sup: StallingsGraph) -> float:
    """[H : K] for K = ⟨sub⟩ ≤ H = ⟨sup⟩, by folding K inside H's own free basis."""
    b = _basis(sup)
    r = len(b.words)
    if r == 0:
        if sub.n_edges:
            raise InputError("subgroup is not contained in the trivial group")
        return 1
    rewritten = [rewrite(sup, g, b) for g in _basis(sub).words]
    return index(fold_letters(rewritten, r))


@dataclass(frozen=True)
class Commensurability:
    verdict: bool
    index_in_1: float
    index_in_2: float

    def to_dict(self) -> dict:
        def enc(v):
            return v if math.isfinite(v) else "inf"

        return {"verdict": self.verdict, "index_in_1": enc(self.index_in_1), "index_in_2": enc(self.index_in_2)}


def commensurable(g1: StallingsGraph, g2: StallingsGraph) -> Commensurability:
    """Whether H1 ∩ H2 has finite index in both, with the two indices."""
    k = intersect(g1, g2)
    i1 = relative_index(k, g1)
    i2 = relative_index(k, g2)
    return Commensurability(math.isfinite(i1) and math.isfinite(i2), i1, i2)


def is_subgroup(sub: StallingsGraph, sup: StallingsGraph) -> bool:
    return all(contains(sup, w) for w in _basis(sub).words)


def looks_non_elementary(graph: StallingsGraph) -> bool:
    """Heuristic only: a free subgroup of rank >= 2 contains independent loxodromics."""
    return graph.free_rank >= 2


# --- Schreier graph ---------------------------------------------------------


class SchreierBall:
    """The Schreier graph of H\\F_k, materialised lazily around the base coset.

    Outside the Stallings graph the Schreier graph is a forest of trees hanging
    off missing directions, so a freshly created vertex sits one step further
    from the base than the vertex it was created from.  Mutable; one owner.
    """

    def __init__(self, graph: StallingsGraph, budget: int = DEFAULT_BUDGET):
        self.graph = graph
        self.rank = graph.rank
        self.budget = budget
        self.out: list[dict] = [dict(d) for d in graph.edges]
        self.dist: list[int] = _bfs_distances(graph)
        # hanging vertices remember where their tree is attached: (core vertex, first letter)
        self.anchor: list[tuple[int, int] | None] = [None] * graph.n_vertices

    @property
    def n_vertices(self) -> int:
        return len(self.out)

    @property
    def radius(self) -> int:
        return max(self.dist)

    @property
    def coset_index(self) -> dict[int, int]:
        return dict(enumerate(self.dist))

    def act(self, v: int, x: int) -> int:
        t = self.out[v].get(x)
        if t is None:
            if len(self.out) >= self.budget:
                raise ResourceError(f"Schreier graph exceeded its vertex budget of {self.budget}")
            t = len(self.out)
            self.out.append({-x: v})
            self.dist.append(self.dist[v] + 1)
            self.anchor.append(self.anchor[v] or (v, x))
            self.out[v][x] = t
        return t

    def trace(self, w, start: int = 0) -> int:
        v = start
        for x in _letters(w, self.rank):
            v = self.act(v, x)
        return v

    def coset_distance(self, g) -> int:
        """Length of the shortest representative of the coset H g."""
        return self.dist[self.trace(g)]

    def extend(self, radius: int) -> None:
        """Materialise every coset within ``radius`` of the base."""
        order = _letter_order(self.rank)
        frontier = [v for v in range(len(self.out)) if self.dist[v] < radius]
        while frontier:
            nxt = []
            for v in frontier:
                for x in order:
                    before = len(self.out)
                    t = self.act(v, x)
                    if len(self.out) > before and self.dist[t] < radius:
                        nxt.append(t)
            frontier = nxt


def _bfs_distances(graph: StallingsGraph) -> list[int]:
    dist = [-1] * graph.n_vertices
    dist[0] = 0
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for t in graph.edges[v].values():
            if dist[t] < 0:
                dist[t] = dist[v] + 1
                queue.append(t)
    return dist


def coset_distance(ball: SchreierBall, g) -> int:
    return ball.coset_distance(g)
