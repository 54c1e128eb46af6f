"""Finite connected graphs, standard families and hop distances.

Vertices are the integers ``0..n-1``. Edges are stored as ``(u, v)`` with
``u < v``, sorted lexicographically; the position of an edge in
``Graph.edges`` is its edge index everywhere else in the package.
"""
from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DisconnectedGraph,
    DuplicateEdge,
    EmptySpec,
    InputError,
    SelfLoop,
    SizeOverflow,
    VertexOutOfRange,
)

MAX_VERTICES = 2**20


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False, compare=False)
    name: str = field(default="", compare=False)

    @property
    def m(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def edge_index(self, u: int, v: int) -> int:
        """Index of edge ``[u, v]``; raises KeyError if absent."""
        return self._index[(min(u, v), max(u, v))]

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._index

    @property
    def _index(self) -> dict:
        idx = self.__dict__.get("_edge_index")
        if idx is None:
            idx = {e: i for i, e in enumerate(self.edges)}
            object.__setattr__(self, "_edge_index", idx)
        return idx

    def edge_array(self) -> np.ndarray:
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)


def build_graph(n: int, edges, name: str = "") -> Graph:
    """Validate and normalize an edge list into a connected :class:`Graph`."""
    if n < 1:
        raise EmptySpec("a graph needs at least one vertex")
    if n > MAX_VERTICES:
        raise SizeOverflow(f"n={n} exceeds {MAX_VERTICES}")
    seen = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise VertexOutOfRange(f"edge ({u},{v}) has an endpoint outside 0..{n - 1}")
        if u == v:
            raise SelfLoop(f"self-loop at vertex {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DuplicateEdge(f"edge {key} listed twice")
        seen.add(key)
    norm = tuple(sorted(seen))
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in norm:
        adj[u].append(v)
        adj[v].append(u)
    adjacency = tuple(tuple(sorted(a)) for a in adj)

    reached = _bfs(adjacency, 0)
    missing = [v for v in range(n) if reached[v] < 0]
    if missing:
        raise DisconnectedGraph(f"vertices unreachable from 0: {missing[:10]}")
    return Graph(n, norm, adjacency, name)


def _bfs(adjacency, source: int) -> list[int]:
    dist = [-1] * len(adjacency)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop distances from a single source."""
    if not 0 <= source < g.n:
        raise VertexOutOfRange(f"vertex {source} not in 0..{g.n - 1}")
    return np.array(_bfs(g.adjacency, source), dtype=np.int64)


def distance_matrix(g: Graph) -> np.ndarray:
    """All-pairs hop distances as an ``n x n`` int64 matrix (one BFS per source)."""
    d = np.empty((g.n, g.n), dtype=np.int64)
    for s in range(g.n):
        d[s] = _bfs(g.adjacency, s)
    return d


# ---------------------------------------------------------------- families

FAMILIES = {
    "path": 1,
    "cycle": 1,
    "grid": 2,
    "tree": 2,
    "complete_bipartite": 2,
    "hypercube": 1,
}

_SHORTHAND = re.compile(r"^([a-z_]+?)(\d+(?:[x,]\d+)*)$")


def parse_family(spec: str) -> tuple[str, tuple[int, ...]]:
    """Parse ``"path:6"``, ``"grid:2,4"`` or the shorthand ``"path6"`` / ``"grid2x4"``."""
    spec = spec.strip()
    if not spec:
        raise EmptySpec("empty family descriptor")
    if ":" in spec:
        name, _, rest = spec.partition(":")
        parts = [p for p in re.split(r"[,x]", rest) if p]
    else:
        m = _SHORTHAND.match(spec)
        if not m:
            raise EmptySpec(f"cannot parse family descriptor {spec!r}")
        name, rest = m.group(1), m.group(2)
        parts = re.split(r"[,x]", rest)
    try:
        params = tuple(int(p) for p in parts)
    except ValueError:
        raise EmptySpec(f"non-integer parameter in {spec!r}") from None
    return name, params


def gen_graph(family, *params: int) -> Graph:
    """Build a named family.

    Families and vertex numbering:

    * ``path(n)``: ``0-1-...-(n-1)``.
    * ``cycle(n)``, ``n >= 3``: path plus the edge ``(0, n-1)``.
    * ``grid(d, side)``: the box ``{0..side-1}^d`` of Z^d; vertex index is
      ``sum(x_i * side**i)`` (coordinate 0 varies fastest).
    * ``tree(arity, depth)``: rooted tree where every vertex above the last
      level has ``arity`` children, numbered in BFS order from the root 0.
    * ``complete_bipartite(a, b)``: left side ``0..a-1``, right ``a..a+b-1``.
    * ``hypercube(d)``: vertices are the integers ``0..2**d-1``, adjacent when
      they differ in one bit.

    ``family`` may also be a descriptor string accepted by :func:`parse_family`.
    """
    if not params and isinstance(family, str) and (":" in family or re.search(r"\d", family)):
        family, params = parse_family(family)
    if not family:
        raise EmptySpec("empty family name")
    name = str(family)
    if name not in FAMILIES:
        raise EmptySpec(f"unknown family {name!r}; choose from {sorted(FAMILIES)}")
    if len(params) != FAMILIES[name]:
        raise EmptySpec(f"{name} takes {FAMILIES[name]} parameter(s), got {len(params)}")
    if any(p < 0 for p in params):
        raise EmptySpec(f"negative parameter in {name}{params}")
    label = f"{name}:{','.join(map(str, params))}"
    return _GENERATORS[name](*params, label=label)


def _check_size(n: int) -> None:
    if n < 1:
        raise EmptySpec("family produces an empty graph")
    if n > MAX_VERTICES:
        raise SizeOverflow(f"family would have {n} vertices (> {MAX_VERTICES})")


def _path(n, label):
    _check_size(n)
    return build_graph(n, [(i, i + 1) for i in range(n - 1)], label)


def _cycle(n, label):
    if n < 3:
        raise EmptySpec("cycle needs n >= 3")
    _check_size(n)
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)], label)


def _grid(d, side, label):
    if d < 1 or side < 1:
        raise EmptySpec("grid needs d >= 1 and side >= 1")
    if side > 1 and d * np.log2(side) > 20:
        raise SizeOverflow(f"grid {side}^{d} exceeds {MAX_VERTICES} vertices")
    n = side**d
    _check_size(n)
    edges = []
    for idx in range(n):
        stride = 1
        for _ in range(d):
            coord = (idx // stride) % side
            if coord + 1 < side:
                edges.append((idx, idx + stride))
            stride *= side
    return build_graph(n, edges, label)


def _tree(arity, depth, label):
    if arity < 1:
        raise EmptySpec("tree needs arity >= 1")
    n = 1
    level = 1
    for _ in range(depth):
        level *= arity
        n += level
        if n > MAX_VERTICES:
            raise SizeOverflow(f"tree({arity},{depth}) exceeds {MAX_VERTICES} vertices")
    edges = []
    nxt = 1
    frontier = [0]
    for _ in range(depth):
        new = []
        for parent in frontier:
            for _ in range(arity):
                edges.append((parent, nxt))
                new.append(nxt)
                nxt += 1
        frontier = new
    return build_graph(n, edges, label)


def _complete_bipartite(a, b, label):
    if a < 1 or b < 1:
        raise EmptySpec("complete_bipartite needs a, b >= 1")
    _check_size(a + b)
    return build_graph(a + b, [(i, a + j) for i in range(a) for j in range(b)], label)


def _hypercube(d, label):
    if d > 20:
        raise SizeOverflow(f"hypercube({d}) exceeds {MAX_VERTICES} vertices")
    n = 1 << d
    edges = [(v, v ^ (1 << i)) for v in range(n) for i in range(d) if v < v ^ (1 << i)]
    return build_graph(n, edges, label)


_GENERATORS = {
    "path": _path,
    "cycle": _cycle,
    "grid": _grid,
    "tree": _tree,
    "complete_bipartite": _complete_bipartite,
    "hypercube": _hypercube,
}


def connected_graphs(n: int, up_to_isomorphism: bool = True):
    """Yield every connected graph on ``n`` labelled vertices.

    With ``up_to_isomorphism`` only the lexicographically smallest relabelling
    of each class is kept (brute force over permutations; meant for n <= 6).
    """
    pairs = list(itertools.combinations(range(n), 2))
    perms = list(itertools.permutations(range(n))) if up_to_isomorphism else None
    seen = set()
    for mask in range(1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        if perms is not None:
            canon = min(
                tuple(sorted(tuple(sorted((p[u], p[v]))) for u, v in edges)) for p in perms
            )
            if canon in seen:
                continue
            seen.add(canon)
            edges = list(canon)
        try:
            yield build_graph(n, edges)
        except DisconnectedGraph:
            continue


# ---------------------------------------------------------------- edge-list files


def format_edge_list(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"]
    lines += [f"{u} {v}" for u, v in g.edges]
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str, name: str = "") -> Graph:
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append(line.split())
    if not rows:
        raise InputError("empty edge-list file")
    try:
        header = [int(x) for x in rows[0]]
        if len(header) != 2:
            raise ValueError
        n, m = header
        edges = [(int(a), int(b)) for a, b in rows[1:]]
    except ValueError:
        raise InputError("edge list must be 'n m' followed by 'u v' lines") from None
    if len(edges) != m:
        raise InputError(f"header announces {m} edges, found {len(edges)}")
    return build_graph(n, edges, name)


def read_edge_list(path) -> Graph:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    return parse_edge_list(text, name=path.name)


def format_distance_csv(d: np.ndarray) -> str:
    """Same layout as a kernel CSV (size line, then rows), with integer entries."""
    return f"{len(d)}\n" + "".join(",".join(str(int(x)) for x in row) + "\n" for row in d)
