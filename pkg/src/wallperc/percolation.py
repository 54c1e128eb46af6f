"""Wall percolation: exact laws, Monte Carlo two-point functions and checks.

Every cut ``c`` of weight ``w_c`` carries an exponential clock
``T_c ~ Exp(w_c)``. At time ``t`` an edge is open iff no cut crossing it
has fired, i.e. every crossing cut has ``T_c >= t``. Configurations
therefore shrink as ``t`` grows, and an edge is open with probability
``exp(-t * crossing weight)``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._rng import replica_uniforms, worker_count
from .cuts import CutFamily
from .errors import (
    BadPermutation,
    BadProbability,
    EmptyFamily,
    InputError,
    NegativeTime,
    NonIncreasingEvent,
    SizeMismatch,
    TooManyEdges,
    TooManyWalls,
    ZeroSamples,
)

MAX_EXACT_CUTS = 20
MAX_EXACT_EDGES = 20
MC_CHUNK = 4096  # replicas per work unit; fixed so results ignore the thread count
_PATTERN_CHUNK = 1 << 16


def _check_time(t) -> float:
    t = float(t)
    if not t >= 0.0:
        raise NegativeTime(f"time must be >= 0, got {t}")
    return t


# ------------------------------------------------------------ clocks and configurations


@dataclass(frozen=True)
class ActivationTimes:
    times: np.ndarray  # one positive first-arrival time per cut
    seed: int = 0
    replica: int = 0

    def __len__(self) -> int:
        return len(self.times)


def sample_activation_times(w: CutFamily, seed: int, replica: int = 0) -> ActivationTimes:
    """Exponential clocks for every cut of ``w`` by inverse transform.

    The uniform for cut ``c`` of replica ``r`` is a fixed position in the
    Philox stream keyed by ``seed``, so it depends only on ``(seed, r, c)``.
    """
    if len(w) == 0:
        raise EmptyFamily("cannot sample clocks for an empty cut family")
    u = replica_uniforms(seed, int(replica), 1, len(w))[0]
    times = -np.log(u) / w.weights
    times.setflags(write=False)
    return ActivationTimes(times, int(seed), int(replica))


@dataclass(frozen=True)
class Configuration:
    """Open edge set as a bitmask over edge indices."""

    mask: int
    m: int
    graph: str = field(default="", compare=False)

    @classmethod
    def from_bools(cls, open_edges, graph: str = "") -> "Configuration":
        arr = np.asarray(open_edges, dtype=bool)
        mask = 0
        for i in np.flatnonzero(arr):
            mask |= 1 << int(i)
        return cls(mask, arr.size, graph)

    def is_open(self, e: int) -> bool:
        return bool(self.mask >> e & 1)

    def open_edges(self) -> list[int]:
        return [e for e in range(self.m) if self.mask >> e & 1]

    def to_bools(self) -> np.ndarray:
        return np.array([self.mask >> e & 1 for e in range(self.m)], dtype=bool)

    def __le__(self, other: "Configuration") -> bool:
        return self.mask & ~other.mask == 0

    def __len__(self) -> int:
        return bin(self.mask).count("1")


def _open_from_fired(fired: np.ndarray, cross: np.ndarray) -> np.ndarray:
    """Open-edge matrix from fired-cut flags ``(R, k)`` and crossing ``(k, m)``."""
    if cross.shape[0] == 0:
        return np.ones((fired.shape[0], cross.shape[1]), dtype=bool)
    return (fired.astype(np.float64) @ cross.astype(np.float64)) == 0.0


def configuration_at(times: ActivationTimes, t: float, w: CutFamily, g) -> Configuration:
    t = _check_time(t)
    if len(times) != len(w):
        raise SizeMismatch(f"{len(times)} clocks for {len(w)} cuts")
    cross = w.crossing_matrix(g)
    fired = (np.asarray(times.times) < t)[None, :]
    return Configuration.from_bools(_open_from_fired(fired, cross)[0], g.name)


def configurations_at(times: ActivationTimes, ts, w: CutFamily, g) -> np.ndarray:
    """Open-edge matrix ``(len(ts), m)`` for one set of clocks at several times."""
    ts = np.array([_check_time(t) for t in ts])
    if len(times) != len(w):
        raise SizeMismatch(f"{len(times)} clocks for {len(w)} cuts")
    fired = np.asarray(times.times)[None, :] < ts[:, None]
    return _open_from_fired(fired, w.crossing_matrix(g))


# ------------------------------------------------------------ exact laws


@dataclass(frozen=True)
class PercolationDistribution:
    graph: object
    configs: np.ndarray  # bool (atoms, m), distinct rows
    probs: np.ndarray  # (atoms,)

    def __post_init__(self):
        if self.configs.shape != (len(self.probs), self.graph.m):
            raise SizeMismatch("one probability per configuration over the graph's edges")
        self.configs.setflags(write=False)
        self.probs.setflags(write=False)

    def __len__(self) -> int:
        return len(self.probs)

    def atoms(self):
        for row, p in zip(self.configs, self.probs):
            yield Configuration.from_bools(row, self.graph.name), float(p)

    def edge_marginals(self) -> np.ndarray:
        return self.probs @ self.configs.astype(float)

    def to_list(self) -> list[dict]:
        return [
            {"edges": [int(e) for e in np.flatnonzero(row)], "p": float(p)}
            for row, p in zip(self.configs, self.probs)
        ]

    @classmethod
    def from_list(cls, data, g) -> "PercolationDistribution":
        rows = np.zeros((len(data), g.m), dtype=bool)
        probs = np.zeros(len(data))
        try:
            for i, atom in enumerate(data):
                for e in atom["edges"]:
                    e = int(e)
                    if not 0 <= e < g.m:
                        raise InputError(f"edge index {e} out of range 0..{g.m - 1}")
                    rows[i, e] = True
                probs[i] = float(atom["p"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed distribution: {exc}") from None
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise InputError("atom probabilities must be >= 0 and sum to 1")
        return _merge(g, rows, probs)


def _merge(g, rows: np.ndarray, probs: np.ndarray) -> PercolationDistribution:
    keep = probs > 0
    rows, probs = rows[keep], probs[keep]
    if g.m == 0:
        return PercolationDistribution(g, np.zeros((1, 0), dtype=bool), np.array([float(probs.sum())]))
    packed = np.packbits(rows, axis=1)
    uniq, inverse = np.unique(packed, axis=0, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=probs, minlength=len(uniq))
    configs = np.unpackbits(uniq, axis=1, count=g.m).astype(bool)
    return PercolationDistribution(g, configs, merged)


def _pattern_probs(on: np.ndarray, off: np.ndarray) -> np.ndarray:
    """Probabilities of all independent bit patterns; bit ``c`` of the index is item ``c``."""
    probs = np.ones(1)
    for p1, p0 in zip(on, off):
        probs = np.concatenate([probs * p0, probs * p1])
    return probs


def distribution_from_walls(w: CutFamily, g, t: float) -> PercolationDistribution:
    """Exact law of the open configuration at time ``t`` by enumerating firing patterns."""
    t = _check_time(t)
    k = len(w)
    if k > MAX_EXACT_CUTS:
        raise TooManyWalls(f"exact enumeration limited to {MAX_EXACT_CUTS} cuts, got {k}")
    cross = w.crossing_matrix(g)
    fire = -np.expm1(-t * w.weights)
    dormant = np.exp(-t * w.weights)
    probs = _pattern_probs(fire, dormant)
    patterns = np.flatnonzero(probs > 0)
    edge_masks = np.zeros(g.m, dtype=np.int64)
    for c in range(k):
        edge_masks |= cross[c].astype(np.int64) << c
    rows = np.empty((patterns.size, g.m), dtype=bool)
    for s in range(0, patterns.size, _PATTERN_CHUNK):
        chunk = patterns[s:s + _PATTERN_CHUNK]
        rows[s:s + chunk.size] = (chunk[:, None] & edge_masks[None, :]) == 0
    return _merge(g, rows, probs[patterns])


def exhaustive_bernoulli(g, p: float) -> PercolationDistribution:
    """Independent bond percolation: each edge open with probability ``p``."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise BadProbability(f"p must lie in [0, 1], got {p}")
    if g.m > MAX_EXACT_EDGES:
        raise TooManyEdges(f"exact enumeration limited to {MAX_EXACT_EDGES} edges, got {g.m}")
    probs = _pattern_probs(np.full(g.m, p), np.full(g.m, 1.0 - p))
    idx = np.arange(1 << g.m, dtype=np.int64)
    rows = ((idx[:, None] >> np.arange(g.m)) & 1).astype(bool)
    return _merge(g, rows, probs)


# ------------------------------------------------------------ clusters


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def labels(self) -> list[int]:
        return [self.find(x) for x in range(len(self.parent))]


def cluster_labels(g, open_edges) -> np.ndarray:
    """Cluster representative of every vertex under the given open edges."""
    uf = UnionFind(g.n)
    for e in np.flatnonzero(open_edges):
        u, v = g.edges[e]
        uf.union(u, v)
    return np.array(uf.labels(), dtype=np.int64)


def _label_matrix(g, configs: np.ndarray) -> np.ndarray:
    return np.array([cluster_labels(g, row) for row in configs], dtype=np.int64).reshape(-1, g.n)


def _connection_sums(labels: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``out[u, v] = sum_a weights[a] * [labels[a, u] == labels[a, v]]``."""
    n = labels.shape[1]
    out = np.zeros((n, n), dtype=weights.dtype)
    for u in range(n):
        out[u] = weights @ (labels == labels[:, u:u + 1])
    return out


def two_point_exact(d: PercolationDistribution) -> np.ndarray:
    tau = _connection_sums(_label_matrix(d.graph, d.configs), d.probs)
    np.fill_diagonal(tau, 1.0)
    return tau


# ------------------------------------------------------------ Monte Carlo


@dataclass
class TwoPointEstimate:
    t: float
    hits: np.ndarray  # int64 (n, n); the diagonal equals trials
    trials: int
    seed: int

    @property
    def n(self) -> int:
        return self.hits.shape[0]

    @property
    def tau(self) -> np.ndarray:
        return self.hits / self.trials

    @property
    def sigma(self) -> np.ndarray:
        """Binomial standard error plus a half-count continuity floor; zero on the diagonal."""
        p = self.tau
        s = np.sqrt(p * (1.0 - p) / self.trials) + 0.5 / self.trials
        np.fill_diagonal(s, 0.0)
        return s

    @property
    def ci(self) -> np.ndarray:
        """95% normal-approximation half-widths."""
        return 1.96 * self.sigma

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "n": self.n,
            "hits": self.hits.tolist(),
            "trials": self.trials,
            "tau": self.tau.tolist(),
            "ci": self.ci.tolist(),
            "seed": self.seed,
        }


def _mc_chunk(w: CutFamily, cross, g, ts, seed: int, start: int, count: int) -> np.ndarray:
    u = replica_uniforms(seed, start, count, len(w))
    times = -np.log(u) / w.weights if len(w) else u[:, :0]
    hits = np.zeros((len(ts), g.n, g.n), dtype=np.int64)
    for i, t in enumerate(ts):
        rows = _open_from_fired(times < t, cross)
        if g.m:
            packed = np.packbits(rows, axis=1)
            uniq, inverse, counts = np.unique(packed, axis=0, return_inverse=True, return_counts=True)
            configs = np.unpackbits(uniq, axis=1, count=g.m).astype(bool)
        else:
            configs, counts = rows[:1], np.array([count])
        hits[i] = _connection_sums(_label_matrix(g, configs), counts.astype(np.int64))
    return hits


def two_point_mc_sweep(w: CutFamily, g, ts, replicas: int, seed: int) -> list[TwoPointEstimate]:
    """Estimates at several times from one shared set of clocks per replica.

    Replica ``r`` always uses the same uniforms, so the configurations are
    coupled across ``ts``. Replicas are split into fixed chunks that run on
    up to ``WALLPERC_THREADS`` threads; integer hit counts are summed, so
    the result is independent of scheduling.
    """
    ts = [_check_time(t) for t in ts]
    replicas = int(replicas)
    if replicas < 1:
        raise ZeroSamples("replicas must be >= 1")
    cross = w.crossing_matrix(g)
    starts = list(range(0, replicas, MC_CHUNK))

    def work(start):
        return _mc_chunk(w, cross, g, ts, seed, start, min(MC_CHUNK, replicas - start))

    workers = min(worker_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    total = np.sum(parts, axis=0)
    return [TwoPointEstimate(t, total[i], replicas, int(seed)) for i, t in enumerate(ts)]


def two_point_mc(w: CutFamily, g, t: float, replicas: int, seed: int) -> TwoPointEstimate:
    return two_point_mc_sweep(w, g, [t], replicas, seed)[0]


# ------------------------------------------------------------ checks


@dataclass
class SandwichReport:
    delta: float
    lower_slack: float  # min of tau - exp(-t delta d)
    upper_slack: float  # min of exp(-t k) - tau
    passed: bool
    worst_lower: tuple[int, int] | None = None
    worst_upper: tuple[int, int] | None = None
    tolerance: str = "1e-12"
    lower_passed: bool = True
    upper_passed: bool = True


def verify_sandwich(tau, k, dist, t: float, mode: str = "plain") -> SandwichReport:
    """Check ``exp(-t delta d) <= tau <= exp(-t k')`` on every pair.

    ``k'`` is ``k`` (``mode="plain"``) or ``sqrt(k)`` (``mode="sqrt"``) and
    ``delta`` is the largest ``k'`` over adjacent pairs. Exact ``tau`` passes
    when every slack is at least ``-1e-12``; a :class:`TwoPointEstimate`
    passes when every slack is at least ``-3 sigma`` for its own entry.
    """
    t = _check_time(t)
    if mode not in ("plain", "sqrt"):
        raise ValueError(f"mode must be 'plain' or 'sqrt', got {mode!r}")
    if isinstance(tau, TwoPointEstimate):
        values, allow, tol_name = tau.tau, 3.0 * tau.sigma, "3sigma"
    else:
        values = np.asarray(tau, dtype=float)
        allow, tol_name = np.full(values.shape, 1e-12), "1e-12"
    k = np.asarray(k, dtype=float)
    d = np.asarray(dist, dtype=float)
    if not (values.shape == k.shape == d.shape):
        raise SizeMismatch(f"shapes {values.shape}, {k.shape}, {d.shape} differ")
    kk = np.sqrt(np.maximum(k, 0.0)) if mode == "sqrt" else k
    adjacent = d == 1
    delta = float(kk[adjacent].max()) if adjacent.any() else 0.0
    lower = values - np.exp(-t * delta * d)
    upper = np.exp(-t * kk) - values
    off = ~np.eye(len(d), dtype=bool)
    if not off.any():
        return SandwichReport(delta, 0.0, 0.0, True, tolerance=tol_name)
    lower_ok = bool(np.all((lower + allow)[off] >= 0))
    upper_ok = bool(np.all((upper + allow)[off] >= 0))
    lower_m = np.where(off, lower, np.inf)
    upper_m = np.where(off, upper, np.inf)
    wl = tuple(int(i) for i in np.unravel_index(np.argmin(lower_m), lower.shape))
    wu = tuple(int(i) for i in np.unravel_index(np.argmin(upper_m), upper.shape))
    return SandwichReport(delta, float(lower_m.min()), float(upper_m.min()), lower_ok and upper_ok,
                          wl, wu, tol_name, lower_ok, upper_ok)


def _event_indices(g, event) -> list[int]:
    try:
        items = list(event)
    except TypeError:
        raise NonIncreasingEvent(f"event {event!r} is not a collection of edges") from None
    out = []
    for e in items:
        if isinstance(e, (tuple, list)) and len(e) == 2:
            u, v = int(e[0]), int(e[1])
            if not g.has_edge(u, v):
                raise NonIncreasingEvent(f"({u},{v}) is not an edge")
            out.append(g.edge_index(u, v))
        elif isinstance(e, (int, np.integer)) and 0 <= int(e) < g.m:
            out.append(int(e))
        else:
            raise NonIncreasingEvent(f"{e!r} does not name an edge")
    return sorted(set(out))


def event_covariances(d: PercolationDistribution, events=None) -> np.ndarray:
    """Covariance matrix of the events "all edges of S open" (default: single edges)."""
    g = d.graph
    if g.m > MAX_EXACT_EDGES:
        raise TooManyEdges(f"FKG check limited to {MAX_EXACT_EDGES} edges, got {g.m}")
    if events is None:
        sets = [[e] for e in range(g.m)]
    else:
        sets = [_event_indices(g, ev) for ev in events]
    ind = np.column_stack([d.configs[:, s].all(axis=1) for s in sets]).astype(float) \
        if sets else np.zeros((len(d), 0))
    mean = d.probs @ ind
    joint = ind.T @ (d.probs[:, None] * ind)
    return joint - np.outer(mean, mean)


def fkg_check_exact(d: PercolationDistribution, events=None) -> float:
    """Smallest covariance between any two of the given increasing events."""
    cov = event_covariances(d, events)
    return float(cov.min()) if cov.size else 0.0


# ------------------------------------------------------------ cluster-to-cut decomposition


def _check_order(n: int, order) -> list[int]:
    if order is None:
        return list(range(n))
    try:
        order = [int(v) for v in order]
    except (TypeError, ValueError):
        raise BadPermutation(f"order {order!r} is not a vertex list") from None
    if sorted(order) != list(range(n)):
        raise BadPermutation(f"order must be a permutation of 0..{n - 1}, got {order}")
    return order


def cut_decomposition_layers(d: PercolationDistribution, order=None) -> list[CutFamily]:
    """One cut family per position in ``order``.

    In each configuration, walk the vertices in ``order``; the ``i``-th
    vertex contributes its cluster unless an earlier vertex already did.
    Layer ``i`` collects these clusters with weight half the configuration's
    probability.
    """
    g = d.graph
    order = _check_order(g.n, order)
    labels = _label_matrix(g, d.configs)
    rows = [[] for _ in order]
    weights = [[] for _ in order]
    for lab, p in zip(labels, d.probs):
        used = set()
        for i, v in enumerate(order):
            if lab[v] in used:
                continue
            used.add(lab[v])
            members = lab == lab[v]
            if members.all():
                continue
            rows[i].append(members)
            weights[i].append(0.5 * p)
    layers = []
    for i in range(len(order)):
        arr = np.array(rows[i], dtype=bool).reshape(-1, g.n)
        layers.append(CutFamily.from_arrays(g.n, arr, np.array(weights[i]), {"layer": i, "vertex": order[i]}))
    return layers


def cut_decomposition(d: PercolationDistribution, order=None) -> CutFamily:
    """Cut family whose kernel is ``1 - tau`` of ``d``.

    Every cluster of every configuration appears exactly once across the
    layers, so the merged family (unlike the layers) does not depend on
    ``order``.
    """
    layers = cut_decomposition_layers(d, order)
    n = d.graph.n
    rows = np.vstack([l.members for l in layers]) if layers else np.zeros((0, n), dtype=bool)
    weights = np.concatenate([l.weights for l in layers]) if layers else np.zeros(0)
    meta = {"order": _check_order(n, order)}
    return CutFamily.from_arrays(n, rows, weights, meta)


def marginal_report(d: PercolationDistribution, w: CutFamily, t: float) -> dict:
    """Largest gap between exact edge marginals and ``exp(-t * crossing weight)``."""
    cross = w.crossing_matrix(d.graph)
    expected = np.exp(-float(t) * (w.weights @ cross)) if len(w) else np.ones(d.graph.m)
    gap = np.abs(d.edge_marginals() - expected)
    return {"max_error": float(gap.max()) if gap.size else 0.0, "passed": bool(np.all(gap <= 1e-12))}


__all__ = [
    "ActivationTimes", "Configuration", "PercolationDistribution", "TwoPointEstimate",
    "SandwichReport", "UnionFind", "sample_activation_times", "configuration_at",
    "configurations_at", "distribution_from_walls", "exhaustive_bernoulli", "two_point_exact",
    "two_point_mc", "two_point_mc_sweep", "verify_sandwich", "fkg_check_exact",
    "event_covariances", "cut_decomposition", "cut_decomposition_layers", "cluster_labels",
    "marginal_report",
]
