"""Finite weighted cut families and the kernels they induce.

A cut is stored as the side *not* containing vertex 0, so ``S`` and its
complement are the same cut. Families are kept canonical: nontrivial
cuts only, duplicates merged by summing weights, rows sorted.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, NotAnEdge, SizeMismatch


@dataclass(frozen=True)
class CutFamily:
    n: int
    members: np.ndarray  # bool, (num_cuts, n); row c is the indicator of cut c
    weights: np.ndarray  # float, (num_cuts,)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.members.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def cuts(self) -> list[tuple[tuple[int, ...], float]]:
        return [
            (tuple(int(v) for v in np.flatnonzero(row)), float(w))
            for row, w in zip(self.members, self.weights)
        ]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @classmethod
    def empty(cls, n: int) -> "CutFamily":
        return cls(n, np.zeros((0, n), dtype=bool), np.zeros(0))

    @classmethod
    def from_sets(cls, n: int, cuts, metadata=None) -> "CutFamily":
        """Build from ``(members, weight)`` pairs, canonicalizing as documented above."""
        cuts = list(cuts)
        rows = np.zeros((len(cuts), n), dtype=bool)
        weights = np.zeros(len(cuts))
        for i, (members, w) in enumerate(cuts):
            idx = np.fromiter((int(v) for v in members), dtype=np.int64)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise InputError(f"cut {sorted(idx.tolist())} has vertices outside 0..{n - 1}")
            rows[i, idx] = True
            weights[i] = float(w)
        return cls.from_arrays(n, rows, weights, metadata)

    @classmethod
    def from_arrays(cls, n: int, rows, weights, metadata=None) -> "CutFamily":
        rows = np.asarray(rows, dtype=bool).reshape(-1, n)
        weights = np.asarray(weights, dtype=float).ravel()
        if rows.shape[0] != weights.shape[0]:
            raise SizeMismatch("one weight per cut required")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise InputError("cut weights must be finite and nonnegative")
        if n == 0:
            return cls(0, rows, np.zeros(0), dict(metadata or {}))
        rows = np.where(rows[:, :1], ~rows, rows)  # side without vertex 0
        keep = rows.any(axis=1) & (weights > 0)
        rows, weights = rows[keep], weights[keep]
        if rows.shape[0] == 0:
            return cls(n, np.zeros((0, n), dtype=bool), np.zeros(0), dict(metadata or {}))
        packed = np.packbits(rows, axis=1)
        uniq, inverse = np.unique(packed, axis=0, return_inverse=True)
        merged = np.bincount(inverse.ravel(), weights=weights, minlength=len(uniq))
        out = np.unpackbits(uniq, axis=1, count=n).astype(bool)
        return cls(n, out, merged, dict(metadata or {}))

    # ------------------------------------------------------------ graph views

    def crossing_matrix(self, g) -> np.ndarray:
        """``X[c, e]`` is True when cut ``c`` separates the endpoints of edge ``e``."""
        if g.n != self.n:
            raise SizeMismatch(f"family on {self.n} vertices, graph has {g.n}")
        e = g.edge_array()
        return self.members[:, e[:, 0]] != self.members[:, e[:, 1]]


def wall_kernel(w: CutFamily) -> np.ndarray:
    """``k(u, v)`` = total weight of cuts separating ``u`` from ``v``."""
    x = w.members.astype(float)
    inside = (x * w.weights[:, None]).T @ (1.0 - x)
    k = inside + inside.T
    np.fill_diagonal(k, 0.0)
    return k


def wall_crossing(w: CutFamily, g, e) -> tuple[float, list[int]]:
    """Weight of the walls crossing edge ``e`` and the indices of those cuts.

    ``e`` is an edge index or a vertex pair.
    """
    if isinstance(e, (tuple, list)):
        u, v = int(e[0]), int(e[1])
        if not g.has_edge(u, v):
            raise NotAnEdge(f"({u},{v}) is not an edge")
    else:
        if not 0 <= int(e) < g.m:
            raise NotAnEdge(f"edge index {e} out of range")
        u, v = g.edges[int(e)]
    if g.n != w.n:
        raise SizeMismatch(f"family on {w.n} vertices, graph has {g.n}")
    idx = np.flatnonzero(w.members[:, u] != w.members[:, v])
    return float(w.weights[idx].sum()), [int(i) for i in idx]


# ------------------------------------------------------------ JSON


def cut_family_to_dict(w: CutFamily) -> dict:
    out = {
        "n": w.n,
        "cuts": [{"members": list(m), "weight": wt} for m, wt in w.cuts],
    }
    if w.metadata:
        out["metadata"] = w.metadata
    return out


def cut_family_from_dict(data: dict) -> CutFamily:
    try:
        n = int(data["n"])
        cuts = [(c["members"], float(c["weight"])) for c in data["cuts"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed cut family: {exc}") from None
    return CutFamily.from_sets(n, cuts, data.get("metadata"))


def read_cut_family(path) -> CutFamily:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    return cut_family_from_dict(data)
