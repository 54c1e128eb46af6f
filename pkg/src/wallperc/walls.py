"""Wall structures: cut families built from embeddings or from a root."""
from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._rng import block_generator, worker_count
from .cuts import CutFamily
from .errors import DegenerateCloud, SizeMismatch, UsageError, VertexOutOfRange, ZeroSamples
from .graph import bfs_distances
from .kernel import PointCloud

SAMPLE_BLOCK = 1 << 16


def walls_from_l1_embedding(points: PointCloud, g=None) -> CutFamily:
    """Threshold cuts reproducing the l1 distances of ``points``.

    For each coordinate with distinct sorted values ``v_1 < ... < v_r`` the
    cut ``{u : x_u > v_i}`` gets weight ``v_{i+1} - v_i``.
    """
    x = np.asarray(points.points, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n = x.shape[0]
    if g is not None and g.n != n:
        raise SizeMismatch(f"{n} points for a graph on {g.n} vertices")
    rows, weights = [], []
    for j in range(x.shape[1]):
        vals = np.unique(x[:, j])
        if vals.size < 2:
            continue
        rows.append(x[:, j][None, :] > vals[:-1, None])
        weights.append(np.diff(vals))
    if not rows:
        return CutFamily.empty(n)
    return CutFamily.from_arrays(n, np.vstack(rows), np.concatenate(weights), {"source": "l1"})


@functools.lru_cache(maxsize=None)
def crofton_constant(m: int) -> float:
    """``E|theta_1|`` for ``theta`` uniform on the unit sphere of ``R^m``.

    With ``theta_1 = cos(phi)`` the density of ``phi`` on ``[0, pi]`` is
    proportional to ``sin(phi)^(m-2)``; both integrals over ``[0, pi/2]`` are
    evaluated with 64-point Gauss-Legendre.
    """
    m = int(m)
    if m < 1:
        raise UsageError(f"dimension must be >= 1, got {m}")
    if m == 1:
        return 1.0
    nodes, wts = np.polynomial.legendre.leggauss(64)
    phi = (nodes + 1.0) * (math.pi / 4.0)
    dens = np.sin(phi) ** (m - 2)
    return float(np.sum(wts * np.cos(phi) * dens) / np.sum(wts * dens))


def _halfspace_block(x: np.ndarray, seed: int, block: int, count: int):
    rng = block_generator(seed, block)
    theta = rng.standard_normal((count, x.shape[1]))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    proj = theta @ x.T  # (count, n)
    lo = proj.min(axis=1)
    hi = proj.max(axis=1)
    s = lo + rng.random(count) * (hi - lo)
    members = proj > s[:, None]
    return members, hi - lo


def walls_from_hilbert_embedding(points: PointCloud, samples: int, seed: int = 0) -> CutFamily:
    """Random half-space walls whose kernel estimates euclidean distance.

    Each sample draws a direction ``theta`` uniformly on the sphere and an
    offset ``s`` uniformly between the smallest and largest projection of the
    points; the cut ``{u : <theta, f(u)> > s}`` receives weight
    ``range / (c_m * samples)``. Then the expected weight separating two
    points is their distance. Samples are drawn in fixed blocks of
    ``SAMPLE_BLOCK``; block ``b`` uses the Philox stream for ``seed``
    jumped ``b`` times, so the result does not depend on the thread count.
    """
    samples = int(samples)
    if samples < 1:
        raise ZeroSamples("samples must be >= 1")
    x = np.asarray(points.points, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n, m = x.shape
    if n < 2 or np.all(x == x[0]):
        raise DegenerateCloud("point cloud needs at least two distinct points")
    c_m = crofton_constant(m)
    counts = [min(SAMPLE_BLOCK, samples - start) for start in range(0, samples, SAMPLE_BLOCK)]
    scale = 1.0 / (c_m * samples)

    def work(b):
        return _halfspace_block(x, seed, b, counts[b])

    workers = min(worker_count(), len(counts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, range(len(counts))))
    else:
        parts = [work(b) for b in range(len(counts))]
    rows = np.vstack([p[0] for p in parts])
    weights = np.concatenate([p[1] for p in parts]) * scale
    meta = {"source": "halfspace", "seed": int(seed), "samples": samples, "c_m": c_m, "dim": m}
    return CutFamily.from_arrays(n, rows, weights, meta)


def radial_walls(g, root: int = 0) -> CutFamily:
    """Spheres around ``root``: cuts ``{v : d(root, v) >= r}`` of weight 1."""
    if not 0 <= int(root) < g.n:
        raise VertexOutOfRange(f"root {root} not in 0..{g.n - 1}")
    dist = bfs_distances(g, int(root))
    radius = int(dist.max())
    r = np.arange(1, radius + 1)
    rows = dist[None, :] >= r[:, None]
    return CutFamily.from_arrays(g.n, rows, np.ones(radius), {"source": "radial", "root": int(root)})
