"""Kernels on finite vertex sets.

A kernel is a plain square ``numpy`` array. This module decides positive
definiteness, conditional negative definiteness and membership in the cut
cone, realizes CND kernels as squared euclidean distances, and builds the
auxiliary kernels used in the coarse-embedding argument.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import simplex
from .cuts import CutFamily, wall_kernel
from .eigen import jacobi_eigh
from .errors import (
    InputError,
    NegativeEntry,
    NonpositiveLambda,
    NonSymmetric,
    NonzeroDiagonal,
    NotCND,
    SizeMismatch,
    TooLarge,
    UsageError,
    VariationViolated,
)

DEFAULT_TOL = 1e-9
CUT_CONE_MAX_N = 14


def as_kernel(k, cnd: bool = False) -> np.ndarray:
    """Validate and return ``k`` as a float matrix.

    With ``cnd`` the kernel must also have zero diagonal and nonnegative entries.
    """
    k = np.asarray(k, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise NonSymmetric(f"kernel must be square, got shape {k.shape}")
    if not np.all(np.isfinite(k)):
        raise InputError("kernel has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(k)))) if k.size else 1.0
    if k.size and np.max(np.abs(k - k.T)) > 1e-12 * scale:
        raise NonSymmetric("kernel is not symmetric within 1e-12")
    if cnd:
        if k.size and np.max(np.abs(np.diag(k))) > 1e-12 * scale:
            raise NonzeroDiagonal("kernel must vanish on the diagonal")
        if k.size and np.min(k) < -1e-12 * scale:
            raise NegativeEntry("kernel has negative entries")
    return k


@dataclass
class DefinitenessReport:
    ok: bool
    min_eigenvalue: float
    witness: np.ndarray | None = None
    form_value: float | None = None

    def __bool__(self) -> bool:
        return self.ok


def _psd_threshold(m: np.ndarray, tol: float) -> float:
    n = m.shape[0]
    return tol * n * (float(np.max(np.abs(m))) if m.size else 0.0)


def is_positive_definite(k, tol: float = DEFAULT_TOL) -> DefinitenessReport:
    """PSD test: smallest eigenvalue at least ``-tol * n * max|k|``."""
    k = as_kernel(k)
    if k.shape[0] == 0:
        return DefinitenessReport(True, 0.0)
    w = jacobi_eigh(k)[0]
    lam = float(w[0])
    return DefinitenessReport(lam >= -_psd_threshold(k, tol), lam)


def cnd_quadratic_form(k, a) -> float:
    """``sum_ij a_i a_j k(i, j)``; nonpositive on zero-sum ``a`` when ``k`` is CND."""
    a = np.asarray(a, dtype=float)
    return float(a @ np.asarray(k, dtype=float) @ a)


def anchored_gram(k) -> np.ndarray:
    """``G(i, j) = (k(i,0) + k(j,0) - k(i,j)) / 2``; PSD exactly when ``k`` is CND."""
    k = np.asarray(k, dtype=float)
    col = k[:, 0]
    return 0.5 * (col[:, None] + col[None, :] - k)


def _integer_witness(k, a):
    """Try small integer rescalings of a violating vector; keep one that still violates."""
    big = np.abs(a) > 1e-3 * np.max(np.abs(a))
    base = np.min(np.abs(a[big]))
    for mult in (1, 2, 3, 4):
        b = np.round(a / base * mult)
        b[~big] = 0.0
        if b.sum() == 0 and np.any(b) and cnd_quadratic_form(k, b) > 0:
            return b
    return None


def is_cond_negative_definite(k, tol: float = DEFAULT_TOL) -> DefinitenessReport:
    """Decide conditional negative definiteness through the anchored Gram matrix.

    On failure ``witness`` is a zero-sum coefficient vector with positive
    quadratic form (``form_value``). The eigenvector witness is replaced by a
    small integer vector when rounding preserves the violation; the sign is
    fixed so that the first nonzero entry is positive.
    """
    k = as_kernel(k, cnd=True)
    n = k.shape[0]
    if n <= 1:
        return DefinitenessReport(True, 0.0)
    g = anchored_gram(k)[1:, 1:]
    w, v = jacobi_eigh(g)
    lam = float(w[0])
    if lam >= -_psd_threshold(g, tol):
        return DefinitenessReport(True, lam)
    x = v[:, 0]
    a = np.concatenate([[-x.sum()], x])
    integer = _integer_witness(k, a)
    if integer is not None:
        a = integer
    first = a[np.flatnonzero(np.abs(a) > 1e-12)[0]]
    a = a * np.sign(first)
    return DefinitenessReport(False, lam, a, cnd_quadratic_form(k, a))


def schoenberg_transform(k, lam: float) -> np.ndarray:
    """Entrywise ``exp(-lam * k)``."""
    if not lam > 0:
        raise NonpositiveLambda(f"lambda must be positive, got {lam}")
    k = as_kernel(k, cnd=True)
    return np.exp(-lam * k)


@dataclass
class PointCloud:
    points: np.ndarray  # (n, m)
    metric: str = "euclidean"  # or "l1"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise InputError(f"points must form an (n, m) array with m >= 1, got {pts.shape}")
        self.points = pts
        if self.metric not in ("euclidean", "l1"):
            raise UsageError(f"unknown metric {self.metric!r}")
        if not np.all(np.isfinite(self.points)):
            raise InputError("point coordinates must be finite")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def distances(self) -> np.ndarray:
        diff = self.points[:, None, :] - self.points[None, :, :]
        if self.metric == "l1":
            return np.abs(diff).sum(axis=2)
        return np.sqrt((diff**2).sum(axis=2))


def hilbert_embedding(k, tol: float = DEFAULT_TOL) -> PointCloud:
    """Points ``f(u)`` with ``|f(u) - f(v)|^2 = k(u, v)`` and ``f(0) = 0``.

    The dimension is the numerical rank of the anchored Gram matrix.
    """
    report = is_cond_negative_definite(k, tol)
    if not report:
        raise NotCND(f"kernel is not CND (anchored Gram eigenvalue {report.min_eigenvalue:.3g})")
    k = np.asarray(k, dtype=float)
    n = k.shape[0]
    if n <= 1:
        return PointCloud(np.zeros((n, 1)))
    g = anchored_gram(k)[1:, 1:]
    w, v = jacobi_eigh(g)
    cutoff = max(_psd_threshold(g, tol), 1e-14 * float(np.max(np.abs(g), initial=0.0)))
    keep = w > cutoff
    if not keep.any():
        return PointCloud(np.zeros((n, 1)))
    coords = v[:, keep] * np.sqrt(w[keep])
    coords = coords[:, ::-1]  # largest spread first
    return PointCloud(np.vstack([np.zeros((1, coords.shape[1])), coords]))


# ------------------------------------------------------------------ cut cone


def _cut_columns(n: int) -> np.ndarray:
    """All canonical cuts (subsets of ``1..n-1``, nonempty) as a bool matrix."""
    count = (1 << (n - 1)) - 1
    masks = np.arange(1, count + 1, dtype=np.int64)
    rows = np.zeros((count, n), dtype=bool)
    for v in range(1, n):
        rows[:, v] = (masks >> (v - 1)) & 1
    return rows


@dataclass
class CutConeResult:
    feasible: bool
    family: CutFamily | None = None
    residual: float = 0.0
    certificate: dict | None = None
    iterations: int = 0

    @property
    def status(self) -> str:
        return "feasible" if self.feasible else "infeasible"


def _restricted_lp(cost, A, b, cols, extra=None, tol=1e-9):
    """Solve the master LP over ``A[:, cols]`` (plus optional extra columns)."""
    sub = A[:, cols] if extra is None else np.hstack([A[:, cols], extra])
    res = simplex.solve(cost, sub, b, tol=tol)
    if res.status not in ("optimal", "infeasible"):
        raise ArithmeticError(f"cut-cone LP ended with status {res.status}")
    return res


def _price(A, y, cols, score_tol, batch):
    """Columns outside ``cols`` whose score ``y.A`` exceeds ``score_tol``, best first."""
    score = A.T @ y
    score[cols] = -np.inf
    cand = np.flatnonzero(score > score_tol)
    if cand.size > batch:
        cand = cand[np.argsort(-score[cand], kind="stable")[:batch]]
    return cand


def cut_cone_membership(k, tol: float = 1e-9) -> CutConeResult:
    """Decide whether ``k`` is a nonnegative combination of cut metrics.

    Solves ``min sum(w)`` over all ``2**(n-1) - 1`` canonical cuts subject to
    reproducing every entry of ``k``. A feasible answer carries the cut
    family (reconstruction error at most 1e-7); an infeasible one carries a
    Farkas vector ``y`` over vertex pairs with ``sum y(u,v) cut(u,v) <= 0``
    for every cut while ``sum y(u,v) k(u,v) > 0``.

    The LP is solved by column generation: a master problem over a growing
    subset of cuts, with every cut priced against the master's duals each
    round. The result is optimal over the full cut set.
    """
    k = as_kernel(k, cnd=True)
    n = k.shape[0]
    if n > CUT_CONE_MAX_N:
        raise TooLarge(f"cut-cone LP limited to n <= {CUT_CONE_MAX_N}, got {n}")
    if n <= 1 or np.max(k) == 0.0:
        return CutConeResult(True, CutFamily.empty(n))
    cuts = _cut_columns(n)
    pairs = list(itertools.combinations(range(n), 2))
    pu = np.array([p[0] for p in pairs])
    pv = np.array([p[1] for p in pairs])
    A = (cuts[:, pu] != cuts[:, pv]).T.astype(float)
    b = k[pu, pv]
    m = len(b)
    batch = 2 * m
    scale = max(1.0, float(np.max(b)))
    iterations = 0

    # start from the singleton cuts {v}
    cols = np.array([(1 << (v - 1)) - 1 for v in range(1, n)], dtype=np.int64)

    # stage one: minimize slack in  A_J w + s = b
    eye = np.eye(m)
    while True:
        cost = np.concatenate([np.zeros(len(cols)), np.ones(m)])
        res = _restricted_lp(cost, A, b, cols, eye, tol)
        iterations += res.iterations
        y = res.duals
        new = _price(A, y, cols, tol, batch)
        if new.size == 0:
            break
        cols = np.concatenate([cols, new])
    if res.objective > tol * scale:
        y = y / np.max(np.abs(y))
        cert = {
            "pairs": [[int(u), int(v)] for u, v in pairs],
            "coefficients": [float(c) for c in y],
            "value_on_kernel": float(y @ b),
            "max_value_on_cuts": float(np.max(A.T @ y)),
        }
        return CutConeResult(False, None, certificate=cert, iterations=iterations)

    # stage two: minimize total weight, keeping only columns used or priced in
    while True:
        res = _restricted_lp(np.ones(len(cols)), A, b, cols, tol=tol)
        iterations += res.iterations
        if res.status != "optimal":
            raise ArithmeticError("cut-cone master LP lost feasibility")
        new = _price(A, res.duals, cols, 1.0 + tol, batch)
        if new.size == 0:
            break
        cols = np.concatenate([cols, new])

    w = np.zeros(len(cuts))
    w[cols] = np.where(res.x > 1e-12, res.x, 0.0)
    fam = CutFamily.from_arrays(n, cuts, w)
    residual = float(np.max(np.abs(wall_kernel(fam) - k)))
    if residual > 1e-7:
        raise ArithmeticError(f"cut-cone reconstruction error {residual:.3g} exceeds 1e-7")
    return CutConeResult(True, fam, residual, iterations=iterations)


# ------------------------------------------------------------ aggregation


def aggregate_pd_to_cnd(kernels, caps, dist, verify: bool = True) -> np.ndarray:
    """Sum ``1 - k_n`` over a finite sequence of normalized PD kernels.

    ``caps[n-1]`` is the radius ``R_n``. With ``verify`` each ``k_n`` must be
    normalized PD with ``|k_n - 1| < 2**-n`` on pairs at distance ``<= n`` and
    ``k_n < 1/2`` beyond ``R_n``; the caps must be nondecreasing with
    ``R_n >= n``. The output is then checked against ``k <= 2d + 1`` and
    ``k >= #{n : d > R_n} / 2`` on every pair. Failures raise
    :class:`VariationViolated` naming the offending index and pair.
    """
    d = np.asarray(dist)
    n_vert = d.shape[0]
    kernels = [as_kernel(kn) for kn in kernels]
    caps = [float(r) for r in caps]
    if len(caps) != len(kernels):
        raise SizeMismatch("one cap R_n per kernel required")
    out = np.zeros((n_vert, n_vert))
    if not kernels:
        return out
    prev = 0.0
    for idx, (kn, cap) in enumerate(zip(kernels, caps), start=1):
        if kn.shape != d.shape:
            raise SizeMismatch(f"kernel {idx} has shape {kn.shape}, distances {d.shape}")
        out += 1.0 - kn
        if not verify:
            continue
        if cap < max(idx, prev):
            raise VariationViolated(f"R_{idx}={cap} must be >= max({idx}, R_{idx - 1}={prev})", index=idx)
        prev = cap
        if np.max(np.abs(np.diag(kn) - 1.0)) > 1e-12:
            raise VariationViolated(f"kernel {idx} is not normalized", index=idx)
        if not is_positive_definite(kn):
            raise VariationViolated(f"kernel {idx} is not positive definite", index=idx)
        near = (d <= idx) & (np.abs(kn - 1.0) >= 2.0**-idx)
        if near.any():
            u, v = map(int, np.argwhere(near)[0])
            raise VariationViolated(
                f"|k_{idx}({u},{v}) - 1| = {abs(kn[u, v] - 1):.6g} >= 2^-{idx} at distance {d[u, v]}",
                pair=(u, v), index=idx,
            )
        far = (d > cap) & (kn >= 0.5)
        if far.any():
            u, v = map(int, np.argwhere(far)[0])
            raise VariationViolated(
                f"k_{idx}({u},{v}) = {kn[u, v]:.6g} >= 1/2 beyond R_{idx}={cap}",
                pair=(u, v), index=idx,
            )
    if verify:
        upper = out - (2 * d + 1)
        lower = aggregate_lower_bound(d, caps) - out
        for name, slack in (("upper", upper), ("lower", lower)):
            off = slack.copy()
            np.fill_diagonal(off, -np.inf)
            if n_vert > 1 and np.max(off) > 1e-12:
                u, v = map(int, np.unravel_index(np.argmax(off), off.shape))
                raise VariationViolated(f"{name} growth bound fails at ({u},{v})", pair=(u, v))
    return out


def aggregate_lower_bound(dist, caps) -> np.ndarray:
    """Half the number of caps strictly below each distance."""
    d = np.asarray(dist, dtype=float)
    caps = np.asarray(caps, dtype=float)
    return 0.5 * (d[..., None] > caps).sum(axis=-1)


# ------------------------------------------------------------ envelopes


@dataclass
class EnvelopePair:
    radii: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    proper_looking: bool = field(default=False)


def coarse_envelopes(k, dist) -> EnvelopePair:
    """Per-distance-shell minimum and maximum of ``k``."""
    k = np.asarray(k, dtype=float)
    d = np.asarray(dist)
    if k.shape != d.shape:
        raise SizeMismatch(f"kernel shape {k.shape} vs distances {d.shape}")
    radii = np.unique(d)
    rho1 = np.array([k[d == r].min() for r in radii])
    rho2 = np.array([k[d == r].max() for r in radii])
    proper = bool(len(radii) > 1 and np.all(np.diff(rho1) > 0))
    return EnvelopePair(radii, rho1, rho2, proper)


# ------------------------------------------------------------ CSV


def format_kernel_csv(k) -> str:
    k = np.asarray(k, dtype=float)
    lines = [str(k.shape[0])]
    lines += [",".join(f"{x:.17g}" for x in row) for row in k]
    return "\n".join(lines) + "\n"


def parse_kernel_csv(text: str) -> np.ndarray:
    rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise InputError("empty kernel file")
    try:
        n = int(rows[0])
        values = [[float(x) for x in row.split(",")] for row in rows[1:]]
    except ValueError as exc:
        raise InputError(f"kernel CSV: {exc}") from None
    if len(values) != n or any(len(r) != n for r in values):
        raise InputError(f"kernel CSV announces n={n} but rows do not form an {n}x{n} matrix")
    return np.array(values, dtype=float).reshape(n, n)


def read_kernel_csv(path) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    return parse_kernel_csv(text)


def format_points_csv(cloud: PointCloud) -> str:
    lines = [f"{cloud.n},{cloud.dim}"]
    lines += [",".join(f"{x:.17g}" for x in row) for row in cloud.points]
    return "\n".join(lines) + "\n"


def parse_points_csv(text: str, metric: str = "l1") -> PointCloud:
    """Point file: header ``n,m`` then ``n`` rows of ``m`` coordinates."""
    rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise InputError("empty points file")
    try:
        n, m = (int(x) for x in rows[0].split(","))
        values = [[float(x) for x in row.split(",")] for row in rows[1:]]
    except ValueError as exc:
        raise InputError(f"points CSV: {exc}") from None
    if len(values) != n or any(len(r) != m for r in values):
        raise InputError(f"points CSV announces {n}x{m} but rows disagree")
    return PointCloud(np.array(values).reshape(n, m), metric)
