"""Stretched-exponential fits of two-point functions and derived kernels.

A two-point function ``tau`` has stretched-exponential decay with exponent
``alpha`` when ``exp(-beta d) <= tau <= exp(-gamma d^alpha)`` on every pair
of distinct vertices. The fits here are the tightest such envelopes.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    BadAlpha,
    EmptyGrid,
    NoDecay,
    NonpositiveGamma,
    SizeMismatch,
    ZeroTwoPoint,
)
from .kernel import CUT_CONE_MAX_N, as_kernel, cut_cone_membership
from .percolation import TwoPointEstimate

DEFAULT_CAP = 10.0
DEFAULT_GRID = tuple(round(0.05 * i, 2) for i in range(21))


@dataclass
class FitResult:
    alpha: float
    beta: float
    gamma: float
    C: float
    residual: float
    t: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _power(alpha: float):
    """``d -> d**alpha`` with ``rho(0) = 0`` also when ``alpha = 0``."""
    def rho(d):
        d = np.asarray(d, dtype=float)
        return np.where(d > 0, np.power(d, alpha), 0.0)
    return rho


def _check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise BadAlpha(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def _bounds(tau):
    """Per-entry (value used for beta, value used for gamma, time)."""
    if isinstance(tau, TwoPointEstimate):
        est = tau.tau
        return est - tau.ci, np.minimum(est + tau.ci, 1.0), tau.t
    tau = np.asarray(tau, dtype=float)
    return tau, np.minimum(tau, 1.0), None


def fit_stretched_exponential(tau, dist, alpha: float, rho=None, t: float | None = None) -> FitResult:
    """Smallest ``beta`` and largest ``gamma`` over all pairs at positive distance.

    ``rho`` defaults to ``d -> d**alpha`` and must vanish only at 0. For a
    :class:`TwoPointEstimate` the lower confidence limit of ``tau`` sets
    ``beta`` and the upper one sets ``gamma``.
    """
    alpha = _check_alpha(alpha)
    rho = rho or _power(alpha)
    lo, hi, est_t = _bounds(tau)
    d = np.asarray(dist, dtype=float)
    if lo.shape != d.shape:
        raise SizeMismatch(f"two-point function {lo.shape} vs distances {d.shape}")
    iu, iv = np.triu_indices(len(d), 1)
    dd = d[iu, iv]
    use = (dd > 0) & np.isfinite(dd)
    iu, iv, dd = iu[use], iv[use], dd[use]
    if dd.size == 0:
        raise NoDecay("no pair at positive distance to fit")
    r = np.asarray(rho(dd), dtype=float)
    if np.any(r <= 0) or float(np.asarray(rho(np.zeros(1)))[0]) != 0.0:
        raise BadAlpha("rho must vanish at 0 and be positive elsewhere")

    low = lo[iu, iv]
    zero = low <= 0
    if zero.any():
        pairs = [(int(a), int(b)) for a, b in zip(iu[zero], iv[zero])]
        raise ZeroTwoPoint(f"two-point function is zero at finite distance on {len(pairs)} pair(s)", pairs)
    high = hi[iu, iv]
    beta = float(np.max(-np.log(low) / dd))
    gamma = float(np.min(-np.log(high) / r))
    if not gamma > 0:
        flat = high >= 1.0
        pairs = [(int(a), int(b)) for a, b in zip(iu[flat], iv[flat])]
        raise NoDecay(f"two-point function equals 1 at positive distance on {len(pairs)} pair(s)", pairs)
    residual = max(
        0.0,
        float(np.max(np.exp(-beta * dd) - low)),
        float(np.max(high - np.exp(-gamma * r))),
    )
    return FitResult(alpha, beta, gamma, beta / gamma, residual, t if t is not None else est_t)


@dataclass
class AlphaEstimate:
    alpha: float | None
    C: float | None = None
    t: float | None = None
    status: str = "ok"  # "ok" | "no_decay" | "cap_exceeded"
    diagnostic: str = ""
    skipped: list = field(default_factory=list)  # times whose fit is impossible, with reasons

    @property
    def degenerate(self) -> bool:
        return self.status != "ok"

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_alpha(taus, dist, cap: float = DEFAULT_CAP, grid=DEFAULT_GRID,
                   resolution: float = 1e-3) -> AlphaEstimate:
    """Largest ``alpha`` for which some ``t`` gives a fit with ``C <= cap``.

    ``taus`` is a sequence of ``(t, tau)`` with ``tau`` a matrix or a
    :class:`TwoPointEstimate`. ``C`` grows with ``alpha`` on graph
    distances, so the feasible exponents form an interval; the largest
    feasible grid point is refined by bisection to ``resolution``.
    """
    taus = list(taus)
    grid = sorted(float(a) for a in grid)
    if not taus or not grid:
        raise EmptyGrid("need at least one time and one alpha candidate")
    for a in grid:
        _check_alpha(a)

    usable, skipped = [], []
    for t, tau in taus:
        try:
            fit_stretched_exponential(tau, dist, grid[0])
        except (NoDecay, ZeroTwoPoint) as exc:
            skipped.append({"t": float(t), "error": type(exc).__name__,
                            "message": str(exc), "pairs": [list(p) for p in exc.pairs]})
            continue
        usable.append((float(t), tau))
    if not usable:
        return AlphaEstimate(None, status="no_decay", skipped=skipped,
                             diagnostic="no time in the sweep admits a finite fit")

    def best(alpha):
        fits = [fit_stretched_exponential(tau, dist, alpha, t=t) for t, tau in usable]
        return min(fits, key=lambda f: f.C)

    def ok(fit):
        return fit.C <= cap * (1.0 + 1e-12)

    lo_alpha, lo_fit, hi_alpha = None, None, None
    for a in grid:
        f = best(a)
        if ok(f):
            lo_alpha, lo_fit = a, f
        else:
            hi_alpha = a
            break
    if lo_alpha is None:
        return AlphaEstimate(None, status="cap_exceeded", skipped=skipped,
                             diagnostic=f"C exceeds cap {cap} already at alpha={grid[0]}")
    if hi_alpha is not None:
        while hi_alpha - lo_alpha > resolution:
            mid = 0.5 * (lo_alpha + hi_alpha)
            f = best(mid)
            if ok(f):
                lo_alpha, lo_fit = mid, f
            else:
                hi_alpha = mid
    return AlphaEstimate(lo_alpha, lo_fit.C, lo_fit.t, skipped=skipped)


@dataclass
class DualKernelReport:
    kernel: np.ndarray  # last k_n
    lipschitz_excess: float  # max of k - C d over pairs, last index
    growth_deficit: float  # max of d^alpha - k over pairs, last index
    excess_by_index: list
    deficit_by_index: list
    lipschitz_trend: bool  # positive parts of the excess never increase
    growth_trend: bool
    gammas_decreasing: bool
    cut_cone_feasible: list | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kernel"] = self.kernel.tolist()
        return out


def _nonincreasing(values, tol=1e-12) -> bool:
    pos = np.maximum(np.asarray(values, dtype=float), 0.0)
    return bool(np.all(np.diff(pos) <= tol))


def dual_kernel(taus, gammas, dist, alpha: float, C: float, cut_cone: bool = True) -> DualKernelReport:
    """Kernels ``k_n = (1 - tau_n) / gamma_n`` with Lipschitz and growth diagnostics.

    With ``cut_cone`` every ``k_n`` on at most 14 vertices is also tested for
    membership in the cut cone.
    """
    alpha = _check_alpha(alpha)
    taus = [np.asarray(t, dtype=float) for t in taus]
    gammas = [float(g) for g in gammas]
    if len(taus) != len(gammas) or not taus:
        raise SizeMismatch("one gamma per two-point function, at least one of each")
    if any(not g > 0 for g in gammas):
        raise NonpositiveGamma("gammas must be positive")
    d = np.asarray(dist, dtype=float)
    off = ~np.eye(len(d), dtype=bool)
    excess, deficit, feasible, k = [], [], [], None
    for tau, g in zip(taus, gammas):
        if tau.shape != d.shape:
            raise SizeMismatch(f"two-point function {tau.shape} vs distances {d.shape}")
        k = (1.0 - tau) / g
        np.fill_diagonal(k, 0.0)
        excess.append(float(np.max((k - C * d)[off])) if off.any() else 0.0)
        deficit.append(float(np.max((np.power(d, alpha) - k)[off])) if off.any() else 0.0)
        if cut_cone and len(d) <= CUT_CONE_MAX_N:
            feasible.append(cut_cone_membership(as_kernel(k, cnd=True)).feasible)
    return DualKernelReport(
        k, excess[-1], deficit[-1], excess, deficit,
        _nonincreasing(excess), _nonincreasing(deficit),
        bool(np.all(np.diff(gammas) < 0)),
        feasible if cut_cone and len(d) <= CUT_CONE_MAX_N else None,
    )


def embedding_constants(points, dist, rho) -> tuple[float, float]:
    """Lipschitz constant ``L`` and compression constant ``c`` of an embedding.

    ``L = max |f(u) - f(v)| / d(u, v)`` and ``c = min |f(u) - f(v)| / rho(d(u, v))``
    over distinct pairs, with the norm of ``points.metric``.
    """
    emb = points.distances()
    d = np.asarray(dist, dtype=float)
    iu, iv = np.triu_indices(len(d), 1)
    dd, ee = d[iu, iv], emb[iu, iv]
    return float(np.max(ee / dd)), float(np.min(ee / np.asarray(rho(dd), dtype=float)))


__all__ = [
    "FitResult", "AlphaEstimate", "DualKernelReport", "fit_stretched_exponential",
    "estimate_alpha", "dual_kernel", "embedding_constants", "DEFAULT_CAP", "DEFAULT_GRID",
]
