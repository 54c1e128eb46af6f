"""Cyclic Jacobi eigen-solver for real symmetric matrices."""
from __future__ import annotations

import math

import numpy as np

from .errors import NonSymmetric


def jacobi_eigh(a, tol: float = 1e-15, max_sweeps: int = 100):
    """Eigen-decomposition of a real symmetric matrix.

    Returns ``(w, v)`` with eigenvalues ``w`` in ascending order and the
    matching orthonormal eigenvectors as the columns of ``v``, so that
    ``a @ v = v * w``. Rotations sweep the strict upper triangle row by row
    and skip entries already negligible against the diagonal; iteration
    stops once the off-diagonal Frobenius mass is below ``tol`` times the
    matrix norm.
    """
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSymmetric(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = np.max(np.abs(a)) if a.size else 0.0
    if n and np.max(np.abs(a - a.T)) > 1e-12 * max(scale, 1.0):
        raise NonSymmetric("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    if n <= 1:
        return np.diag(a).copy(), v

    norm = math.sqrt(float(np.sum(a * a)))
    if norm == 0.0:
        return np.zeros(n), v
    target = tol * norm

    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.triu(a, 1) ** 2)) * 2.0)
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app, aqq = a[p, p], a[q, q]
                if abs(apq) < 1e-300 or (abs(apq) * 1e18 < abs(app) and abs(apq) * 1e18 < abs(aqq)):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # theta**2 would overflow
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J, touching rows/columns p and q only
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :]
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def jacobi_eigvalsh(a, tol: float = 1e-15) -> np.ndarray:
    return jacobi_eigh(a, tol)[0]
