"""Dense two-phase simplex for the tiny LPs of the closure tests.

Problems are in equality form::

    minimise    c @ x
    subject to  A @ x == b,  x >= 0

Bland's rule is used for pivoting, which is slow on big problems but cannot
cycle; the closure instances have at most a few dozen columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-9


class LPError(Exception):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    basis: list


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _run(T, basis, n_cols, tol):
    """Iterate on tableau ``T`` whose last row is the reduced cost row."""
    m = T.shape[0] - 1
    for _ in range(50_000):
        cost = T[-1, :n_cols]
        entering = next((j for j in range(n_cols) if cost[j] < -tol), None)
        if entering is None:
            return
        col = T[:m, entering]
        ratios = [(T[i, -1] / col[i], basis[i], i) for i in range(m) if col[i] > tol]
        if not ratios:
            raise Unbounded("objective unbounded below")
        best = min(r[0] for r in ratios)
        # Bland: smallest basic index among ties
        _, _, row = min((r for r in ratios if r[0] <= best + tol), key=lambda r: r[1])
        _pivot(T, row, entering)
        basis[row] = entering
    raise LPError("simplex iteration limit reached")


def solve(c, A, b, tol: float = TOL) -> LPResult:
    """Two-phase simplex; raises :class:`Infeasible` or :class:`Unbounded`."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # phase I: artificials on every row
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _run(T, basis, n + m, tol)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -T[-1, -1] > tol * scale:
        raise Infeasible(f"phase I residual {-T[-1, -1]:.3e}")

    # drive remaining artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            j = next((j for j in range(n) if abs(T[i, j]) > tol), None)
            if j is not None:
                _pivot(T, i, j)
                basis[i] = j
    keep = [i for i in range(m) if basis[i] < n]
    T = np.vstack([T[keep][:, list(range(n)) + [-1]], np.zeros((1, n + 1))])
    basis = [basis[i] for i in keep]

    # phase II
    T[-1, :n] = c
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    _run(T, basis, n, tol)
    x = np.zeros(n)
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    x = _polish(A, b, x, basis)
    return LPResult(x=x, fun=float(c @ x), basis=basis)


def _polish(A, b, x, basis):
    """Re-solve the basic variables directly to shave tableau round-off."""
    if not basis:
        return x
    B = A[:, basis]
    sol, *_ = np.linalg.lstsq(B, b, rcond=None)
    if np.all(sol >= -TOL):
        x = np.zeros_like(x)
        x[basis] = np.maximum(sol, 0.0)
    return x


def feasible_point(A, b, lower=None, tol: float = TOL):
    """A point with ``A @ x == b`` and ``x >= lower``, or ``None``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.zeros(A.shape[1]) if lower is None else np.asarray(lower, dtype=float)
    try:
        res = solve(np.ones(A.shape[1]), A, b - A @ lo, tol)
    except Infeasible:
        return None
    return res.x + lo
