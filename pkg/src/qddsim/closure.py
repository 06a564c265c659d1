"""Planar force-closure and first-order form-closure tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import simplex
from .contact import ContactPoint, friction_cone_edges


@dataclass
class ClosureResult:
    closed: bool
    certificate: np.ndarray | None = None
    wrenches: np.ndarray | None = None

    def __bool__(self):
        return self.closed


def unit_wrenches(points, directions, length_scale=None):
    """Columns ``(f_x, f_y, p x f / L)`` for unit forces ``f`` at ``p``.

    The torque row is divided by ``length_scale`` (default: the largest
    point radius) so the LP is well scaled; this does not change any
    closure verdict.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    D = np.asarray(directions, dtype=float).reshape(-1, 2)
    if length_scale is None:
        length_scale = max(float(np.abs(P).max(initial=0.0)), 1e-12)
    tz = (P[:, 0] * D[:, 1] - P[:, 1] * D[:, 0]) / length_scale
    return np.vstack([D[:, 0], D[:, 1], tz])


def positively_spans(W, tol: float = 1e-9) -> ClosureResult:
    """Do the columns of ``W`` (3 x k) positively span R^3?

    Equivalent to ``rank(W) == 3`` and some ``lambda >= 1`` with
    ``W @ lambda == 0``.  The returned certificate is that ``lambda``.
    """
    W = np.asarray(W, dtype=float)
    if W.shape[1] < 4 or np.linalg.matrix_rank(W, tol=1e-10) < 3:
        return ClosureResult(False, None, W)
    lam = simplex.feasible_point(W, np.zeros(3), lower=np.ones(W.shape[1]), tol=tol)
    if lam is None:
        return ClosureResult(False, None, W)
    return ClosureResult(True, lam, W)


def _centred(contacts):
    P = np.array([c.position for c in contacts], dtype=float)
    return P - P.mean(axis=0)


def form_closure(contacts) -> ClosureResult:
    """First-order frictionless form closure; friction coefficients ignored.

    ``certificate`` holds weights ``lambda_i >= 1`` on the unit contact
    wrenches (in contact order) with ``sum lambda_i w_i = 0``.
    """
    contacts = list(contacts)
    if len(contacts) < 4:
        return ClosureResult(False)
    # choose the moment reference at the centroid: closure is unaffected
    P = _centred(contacts)
    N = np.array([c.normal for c in contacts], dtype=float)
    return positively_spans(unit_wrenches(P, N))


def force_closure(contacts) -> ClosureResult:
    """Frictional planar force closure for any number of point contacts.

    Each contact contributes its two friction-cone edge wrenches (one when
    ``mu == 0``).  The certificate is indexed edge by edge.
    """
    contacts = list(contacts)
    if not contacts:
        return ClosureResult(False)
    P = _centred(contacts)
    pts, dirs = [], []
    for p, c in zip(P, contacts):
        e1, e2 = friction_cone_edges(c)
        pts.append(p)
        dirs.append(e1)
        if c.mu > 0:
            pts.append(p)
            dirs.append(e2)
    return positively_spans(unit_wrenches(pts, dirs))


def force_closure_2contact(c1: ContactPoint, c2: ContactPoint) -> bool:
    """Planar two-contact test: the contact line lies strictly inside both cones."""
    if c1.mu < 0 or c2.mu < 0:
        raise ValueError("friction coefficient must be >= 0")
    dx = c2.position[0] - c1.position[0]
    dy = c2.position[1] - c1.position[1]
    d = math.hypot(dx, dy)
    if d == 0.0:
        return False
    dx, dy = dx / d, dy / d
    return (_angle(c1.normal, (dx, dy)) < math.atan(c1.mu)
            and _angle(c2.normal, (-dx, -dy)) < math.atan(c2.mu))


def _angle(u, v):
    return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), u[0] * v[0] + u[1] * v[1])
