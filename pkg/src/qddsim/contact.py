"""Rigid planar objects, collision primitives and penalty contact forces.

Contact normals always point *into* the body that receives ``+f`` (the
object, when one body is the manipulated object).  The other body receives
``-f`` at the same point.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class ShapeKind(str, enum.Enum):
    DISK = "Disk"
    POLYGON = "ConvexPolygon"


@dataclass
class RigidObject:
    """A disk or convex polygon moving in the plane.

    ``vertices`` are in the body frame, counterclockwise.  ``inertia`` defaults
    to that of a uniform lamina of the given shape.
    """

    kind: ShapeKind = ShapeKind.DISK
    radius: float = 0.02
    vertices: tuple = ()
    mass: float = 0.05
    inertia: float | None = None
    position: tuple = (0.0, 0.0)
    orientation: float = 0.0
    velocity: tuple = (0.0, 0.0)
    angular_velocity: float = 0.0
    mu: float = 0.8

    def __post_init__(self):
        self.kind = ShapeKind(self.kind)
        if not self.mass > 0:
            raise ValueError("object mass must be positive")
        if self.mu < 0:
            raise ValueError("friction coefficient must be >= 0")
        if self.kind is ShapeKind.DISK:
            if not self.radius > 0:
                raise ValueError("disk radius must be positive")
            if self.inertia is None:
                self.inertia = 0.5 * self.mass * self.radius ** 2
        else:
            verts = [tuple(map(float, v)) for v in self.vertices]
            check_convex_ccw(verts)
            self.vertices = tuple(verts)
            self.radius = max(math.hypot(*v) for v in verts)
            if self.inertia is None:
                self.inertia = polygon_inertia(verts, self.mass)
        if not self.inertia > 0:
            raise ValueError("object inertia must be positive")
        self.position = tuple(map(float, self.position))
        self.velocity = tuple(map(float, self.velocity))

    def world_vertices(self):
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        px, py = self.position
        return [(px + c * x - s * y, py + s * x + c * y) for x, y in self.vertices]

    def point_velocity(self, p):
        """Velocity of the body-fixed point currently at world position ``p``."""
        w = self.angular_velocity
        return (self.velocity[0] - w * (p[1] - self.position[1]),
                self.velocity[1] + w * (p[0] - self.position[0]))


def check_convex_ccw(verts):
    n = len(verts)
    if n < 3:
        raise ValueError("polygon needs at least 3 vertices")
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        cx, cy = verts[(i + 2) % n]
        if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) <= 0:
            raise ValueError("polygon must be convex and counterclockwise")


def polygon_inertia(verts, mass):
    """Polar moment of a uniform polygon about the body origin."""
    area2 = 0.0
    acc = 0.0
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        cr = x0 * y1 - x1 * y0
        area2 += cr
        acc += cr * (x0 * x0 + x0 * x1 + x1 * x1 + y0 * y0 + y0 * y1 + y1 * y1)
    return mass * acc / (6.0 * area2)


@dataclass
class ContactPoint:
    position: tuple
    normal: tuple
    mu: float = 0.5
    penetration: float = 0.0
    tag: str = ""

    def __post_init__(self):
        nx, ny = self.normal
        if abs(math.hypot(nx, ny) - 1.0) > 1e-9:
            raise ValueError("contact normal must be a unit vector")
        if self.mu < 0:
            raise ValueError("friction coefficient must be >= 0")
        if self.penetration < 0:
            raise ValueError("penetration must be >= 0")


@dataclass(frozen=True)
class PlanarWrench:
    fx: float = 0.0
    fy: float = 0.0
    tz: float = 0.0

    def __add__(self, other):
        return PlanarWrench(self.fx + other.fx, self.fy + other.fy, self.tz + other.tz)

    def __neg__(self):
        return PlanarWrench(-self.fx, -self.fy, -self.tz)

    @classmethod
    def from_force(cls, point, force):
        return cls(force[0], force[1], point[0] * force[1] - point[1] * force[0])

    def as_array(self):
        return np.array([self.fx, self.fy, self.tz])


def friction_cone_edges(c: ContactPoint):
    if c.mu < 0:
        raise ValueError("friction coefficient must be >= 0")
    a = math.atan(c.mu)
    nx, ny = c.normal
    ca, sa = math.cos(a), math.sin(a)
    return (np.array([ca * nx - sa * ny, sa * nx + ca * ny]),
            np.array([ca * nx + sa * ny, -sa * nx + ca * ny]))


def contact_force(c: ContactPoint, v_rel, kn=2000.0, dn=10.0, k_visc=100.0):
    """Penalty normal force plus viscously regularised Coulomb friction.

    ``v_rel`` is the velocity of the receiving body relative to the other
    body at the contact point.  Returns the force on the receiving body.
    """
    return np.array(_contact_force(c.normal[0], c.normal[1], c.penetration, c.mu,
                                   v_rel[0], v_rel[1], kn, dn, k_visc))


def _contact_force(nx, ny, depth, mu, vx, vy, kn, dn, k_visc):
    if depth <= 0.0:
        return 0.0, 0.0
    vn = vx * nx + vy * ny
    fn = kn * depth - dn * vn
    if fn <= 0.0:
        return 0.0, 0.0
    tx, ty = -ny, nx
    vt = vx * tx + vy * ty
    ft = k_visc * abs(vt)
    cap = mu * fn
    if ft > cap:
        ft = cap
    if vt > 0.0:
        ft = -ft
    elif vt == 0.0:
        ft = 0.0
    return fn * nx + ft * tx, fn * ny + ft * ty


def _sticky_contact_force(nx, ny, depth, mu, vx, vy, kn, dn, k_visc, k_stick, slip, dt):
    """Like :func:`_contact_force` plus a tangential spring on the accumulated slip.

    ``slip`` is the tangential displacement since the contact formed.  The
    spring is reset whenever the combined tangential force would leave the
    friction cone, so ``|f_t| <= mu * f_n`` still holds.  Returns
    ``(fx, fy, new_slip)``.
    """
    if depth <= 0.0:
        return 0.0, 0.0, 0.0
    vn = vx * nx + vy * ny
    fn = kn * depth - dn * vn
    if fn <= 0.0:
        return 0.0, 0.0, 0.0
    tx, ty = -ny, nx
    vt = vx * tx + vy * ty
    cap = mu * fn
    slip += vt * dt
    if k_stick * abs(slip) > cap:
        slip = math.copysign(cap / k_stick, slip)
    ft = -k_stick * slip - k_visc * vt
    if ft > cap:
        ft = cap
    elif ft < -cap:
        ft = -cap
    return fn * nx + ft * tx, fn * ny + ft * ty, slip


# --- collision primitives -------------------------------------------------
#
# Every routine returns a list of (point, normal, depth) with the normal
# pointing from the first argument into the second.


def _closest_on_segment(px, py, ax, ay, bx, by):
    ex, ey = bx - ax, by - ay
    ee = ex * ex + ey * ey
    if ee <= 0.0:
        return ax, ay, 0.0
    t = ((px - ax) * ex + (py - ay) * ey) / ee
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return ax + t * ex, ay + t * ey, t


def _edge_normals(verts):
    out = []
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        le = math.hypot(ex, ey)
        out.append((ey / le, -ex / le))
    return out


def _point_polygon(px, py, verts, normals):
    """Signed distance query against a convex polygon.

    Returns ``(inside, qx, qy, dist, nx, ny)``: for an outside point ``q`` is
    the closest boundary point and ``dist`` its distance; for an inside point
    ``dist`` is the penetration depth and ``n`` the outward normal of the
    nearest edge.
    """
    n = len(verts)
    best_s = -math.inf
    best_i = 0
    for i in range(n):
        vx, vy = verts[i]
        nx, ny = normals[i]
        s = (px - vx) * nx + (py - vy) * ny
        if s > best_s:
            best_s, best_i = s, i
    if best_s <= 0.0:
        nx, ny = normals[best_i]
        return True, px - best_s * nx, py - best_s * ny, -best_s, nx, ny
    best_d2 = math.inf
    qx = qy = 0.0
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        cx, cy, _ = _closest_on_segment(px, py, ax, ay, bx, by)
        d2 = (px - cx) ** 2 + (py - cy) ** 2
        if d2 < best_d2:
            best_d2, qx, qy = d2, cx, cy
    d = math.sqrt(best_d2)
    return False, qx, qy, d, (qx - px) / d if d > 0 else 0.0, (qy - py) / d if d > 0 else 0.0


def capsule_vs_polygon(a, b, r, verts, normals=None):
    """Capsule (segment ``a``-``b`` of radius ``r``) against a convex polygon."""
    if normals is None:
        normals = _edge_normals(verts)
    out = []
    ends = (a,) if a == b else (a, b)
    for px, py in ends:
        inside, qx, qy, d, nx, ny = _point_polygon(px, py, verts, normals)
        if inside:
            out.append(((px, py), (-nx, -ny), r + d))
        elif d < r and d > 0.0:
            # nx, ny already points from p to the polygon
            h = 0.5 * (r - d)
            out.append(((qx + h * nx, qy + h * ny), (nx, ny), r - d))
    if a != b:
        ax, ay = a
        bx, by = b
        for vx, vy in verts:
            sx, sy, t = _closest_on_segment(vx, vy, ax, ay, bx, by)
            if t <= 0.0 or t >= 1.0:
                continue
            dx, dy = vx - sx, vy - sy
            d = math.hypot(dx, dy)
            if 0.0 < d < r:
                nx, ny = dx / d, dy / d
                h = 0.5 * (r - d)
                out.append(((vx + h * nx, vy + h * ny), (nx, ny), r - d))
    return out


def capsule_vs_circle(a, b, r, c, radius):
    sx, sy, _ = _closest_on_segment(c[0], c[1], a[0], a[1], b[0], b[1])
    dx, dy = c[0] - sx, c[1] - sy
    d = math.hypot(dx, dy)
    depth = r + radius - d
    if depth <= 0.0 or d <= 0.0:
        return []
    nx, ny = dx / d, dy / d
    h = r - 0.5 * depth
    return [((sx + h * nx, sy + h * ny), (nx, ny), depth)]


def _max_separation(verts_a, normals_a, verts_b):
    """Best face of A: ``(separation, index)``; negative separation is overlap."""
    best, best_i = -math.inf, 0
    for i, ((ax, ay), (nx, ny)) in enumerate(zip(verts_a, normals_a)):
        s = min((bx - ax) * nx + (by - ay) * ny for bx, by in verts_b)
        if s > best:
            best, best_i = s, i
    return best, best_i


def polygon_vs_polygon(verts_a, verts_b, normals_a=None, normals_b=None):
    """Contacts between two convex polygons (normal A -> B).

    Separating-axis test: the face with the least overlap becomes the
    reference face, the most anti-parallel edge of the other polygon is
    clipped to it, and every clipped point below the face is a contact.
    Picking one axis per pair keeps corner-over-corner sliding from
    flipping normals vertex by vertex.
    """
    if normals_a is None:
        normals_a = _edge_normals(verts_a)
    if normals_b is None:
        normals_b = _edge_normals(verts_b)
    sa, ia = _max_separation(verts_a, normals_a, verts_b)
    if sa > 0.0:
        return []
    sb, ib = _max_separation(verts_b, normals_b, verts_a)
    if sb > 0.0:
        return []
    # small bias keeps the choice stable when both overlaps are equal
    if sb > sa + 1e-12:
        ref_v, ref_n, inc_v, inc_n, ri, flip = verts_b, normals_b, verts_a, normals_a, ib, True
    else:
        ref_v, ref_n, inc_v, inc_n, ri, flip = verts_a, normals_a, verts_b, normals_b, ia, False
    nx, ny = ref_n[ri]
    r0 = ref_v[ri]
    r1 = ref_v[(ri + 1) % len(ref_v)]
    k = min(range(len(inc_n)), key=lambda j: inc_n[j][0] * nx + inc_n[j][1] * ny)
    pts = [inc_v[k], inc_v[(k + 1) % len(inc_v)]]
    tx, ty = r1[0] - r0[0], r1[1] - r0[1]
    length = math.hypot(tx, ty)
    tx, ty = tx / length, ty / length
    # clip the incident edge to the reference face's extent
    for lo_side, offset in ((1.0, 0.0), (-1.0, length)):
        out = []
        d = [lo_side * ((px - r0[0]) * tx + (py - r0[1]) * ty) - (0.0 if lo_side > 0 else -offset)
             for px, py in pts]
        for (p, dp), (q, dq) in ((pts[0], d[0]), (pts[1], d[1])), ((pts[1], d[1]), (pts[0], d[0])):
            if dp >= 0.0:
                out.append(p)
            if (dp < 0.0) != (dq < 0.0) and dp != dq:
                u = dp / (dp - dq)
                out.append((p[0] + u * (q[0] - p[0]), p[1] + u * (q[1] - p[1])))
        # a segment clipped by a half plane has at most two distinct ends
        pts = list(dict.fromkeys(out))[:2]
        if not pts:
            return []
        if len(pts) == 1:
            pts = [pts[0], pts[0]]
    res = []
    for px, py in dict.fromkeys(pts):
        depth = -((px - r0[0]) * nx + (py - r0[1]) * ny)
        if depth > 0.0:
            res.append(((px, py), (-nx, -ny) if flip else (nx, ny), depth))
    return res


@dataclass
class Capsule:
    """Segment with radius; a circle when ``a == b``."""

    a: tuple
    b: tuple
    r: float
    tag: str = ""
    mu: float = 1.0


@dataclass
class Polygon:
    vertices: list
    tag: str = ""
    mu: float = 0.5
    normals: list = field(default=None, repr=False)
    # optional per-surface penalty parameters (world defaults when None)
    kn: float | None = None
    dn: float | None = None

    def __post_init__(self):
        self.vertices = [tuple(map(float, v)) for v in self.vertices]
        if self.normals is None:
            self.normals = _edge_normals(self.vertices)

    @property
    def bound(self):
        cx = sum(v[0] for v in self.vertices) / len(self.vertices)
        cy = sum(v[1] for v in self.vertices) / len(self.vertices)
        return cx, cy, max(math.hypot(v[0] - cx, v[1] - cy) for v in self.vertices)


def collide(prim, obj: RigidObject, obj_verts=None, obj_normals=None):
    """Contacts between one hand/environment primitive and the object.

    Normals point into the object.
    """
    px, py = obj.position
    rad = obj.radius
    if isinstance(prim, Capsule):
        # bounding-circle reject
        sx, sy, _ = _closest_on_segment(px, py, prim.a[0], prim.a[1], prim.b[0], prim.b[1])
        if math.hypot(px - sx, py - sy) > rad + prim.r:
            return []
        if obj.kind is ShapeKind.DISK:
            return capsule_vs_circle(prim.a, prim.b, prim.r, obj.position, obj.radius)
        if obj_verts is None:
            obj_verts = obj.world_vertices()
        return capsule_vs_polygon(prim.a, prim.b, prim.r, obj_verts, obj_normals)
    cx, cy, br = prim.bound
    if math.hypot(px - cx, py - cy) > rad + br:
        return []
    if obj.kind is ShapeKind.DISK:
        raw = capsule_vs_polygon(obj.position, obj.position, obj.radius, prim.vertices, prim.normals)
        return [(p, (-n[0], -n[1]), d) for p, n, d in raw]
    if obj_verts is None:
        obj_verts = obj.world_vertices()
    return polygon_vs_polygon(prim.vertices, obj_verts, prim.normals, obj_normals)


def detect_contacts(primitives, obj: RigidObject):
    """Closest-point contacts between hand/environment primitives and ``obj``.

    ``primitives`` are :class:`Capsule` (fingertip disks, link capsules) and
    :class:`Polygon` (palm, table) instances in world coordinates.  Returns a
    list of :class:`ContactPoint` whose normals point into the object and
    whose ``tag`` names the touching primitive.
    """
    verts = normals = None
    if obj.kind is ShapeKind.POLYGON:
        verts = obj.world_vertices()
        normals = _edge_normals(verts)
    out = []
    for prim in primitives:
        for p, n, d in collide(prim, obj, verts, normals):
            out.append(ContactPoint(p, n, min(prim.mu, obj.mu), d, prim.tag))
    return out


def contact_wrench_on_object(contacts, forces, about=(0.0, 0.0)) -> PlanarWrench:
    w = PlanarWrench()
    for c, f in zip(contacts, forces):
        w = w + PlanarWrench.from_force((c.position[0] - about[0], c.position[1] - about[1]), f)
    return w
