"""Fixed-step simulation of the two-finger hand, its motors and one object.

Every inner step runs the four FOC current loops, maps shaft torques to the
joints, resolves penalty contacts and advances fingers and object with
semi-implicit Euler.  Every ``ratio``-th step first runs the outer impedance
loop on encoder-quantised joint readings and holds its motor torque
commands until the next outer tick.

Hand frame: palm top face on ``y = 0``, fingers extending toward ``+y``.
Finger 0 sits at ``(+s/2, 0)`` in its own unmirrored frame; finger 1 sits at
``(-s/2, 0)`` with its local ``x`` axis mirrored, so a positive elbow angle
curls both fingertips toward the middle.  The hand frame moves in the world
along a prescribed base trajectory with a constant rotation; finger
dynamics are written in the hand frame and ignore base acceleration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import contact as ct
from .contact import Polygon, RigidObject, ShapeKind
from .foc import EncoderModel, Motor, MotorParams, encoder_read
from .impedance import (ControlSchedule, GainSchedule, OverridePolicy, Space, VelocityEstimator,
                        _cartesian_core)
from .transmission import FingerGeometry, JointState, TransmissionParams


class SimulationError(RuntimeError):
    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass
class FingerPlant:
    """Planar 2R finger with uniform-rod links and reflected rotor inertia."""

    geometry: FingerGeometry = field(default_factory=FingerGeometry)
    m1: float = 0.03
    m2: float = 0.02
    lc1: float | None = None
    lc2: float | None = None
    joint_damping: float = 1e-4
    limit_stiffness: float = 50.0
    transmission: TransmissionParams = field(default_factory=TransmissionParams)
    rotor_inertia: float = 2e-6
    motor_friction: float = 1e-5
    theta: tuple = (0.85, 1.70)
    theta_dot: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not (self.m1 > 0 and self.m2 > 0):
            raise ValueError("link masses must be positive")
        if self.rotor_inertia < 0 or self.motor_friction < 0 or self.joint_damping < 0:
            raise ValueError("inertia and damping terms must be >= 0")
        g = self.geometry
        if self.lc1 is None:
            self.lc1 = 0.5 * g.l1
        if self.lc2 is None:
            self.lc2 = 0.5 * g.l2
        self.theta = tuple(map(float, self.theta))
        self.theta_dot = tuple(map(float, self.theta_dot))
        tr = self.transmission
        # motor-side terms seen at the joints: T^-1 X A^-1
        P = tr.inverse_torque_matrix() @ tr.inverse_angle_matrix()
        self.reflected_inertia = self.rotor_inertia * P
        self.reflected_friction = self.motor_friction * P
        I1 = self.m1 * g.l1 ** 2 / 12.0
        I2 = self.m2 * g.l2 ** 2 / 12.0
        a2 = I2 + self.m2 * self.lc2 ** 2
        a1 = I1 + self.m1 * self.lc1 ** 2 + I2 + self.m2 * (g.l1 ** 2 + self.lc2 ** 2)
        b = self.m2 * g.l1 * self.lc2
        R, D = self.reflected_inertia, self.reflected_friction
        d = self.joint_damping
        self._k = (a1, a2, b, R[0, 0], R[0, 1], R[1, 0], R[1, 1],
                   D[0, 0] + d, D[0, 1], D[1, 0], D[1, 1] + d,
                   g.theta1_limits[0], g.theta1_limits[1],
                   g.theta2_limits[0], g.theta2_limits[1], self.limit_stiffness)

    @property
    def state(self) -> JointState:
        return JointState.from_joint(self.theta, self.theta_dot, self.transmission)

    def link_mass_matrix(self, theta=None) -> np.ndarray:
        a1, a2, b = self._k[:3]
        c2 = math.cos((self.theta if theta is None else theta)[1])
        return np.array([[a1 + 2 * b * c2, a2 + b * c2], [a2 + b * c2, a2]])

    def mass_matrix(self, theta=None) -> np.ndarray:
        return self.link_mass_matrix(theta) + self.reflected_inertia

    def coriolis(self, theta=None, theta_dot=None) -> np.ndarray:
        """Velocity-product torques ``C(theta, theta_dot) @ theta_dot``."""
        theta = self.theta if theta is None else theta
        w1, w2 = self.theta_dot if theta_dot is None else theta_dot
        h = self._k[2] * math.sin(theta[1])
        return np.array([-h * (2 * w1 * w2 + w2 * w2), h * w1 * w1])

    def kinetic_energy(self) -> float:
        w = np.asarray(self.theta_dot)
        return 0.5 * float(w @ self.mass_matrix() @ w)

    def limit_torque(self, theta=None) -> np.ndarray:
        theta = self.theta if theta is None else theta
        k = self._k
        return np.array([_limit(theta[0], k[11], k[12], k[15]), _limit(theta[1], k[13], k[14], k[15])])


def _limit(x, lo, hi, k):
    if x < lo:
        return k * (lo - x)
    if x > hi:
        return k * (hi - x)
    return 0.0


def _joint_accel(k, t1, t2, w1, w2, tau1, tau2):
    a1, a2, b, r11, r12, r21, r22, d11, d12, d21, d22, lo1, hi1, lo2, hi2, kl = k
    c2 = math.cos(t2)
    h = b * math.sin(t2)
    M11 = a1 + 2.0 * b * c2 + r11
    M12 = a2 + b * c2 + r12
    M21 = a2 + b * c2 + r21
    M22 = a2 + r22
    f1 = tau1 + h * (2.0 * w1 * w2 + w2 * w2) - d11 * w1 - d12 * w2
    f2 = tau2 - h * w1 * w1 - d21 * w1 - d22 * w2
    if t1 < lo1:
        f1 += kl * (lo1 - t1)
    elif t1 > hi1:
        f1 += kl * (hi1 - t1)
    if t2 < lo2:
        f2 += kl * (lo2 - t2)
    elif t2 > hi2:
        f2 += kl * (hi2 - t2)
    det = M11 * M22 - M12 * M21
    assert det > 0.0, "finger mass matrix is singular"
    return (M22 * f1 - M12 * f2) / det, (M11 * f2 - M21 * f1) / det


def finger_dynamics(plant: FingerPlant, tau, external: Sequence = ()) -> np.ndarray:
    """Joint accelerations under applied joint torques and external forces.

    ``external`` holds ``(link, point, force)`` triples in the finger's own
    frame, where ``link`` is 1 or 2 and ``point`` lies on that link.
    """
    t1, t2 = plant.theta
    w1, w2 = plant.theta_dot
    tau1, tau2 = float(tau[0]), float(tau[1])
    ex = plant.geometry.l1 * math.cos(t1)
    ey = plant.geometry.l1 * math.sin(t1)
    for link, (px, py), (fx, fy) in external:
        tau1 += px * fy - py * fx
        if link == 2:
            tau2 += (px - ex) * fy - (py - ey) * fx
        elif link != 1:
            raise ValueError(f"link must be 1 or 2, got {link}")
    return np.array(_joint_accel(plant._k, t1, t2, w1, w2, tau1, tau2))


@dataclass(frozen=True)
class HandGeometry:
    finger_spacing: float = 0.08
    palm_width: float = 0.06
    palm_thickness: float = 0.02
    tip_radius: float = 0.008
    link_radius: float = 0.006
    finger_mu: float = 1.0
    palm_mu: float = 0.5

    def base(self, i: int):
        return (0.5 * self.finger_spacing if i == 0 else -0.5 * self.finger_spacing, 0.0)

    @staticmethod
    def mirror(i: int) -> float:
        return 1.0 if i == 0 else -1.0

    def finger_to_hand(self, i, p):
        bx, by = self.base(i)
        return (bx + self.mirror(i) * p[0], by + p[1])

    def hand_to_finger(self, i, p):
        bx, by = self.base(i)
        return (self.mirror(i) * (p[0] - bx), p[1] - by)

    def palm_vertices(self):
        w, h = 0.5 * self.palm_width, self.palm_thickness
        return [(-w, -h), (w, -h), (w, 0.0), (-w, 0.0)]


class BaseMotion:
    """Stationary hand base; subclasses supply a position trajectory."""

    def __init__(self, position=(0.0, 0.0), rotation: float = 0.0):
        self.position = (float(position[0]), float(position[1]))
        self.rotation = float(rotation)

    def pose(self, t):
        """``(x, y, vx, vy)`` of the hand origin at time ``t``."""
        return self.position[0], self.position[1], 0.0, 0.0


class CosineDip(BaseMotion):
    """Move ``depth`` along ``direction`` and straight back, as one cosine cycle.

    The rate peaks at ``peak_speed`` midway down and midway up, and is zero
    only at the turnaround instant, so the base never dwells at the bottom.
    """

    def __init__(self, position=(0.0, 0.0), rotation=0.0, depth=0.05, peak_speed=0.5,
                 start=0.0, direction=(0.0, -1.0)):
        super().__init__(position, rotation)
        if not (depth > 0 and peak_speed > 0):
            raise ValueError("dip depth and speed must be positive")
        self.depth, self.start = float(depth), float(start)
        self.period = 2.0 * math.pi * depth / (2.0 * peak_speed)
        n = math.hypot(*direction)
        self.direction = (direction[0] / n, direction[1] / n)

    def pose(self, t):
        s = t - self.start
        if s <= 0.0 or s >= self.period:
            return self.position[0], self.position[1], 0.0, 0.0
        w = 2.0 * math.pi / self.period
        d = 0.5 * self.depth * (1.0 - math.cos(w * s))
        v = 0.5 * self.depth * w * math.sin(w * s)
        ux, uy = self.direction
        return self.position[0] + d * ux, self.position[1] + d * uy, v * ux, v * uy


class PiecewiseLinearMotion(BaseMotion):
    def __init__(self, waypoints, rotation=0.0):
        pts = [(float(t), float(x), float(y)) for t, x, y in waypoints]
        if len(pts) < 2 or any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
            raise ValueError("need >= 2 waypoints with increasing times")
        super().__init__(pts[0][1:], rotation)
        self.waypoints = pts

    def pose(self, t):
        pts = self.waypoints
        if t <= pts[0][0]:
            return pts[0][1], pts[0][2], 0.0, 0.0
        for (t0, x0, y0), (t1, x1, y1) in zip(pts, pts[1:]):
            if t < t1:
                a = (t - t0) / (t1 - t0)
                return (x0 + a * (x1 - x0), y0 + a * (y1 - y0),
                        (x1 - x0) / (t1 - t0), (y1 - y0) / (t1 - t0))
        return pts[-1][1], pts[-1][2], 0.0, 0.0


@dataclass(frozen=True)
class Disturbance:
    """Constant external force/torque on the object over ``[start, start + duration)``."""

    start: float
    duration: float
    force: tuple = (0.0, 0.0)
    torque: float = 0.0


@dataclass(frozen=True)
class ContactParams:
    kn: float = 2000.0
    dn: float = 10.0
    k_visc: float = 100.0
    # tangential spring on accumulated slip (N/m); 0 keeps pure viscous stiction
    k_stick: float = 0.0


@dataclass(frozen=True)
class ControllerSetting:
    """Gains handed out by the gain schedule; the set-point comes from the trajectory."""

    space: Space = Space.CARTESIAN
    K: tuple = (100.0, 100.0)
    B: tuple = (2.0, 2.0)
    f_max: float | None = None
    # per-finger set-points that replace the trajectories while active
    targets: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "space", Space(self.space))
        object.__setattr__(self, "K", tuple(map(float, self.K)))
        object.__setattr__(self, "B", tuple(map(float, self.B)))
        if min(self.K) < 0 or min(self.B) < 0:
            raise ValueError("stiffness and damping must be >= 0")
        if self.f_max is not None and not self.f_max > 0:
            raise ValueError("f_max must be positive")


@dataclass
class ContactRecord:
    tag: str
    body: str  # "object" or "env:<tag>"
    position: tuple
    normal: tuple
    force: tuple
    normal_force: float
    mu: float
    penetration: float


class SimWorld:
    """The two-finger hand, its four motors, an optional object and fixed surroundings.

    ``trajectories[i](t)`` returns finger ``i``'s set-point: a hand-frame
    fingertip position for Cartesian control or joint angles for joint
    control.  ``schedule`` hands out :class:`ControllerSetting` payloads; a
    fixed ``setting`` may be given instead.
    """

    def __init__(self, fingers: Sequence[FingerPlant], trajectories: Sequence[Callable],
                 schedule: GainSchedule | None = None, setting: ControllerSetting | None = None,
                 hand: HandGeometry | None = None, obj: RigidObject | None = None,
                 environment: Sequence[Polygon] = (), base_motion: BaseMotion | None = None,
                 disturbances: Sequence[Disturbance] = (), control: ControlSchedule | None = None,
                 override: OverridePolicy | None = None, motor_params: MotorParams | None = None,
                 kp: float = 0.5, ki: float = 300.0, ablate_id: bool = False, i_max: float = 15.0,
                 contact: ContactParams | None = None, gravity=(0.0, -9.81),
                 velocity_cutoff_hz: float = 100.0, encoder: EncoderModel | None = None,
                 seed: int = 0, palm: bool = True, gravity_start: float = 0.0):
        if len(fingers) != 2 or len(trajectories) != 2:
            raise ValueError("the hand has exactly two fingers")
        if schedule is None and setting is None:
            setting = ControllerSetting()
        self.fingers = list(fingers)
        self.trajectories = list(trajectories)
        self.schedule = schedule
        self.setting = setting
        self.hand = hand or HandGeometry()
        self.obj = obj
        self.environment = list(environment)
        self.base_motion = base_motion or BaseMotion()
        self.disturbances = list(disturbances)
        self.control = control or ControlSchedule()
        self.override = override or OverridePolicy()
        self.contact = contact or ContactParams()
        self.gravity = (float(gravity[0]), float(gravity[1]))
        self.gravity_start = float(gravity_start)
        self.palm = palm
        self.seed = int(seed)
        self.encoder = encoder or EncoderModel()
        mp = motor_params or MotorParams()
        self.motor_params = mp
        self.tau_max = mp.kt * i_max
        seeds = np.random.SeedSequence(self.seed).spawn(4)
        self.motors = [Motor(mp, kp, ki, self.encoder, seed=s, ablate_id=ablate_id) for s in seeds]
        self.step_index = 0
        self.time = 0.0
        self.commands = [0.0] * 4
        self._outer_tick = -1
        self.outer_count = 0
        self.outer_info = [None, None]
        self.contacts: list[ContactRecord] = []
        self._slip: dict = {}
        self.object_force = (0.0, 0.0, 0.0)
        self._palm_local = self.hand.palm_vertices()
        self._palm_normals_local = ct._edge_normals(self._palm_local)
        dt_outer = self.control.outer_dt
        self.estimators = []
        self.initial_tips = []
        for i, f in enumerate(self.fingers):
            th = self._measured_theta(i)
            self.estimators.append(VelocityEstimator(dt_outer, velocity_cutoff_hz, th))
            self.initial_tips.append(self._tip_hand(i, th))
        self._sync_motors()

    # --- frames -----------------------------------------------------------

    def base_pose(self, t=None):
        return self.base_motion.pose(self.time if t is None else t)

    def _tip_hand(self, i, theta):
        g = self.fingers[i].geometry
        x = g.l1 * math.cos(theta[0]) + g.l2 * math.cos(theta[0] + theta[1])
        y = g.l1 * math.sin(theta[0]) + g.l2 * math.sin(theta[0] + theta[1])
        return self.hand.finger_to_hand(i, (x, y))

    def _measured_theta(self, i):
        f = self.fingers[i]
        A = f.transmission.angle_matrix()
        tr = f.transmission
        n1, n2 = tr.n1, tr.n2
        t1, t2 = f.theta
        q1 = n1 * t1 + n1 * n2 * t2
        q2 = -n1 * t1 + n1 * n2 * t2
        m1 = encoder_read(q1, self.encoder)
        m2 = encoder_read(q2, self.encoder)
        return (A[0, 0] * m1 + A[0, 1] * m2, A[1, 0] * m1 + A[1, 1] * m2)

    def measured_tip(self, i):
        """Hand-frame fingertip position the controller sees (encoder based)."""
        return self._tip_hand(i, self._measured_theta(i))

    def tip_displacement(self, i):
        x, y = self.measured_tip(i)
        return x - self.initial_tips[i][0], y - self.initial_tips[i][1]

    def true_tip(self, i):
        return self._tip_hand(i, self.fingers[i].theta)

    def _sync_motors(self):
        for i, f in enumerate(self.fingers):
            tr = f.transmission
            n1, n2 = tr.n1, tr.n2
            t1, t2 = f.theta
            w1, w2 = f.theta_dot
            ma, mb = self.motors[2 * i].state, self.motors[2 * i + 1].state
            ma.rotor_angle = n1 * t1 + n1 * n2 * t2
            mb.rotor_angle = -n1 * t1 + n1 * n2 * t2
            ma.rotor_speed = n1 * w1 + n1 * n2 * w2
            mb.rotor_speed = -n1 * w1 + n1 * n2 * w2

    # --- outer loop ---------------------------------------------------------

    def active_settings(self) -> list[ControllerSetting]:
        """Per-finger settings; a payload may be one setting or one per finger."""
        payload = self.setting if self.schedule is None else self.schedule.update(self.time, self)
        if isinstance(payload, ControllerSetting):
            return [payload, payload]
        return list(payload)

    def outer_update(self):
        """Run the impedance loop for the current tick (once per tick)."""
        k = self.step_index
        if self._outer_tick == k:
            return
        settings = self.active_settings()
        t = self.time
        for i, f in enumerate(self.fingers):
            setting = settings[i]
            th = self._measured_theta(i)
            w = self.estimators[i].update(th)
            if setting.targets is not None:
                target = setting.targets[i]
            else:
                target = self.trajectories[i](t)
            g = f.geometry
            override = False
            if setting.space is Space.CARTESIAN:
                d_local = self.hand.hand_to_finger(i, target)
                tau1, tau2 = _cartesian_core(th[0], th[1], w[0], w[1], d_local, setting.K,
                                             setting.B, setting.f_max, g.l1, g.l2)
                if self.override.active(th[1]):
                    tau2 = self.override.tau_star
                    override = True
                desired_hand = (float(target[0]), float(target[1]))
            else:
                K, B = setting.K, setting.B
                tau1 = K[0] * (target[0] - th[0]) - B[0] * w[0]
                tau2 = K[1] * (target[1] - th[1]) - B[1] * w[1]
                desired_hand = self._tip_hand(i, target)
            T = f.transmission.torque_matrix()
            m1 = T[0, 0] * tau1 + T[0, 1] * tau2
            m2 = T[1, 0] * tau1 + T[1, 1] * tau2
            lim = self.tau_max
            m1 = min(max(m1, -lim), lim)
            m2 = min(max(m2, -lim), lim)
            self.commands[2 * i] = m1
            self.commands[2 * i + 1] = m2
            self.outer_info[i] = {
                "tip": self._tip_hand(i, th), "desired": desired_hand, "theta": th,
                "tau": (tau1, tau2), "override": override,
            }
        self._outer_tick = k
        self.outer_count += 1

    # --- inner step ---------------------------------------------------------

    def step(self):
        k = self.step_index
        ctl = self.control
        if k % ctl.ratio == 0:
            self.outer_update()
        dt = ctl.inner_dt
        t = self.time
        bx, by, bvx, bvy = self.base_motion.pose(t)
        rot = self.base_motion.rotation
        c, s = math.cos(rot), math.sin(rot)
        hand = self.hand
        cp = self.contact
        self._sync_motors()

        # motor currents -> joint torques
        tau = []
        for i, f in enumerate(self.fingers):
            ta = self.motors[2 * i].step(self.commands[2 * i], dt)
            tb = self.motors[2 * i + 1].step(self.commands[2 * i + 1], dt)
            Ti = f.transmission.inverse_torque_matrix()
            tau.append([Ti[0, 0] * ta + Ti[0, 1] * tb, Ti[1, 0] * ta + Ti[1, 1] * tb])

        # finger primitives in world coordinates
        prims = []
        for i, f in enumerate(self.fingers):
            g = f.geometry
            sx = hand.mirror(i)
            hx0, hy0 = hand.base(i)
            t1, t2 = f.theta
            ex, ey = g.l1 * math.cos(t1), g.l1 * math.sin(t1)
            ux, uy = math.cos(t1 + t2), math.sin(t1 + t2)
            tx, ty = ex + g.l2 * ux, ey + g.l2 * uy
            cut = max(g.l2 - hand.tip_radius, 0.0)
            kx, ky = ex + cut * ux, ey + cut * uy

            def w(px, py, sx=sx, hx0=hx0, hy0=hy0):
                hx, hy = hx0 + sx * px, hy0 + py
                return bx + c * hx - s * hy, by + s * hx + c * hy

            base_w, elbow_w, knuckle_w, tip_w = w(0.0, 0.0), w(ex, ey), w(kx, ky), w(tx, ty)
            prims.append((i, 1, base_w, elbow_w, hand.link_radius, f"f{i}_link1"))
            if cut > 0.0:
                prims.append((i, 2, elbow_w, knuckle_w, hand.link_radius, f"f{i}_link2"))
            prims.append((i, 2, tip_w, tip_w, hand.tip_radius, f"f{i}_tip"))
        frames = [(hand.mirror(i), hand.base(i), f) for i, f in enumerate(self.fingers)]

        def finger_point_velocity(i, link, px, py):
            sx, (hx0, hy0), f = frames[i]
            # world -> finger-local point
            rx, ry = px - bx, py - by
            hx, hy = c * rx + s * ry, -s * rx + c * ry
            lx, ly = sx * (hx - hx0), hy - hy0
            w1, w2 = f.theta_dot
            vx, vy = -w1 * ly, w1 * lx
            if link == 2:
                t1 = f.theta[0]
                ex, ey = f.geometry.l1 * math.cos(t1), f.geometry.l1 * math.sin(t1)
                vx -= w2 * (ly - ey)
                vy += w2 * (lx - ex)
            vx *= sx
            return bvx + c * vx - s * vy, bvy + s * vx + c * vy, lx, ly

        def apply_to_finger(i, link, lx, ly, fx, fy):
            # world force -> finger-local force
            sx, _, f = frames[i]
            hfx, hfy = c * fx + s * fy, -s * fx + c * fy
            lfx, lfy = sx * hfx, hfy
            tau[i][0] += lx * lfy - ly * lfx
            if link == 2:
                t1 = f.theta[0]
                ex, ey = f.geometry.l1 * math.cos(t1), f.geometry.l1 * math.sin(t1)
                tau[i][1] += (lx - ex) * lfy - (ly - ey) * lfx

        contacts = []
        Fx = Fy = Tz = 0.0
        obj = self.obj
        kn, dn, kv = cp.kn, cp.dn, cp.k_visc
        k_stick = cp.k_stick
        old_slip = self._slip
        new_slip = {}

        def penalty(key, nx, ny, d, mu, vx, vy, kn_, dn_):
            if k_stick <= 0.0:
                return ct._contact_force(nx, ny, d, mu, vx, vy, kn_, dn_, kv)
            fx, fy, s_ = ct._sticky_contact_force(nx, ny, d, mu, vx, vy, kn_, dn_, kv, k_stick,
                                                  old_slip.get(key, 0.0), dt)
            new_slip[key] = s_
            return fx, fy

        # fingers against fixed surroundings
        for poly in self.environment:
            pcx, pcy, prad = poly.bound
            pkn = poly.kn if poly.kn is not None else kn
            pdn = poly.dn if poly.dn is not None else dn
            mu = min(poly.mu, hand.finger_mu)
            for i, link, a, b, r, tag in prims:
                qx, qy, _ = ct._closest_on_segment(pcx, pcy, a[0], a[1], b[0], b[1])
                if math.hypot(qx - pcx, qy - pcy) > prad + r:
                    continue
                hits = ct.capsule_vs_polygon(a, b, r, poly.vertices, poly.normals)
                for n_, ((px, py), (nx, ny), d) in enumerate(hits):
                    vfx, vfy, lx, ly = finger_point_velocity(i, link, px, py)
                    fx, fy = penalty((tag, poly.tag, n_), nx, ny, d, mu, -vfx, -vfy, pkn, pdn)
                    apply_to_finger(i, link, lx, ly, -fx, -fy)
                    contacts.append(ContactRecord(tag, "env:" + poly.tag, (px, py), (nx, ny),
                                                  (-fx, -fy), fx * nx + fy * ny, mu, d))

        if obj is not None:
            ox, oy = obj.position
            ovx, ovy = obj.velocity
            ow = obj.angular_velocity
            verts = normals = None
            if obj.kind is ShapeKind.POLYGON:
                verts = obj.world_vertices()
                normals = ct._edge_normals(verts)

            def add_object_force(px, py, fx, fy):
                nonlocal Fx, Fy, Tz
                Fx += fx
                Fy += fy
                Tz += (px - ox) * fy - (py - oy) * fx

            # fingers against the object
            for i, link, a, b, r, tag in prims:
                cap = ct.Capsule(a, b, r, tag, hand.finger_mu)
                mu = min(hand.finger_mu, obj.mu)
                for n_, ((px, py), (nx, ny), d) in enumerate(ct.collide(cap, obj, verts, normals)):
                    vfx, vfy, lx, ly = finger_point_velocity(i, link, px, py)
                    vox, voy = ovx - ow * (py - oy), ovy + ow * (px - ox)
                    fx, fy = penalty((tag, "object", n_), nx, ny, d, mu, vox - vfx, voy - vfy, kn, dn)
                    add_object_force(px, py, fx, fy)
                    apply_to_finger(i, link, lx, ly, -fx, -fy)
                    contacts.append(ContactRecord(tag, "object", (px, py), (nx, ny), (fx, fy),
                                                  fx * nx + fy * ny, mu, d))

            # palm and surroundings against the object
            surfaces = []
            if self.palm:
                pv = [(bx + c * x - s * y, by + s * x + c * y) for x, y in self._palm_local]
                pn = [(c * x - s * y, s * x + c * y) for x, y in self._palm_normals_local]
                surfaces.append((Polygon(pv, "palm", hand.palm_mu, pn), (bvx, bvy)))
            surfaces.extend((p, (0.0, 0.0)) for p in self.environment)
            for poly, (svx, svy) in surfaces:
                pkn = poly.kn if poly.kn is not None else kn
                pdn = poly.dn if poly.dn is not None else dn
                mu = min(poly.mu, obj.mu)
                for n_, ((px, py), (nx, ny), d) in enumerate(ct.collide(poly, obj, verts, normals)):
                    vox, voy = ovx - ow * (py - oy), ovy + ow * (px - ox)
                    fx, fy = penalty((poly.tag, "object", n_), nx, ny, d, mu, vox - svx, voy - svy,
                                     pkn, pdn)
                    add_object_force(px, py, fx, fy)
                    contacts.append(ContactRecord(poly.tag, "object", (px, py), (nx, ny), (fx, fy),
                                                  fx * nx + fy * ny, mu, d))
        self.contacts = contacts
        self._slip = new_slip
        self.object_force = (Fx, Fy, Tz)

        # integrate fingers
        for i, f in enumerate(self.fingers):
            t1, t2 = f.theta
            w1, w2 = f.theta_dot
            a1, a2 = _joint_accel(f._k, t1, t2, w1, w2, tau[i][0], tau[i][1])
            w1 += a1 * dt
            w2 += a2 * dt
            f.theta_dot = (w1, w2)
            f.theta = (t1 + w1 * dt, t2 + w2 * dt)

        # integrate object
        if obj is not None:
            ex_f = [0.0, 0.0, 0.0]
            for dist in self.disturbances:
                if dist.start <= t < dist.start + dist.duration:
                    ex_f[0] += dist.force[0]
                    ex_f[1] += dist.force[1]
                    ex_f[2] += dist.torque
            m = obj.mass
            gx, gy = self.gravity if t >= self.gravity_start else (0.0, 0.0)
            vx = ovx + ((Fx + ex_f[0]) / m + gx) * dt
            vy = ovy + ((Fy + ex_f[1]) / m + gy) * dt
            w = ow + (Tz + ex_f[2]) / obj.inertia * dt
            obj.velocity = (vx, vy)
            obj.angular_velocity = w
            obj.position = (ox + vx * dt, oy + vy * dt)
            obj.orientation = obj.orientation + w * dt

        self.step_index = k + 1
        self.time = self.step_index * dt
        self._check_finite()

    def _check_finite(self):
        vals = []
        for f in self.fingers:
            vals.extend(f.theta)
            vals.extend(f.theta_dot)
        if self.obj is not None:
            vals.extend(self.obj.position)
            vals.extend(self.obj.velocity)
            vals.append(self.obj.angular_velocity)
        if not all(math.isfinite(v) for v in vals):
            raise SimulationError(self.step_index, f"non-finite state at t={self.time:.6g}: {vals}")

    # --- contact summaries ---------------------------------------------------

    def tip_object_force(self, i):
        """Total force the object exerts on fingertip ``i`` and its normal part."""
        tag = f"f{i}_tip"
        fx = fy = fn = 0.0
        for cr in self.contacts:
            if cr.tag == tag and cr.body == "object":
                fx -= cr.force[0]
                fy -= cr.force[1]
                fn += cr.normal_force
        return fx, fy, fn

    def env_force_on_finger(self, i):
        fn = 0.0
        prefix = f"f{i}_"
        for cr in self.contacts:
            if cr.body.startswith("env:") and cr.tag.startswith(prefix):
                fn += cr.normal_force
        return fn

    def object_contacts(self):
        """Object contacts of the last step as :class:`ContactPoint` values."""
        return [ct.ContactPoint(cr.position, cr.normal, cr.mu, cr.penetration, cr.tag)
                for cr in self.contacts if cr.body == "object"]


# --- recording ----------------------------------------------------------------

FINGER_COLUMNS = ("x_m", "y_m", "xd_m", "yd_m", "theta1_rad", "theta2_rad",
                  "tau1_Nm", "tau2_Nm", "override_active")
MOTOR_COLUMNS = ("theta_rad", "omega_rad_s", "iq_A", "id_A", "uq_V", "ud_V", "tau_Nm")
EXTRA_FINGER_COLUMNS = ("tip_fx_N", "tip_fy_N", "tip_fn_N", "env_fn_N", "true_x_m", "true_y_m")
OBJECT_COLUMNS = ("obj_x_m", "obj_y_m", "obj_phi_rad", "obj_vx_m_s", "obj_vy_m_s")


class TraceRecorder:
    """Samples the world at every outer tick into one wide table."""

    def __init__(self, world: SimWorld):
        cols = ["t_s"]
        for i in range(2):
            cols += [f"f{i}_{c}" for c in FINGER_COLUMNS + EXTRA_FINGER_COLUMNS]
        for j in range(4):
            cols += [f"m{j}_{c}" for c in MOTOR_COLUMNS]
        cols += ["base_x_m", "base_y_m", "schedule_event"]
        if world.obj is not None:
            cols += list(OBJECT_COLUMNS)
        self.columns = cols
        self.rows: list[tuple] = []

    def record(self, world: SimWorld):
        row = [world.time]
        for i in range(2):
            info = world.outer_info[i]
            tx, ty, fn = world.tip_object_force(i)
            true = world.true_tip(i)
            row += [info["tip"][0], info["tip"][1], info["desired"][0], info["desired"][1],
                    info["theta"][0], info["theta"][1], info["tau"][0], info["tau"][1],
                    1.0 if info["override"] else 0.0, tx, ty, fn, world.env_force_on_finger(i),
                    true[0], true[1]]
        for m in world.motors:
            s = m.state
            row += [s.rotor_angle, s.rotor_speed, s.i_q_meas, s.i_d_meas, s.u_q, s.u_d, m.tau]
        bx, by, _, _ = world.base_pose()
        ev = -1.0
        if world.schedule is not None and world.schedule.active_event is not None:
            ev = float(world.schedule.events.index(world.schedule.active_event))
        row += [bx, by, ev]
        if world.obj is not None:
            o = world.obj
            row += [o.position[0], o.position[1], o.orientation, o.velocity[0], o.velocity[1]]
        self.rows.append(tuple(float(v) for v in row))


@dataclass
class Trace:
    columns: list
    rows: list

    def column(self, name) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    def __len__(self):
        return len(self.rows)

    def write_csv(self, path, columns=None, rename=None):
        """Write all (or the selected) columns; floats round-trip exactly."""
        cols = list(self.columns if columns is None else columns)
        idx = [self.columns.index(c) for c in cols]
        header = cols if rename is None else [rename.get(c, c) for c in cols]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in self.rows:
                w.writerow([repr(r[j]) for j in idx])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            cols = next(rd)
            rows = [tuple(float(v) for v in r) for r in rd]
        return cls(cols, rows)


@dataclass
class RunResult:
    trace: Trace
    summary: dict
    world: SimWorld


def tracking_errors(trace: Trace, finger: int = 0) -> np.ndarray:
    x = trace.column(f"f{finger}_x_m")
    y = trace.column(f"f{finger}_y_m")
    xd = trace.column(f"f{finger}_xd_m")
    yd = trace.column(f"f{finger}_yd_m")
    return np.hypot(x - xd, y - yd)


def summarize(trace: Trace, transient: float = 0.0, events=()) -> dict:
    """Metrics recomputable from the trace alone."""
    t = trace.column("t_s")
    sel = t >= transient - 1e-12
    out = {"rows": len(trace), "transient_s": transient}
    for i in range(2):
        e = tracking_errors(trace, i)[sel]
        out[f"f{i}_rms_error_m"] = float(math.sqrt(np.mean(e ** 2))) if e.size else 0.0
        out[f"f{i}_max_error_m"] = float(e.max()) if e.size else 0.0
        fx, fy = trace.column(f"f{i}_tip_fx_N"), trace.column(f"f{i}_tip_fy_N")
        out[f"f{i}_max_tip_force_N"] = float(np.hypot(fx, fy).max())
    out["rms_error_m"] = out["f0_rms_error_m"]
    out["max_tip_force_N"] = max(out["f0_max_tip_force_N"], out["f1_max_tip_force_N"])
    out["max_abs_iq_A"] = float(max(np.abs(trace.column(f"m{j}_iq_A")).max() for j in range(4)))
    out["events"] = {label: ts for label, ts in events}
    return out


def run(world: SimWorld, duration: float, recorders=None, transient: float = 0.0) -> RunResult:
    """Advance ``ceil(duration / inner_dt)`` steps, sampling at every outer tick."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    dt = world.control.inner_dt
    ratio = world.control.ratio
    n = int(math.ceil(duration / dt - 1e-9))
    main = TraceRecorder(world)
    recs = [main] + list(recorders or [])

    def sample():
        world.outer_update()
        for r in recs:
            r.record(world)

    for _ in range(n):
        if world.step_index % ratio == 0:
            sample()
        try:
            world.step()
        except SimulationError:
            raise
        except (ValueError, FloatingPointError, ArithmeticError) as exc:
            raise SimulationError(world.step_index, str(exc)) from exc
    if world.step_index % ratio == 0:
        sample()
    trace = Trace(main.columns, main.rows)
    events = world.schedule.fired() if world.schedule is not None else []
    return RunResult(trace, summarize(trace, transient, events), world)
