"""Outer-loop impedance controllers, the theta2 override and gain scheduling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .transmission import FingerGeometry, JointState, TransmissionParams


class Space(str, enum.Enum):
    CARTESIAN = "Cartesian"
    JOINT = "Joint"


@dataclass
class ImpedanceParams:
    """Desired pose with diagonal stiffness and damping.

    ``desired`` is a fingertip position (m) in Cartesian space or joint
    angles (rad) in joint space.  ``K`` and ``B`` hold the diagonals.
    ``f_max`` optionally caps ``|K (x_d - x)|`` per axis (Cartesian only).
    """

    space: Space = Space.CARTESIAN
    desired: tuple = (0.0, 0.06)
    K: tuple = (100.0, 100.0)
    B: tuple = (2.0, 2.0)
    f_max: float | None = None

    def __post_init__(self):
        self.space = Space(self.space)
        self.desired = tuple(float(v) for v in self.desired)
        self.K = tuple(float(v) for v in self.K)
        self.B = tuple(float(v) for v in self.B)
        if len(self.K) != 2 or len(self.B) != 2 or len(self.desired) != 2:
            raise ValueError("desired, K and B must have two entries")
        if min(self.K) < 0 or min(self.B) < 0:
            raise ValueError("stiffness and damping must be non-negative")
        if self.f_max is not None and not self.f_max > 0:
            raise ValueError("f_max must be positive")


@dataclass(frozen=True)
class OverridePolicy:
    theta2_threshold: float = 0.05
    tau_star: float = 0.1
    enabled: bool = True

    def __post_init__(self):
        if self.enabled and not self.tau_star > 0:
            raise ValueError("tau_star must be positive when the override is enabled")

    def active(self, theta2: float) -> bool:
        return self.enabled and theta2 < self.theta2_threshold


@dataclass(frozen=True)
class ControlSchedule:
    inner_dt: float = 1e-4
    ratio: int = 5

    def __post_init__(self):
        if not self.inner_dt > 0:
            raise ValueError("inner_dt must be positive")
        if int(self.ratio) != self.ratio or self.ratio < 1:
            raise ValueError("ratio must be a positive integer")

    @property
    def outer_dt(self) -> float:
        return self.inner_dt * self.ratio


def cartesian_impedance_torque(joint_state: JointState, params: ImpedanceParams,
                               geom: FingerGeometry, policy: OverridePolicy | None = None):
    """Joint torques ``J^T (K (x_d - x) - B xdot)`` with the theta2 override."""
    if params.space is not Space.CARTESIAN:
        raise ValueError("cartesian_impedance_torque needs Cartesian params")
    t1, t2 = float(joint_state.theta[0]), float(joint_state.theta[1])
    w1, w2 = float(joint_state.theta_dot[0]), float(joint_state.theta_dot[1])
    tau1, tau2 = _cartesian_core(t1, t2, w1, w2, params.desired, params.K, params.B,
                                 params.f_max, geom.l1, geom.l2)
    if policy is not None and policy.active(t2):
        tau2 = policy.tau_star
    return np.array([tau1, tau2])


def _cartesian_core(t1, t2, w1, w2, desired, K, B, f_max, l1, l2):
    s1, c1 = math.sin(t1), math.cos(t1)
    s12, c12 = math.sin(t1 + t2), math.cos(t1 + t2)
    x = l1 * c1 + l2 * c12
    y = l1 * s1 + l2 * s12
    j11 = -l1 * s1 - l2 * s12
    j12 = -l2 * s12
    j21 = l1 * c1 + l2 * c12
    j22 = l2 * c12
    vx = j11 * w1 + j12 * w2
    vy = j21 * w1 + j22 * w2
    fx = K[0] * (desired[0] - x)
    fy = K[1] * (desired[1] - y)
    if f_max is not None:
        fx = min(max(fx, -f_max), f_max)
        fy = min(max(fy, -f_max), f_max)
    fx -= B[0] * vx
    fy -= B[1] * vy
    return j11 * fx + j21 * fy, j12 * fx + j22 * fy


def joint_impedance_torque(joint_state: JointState, params: ImpedanceParams):
    if params.space is not Space.JOINT:
        raise ValueError("joint_impedance_torque needs Joint params")
    th, thd = joint_state.theta, joint_state.theta_dot
    K, B, d = params.K, params.B, params.desired
    return np.array([
        K[0] * (d[0] - th[0]) - B[0] * thd[0],
        K[1] * (d[1] - th[1]) - B[1] * thd[1],
    ])


@dataclass
class OuterLoopResult:
    motor_torque: tuple
    joint_torque: tuple
    saturated: bool
    override_active: bool


def outer_loop_step(finger_state: JointState, params: ImpedanceParams, geom: FingerGeometry,
                    policy: OverridePolicy, transmission: TransmissionParams,
                    tau_max: float) -> OuterLoopResult:
    """One outer-loop update: impedance law, torque map, per-motor saturation.

    The caller holds ``motor_torque`` constant until the next outer tick.
    """
    t1, t2 = float(finger_state.theta[0]), float(finger_state.theta[1])
    w1, w2 = float(finger_state.theta_dot[0]), float(finger_state.theta_dot[1])
    override = False
    if params.space is Space.CARTESIAN:
        tau1, tau2 = _cartesian_core(t1, t2, w1, w2, params.desired, params.K, params.B,
                                     params.f_max, geom.l1, geom.l2)
        if policy is not None and policy.active(t2):
            tau2 = policy.tau_star
            override = True
    else:
        K, B, d = params.K, params.B, params.desired
        tau1 = K[0] * (d[0] - t1) - B[0] * w1
        tau2 = K[1] * (d[1] - t2) - B[1] * w2
    T = transmission.torque_matrix()
    m1 = T[0, 0] * tau1 + T[0, 1] * tau2
    m2 = T[1, 0] * tau1 + T[1, 1] * tau2
    saturated = False
    if abs(m1) > tau_max:
        m1 = math.copysign(tau_max, m1)
        saturated = True
    if abs(m2) > tau_max:
        m2 = math.copysign(tau_max, m2)
        saturated = True
    return OuterLoopResult((m1, m2), (tau1, tau2), saturated, override)


class VelocityEstimator:
    """Encoder-differenced joint velocity with a first-order low-pass."""

    def __init__(self, dt: float, cutoff_hz: float = 100.0, theta0=(0.0, 0.0)):
        self.dt = dt
        self.alpha = 1.0 - math.exp(-2.0 * math.pi * cutoff_hz * dt)
        self.prev = [float(theta0[0]), float(theta0[1])]
        self.v = [0.0, 0.0]

    def update(self, theta):
        a, dt = self.alpha, self.dt
        for i in range(2):
            raw = (theta[i] - self.prev[i]) / dt
            self.v[i] += a * (raw - self.v[i])
            self.prev[i] = theta[i]
        return (self.v[0], self.v[1])


@dataclass
class ScheduleEvent:
    """``trigger`` is a start time (s) or a predicate ``f(context) -> bool``.

    ``payload`` is whatever the schedule hands back when the event is active,
    typically an :class:`ImpedanceParams` or a controller description.
    """

    trigger: float | Callable[[Any], bool]
    payload: Any
    label: str = ""
    fired_at: float | None = field(default=None, compare=False)


class GainSchedule:
    """Time- or predicate-triggered parameter changes; events never un-fire."""

    def __init__(self, events: Sequence[ScheduleEvent | tuple]):
        if not events:
            raise ValueError("gain schedule needs at least one event")
        self.events = [e if isinstance(e, ScheduleEvent) else ScheduleEvent(*e) for e in events]
        self._active: ScheduleEvent | None = None

    def update(self, t: float, context: Any = None):
        """Fire any pending events and return the active payload."""
        for ev in self.events:
            if ev.fired_at is not None:
                continue
            trig = ev.trigger
            fire = (t >= trig - 1e-12) if not callable(trig) else bool(trig(context))
            if fire:
                ev.fired_at = t
                self._active = ev
        if self._active is None:
            raise RuntimeError(f"no schedule event active at t={t}")
        return self._active.payload

    def active_at(self, t: float, context: Any = None):
        return self.update(t, context)

    @property
    def active_event(self) -> ScheduleEvent | None:
        return self._active

    def fired(self):
        return [(ev.label, ev.fired_at) for ev in self.events if ev.fired_at is not None]
