"""Differential belt/bevel transmission and 2R finger kinematics.

Each finger is driven by two motors through a belt reduction ``n1`` and a
bevel differential ``n2``.  Joint angles are a fixed linear map of the motor
angles; the same map carries velocities.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np


class TorqueMapMode(str, enum.Enum):
    LITERAL = "PaperEq10"
    ENERGY_CONSISTENT = "EnergyConsistent"


@dataclass(frozen=True)
class TransmissionParams:
    n1: float = 2.57
    n2: float = 1.0
    torque_map_mode: TorqueMapMode = TorqueMapMode.LITERAL

    def __post_init__(self):
        if not (self.n1 > 0 and self.n2 > 0):
            raise ValueError(f"reduction ratios must be positive, got n1={self.n1}, n2={self.n2}")
        object.__setattr__(self, "torque_map_mode", TorqueMapMode(self.torque_map_mode))

    def angle_matrix(self) -> np.ndarray:
        """Matrix ``A`` with ``theta = A @ q``."""
        a = 1.0 / (2.0 * self.n1)
        b = 1.0 / (2.0 * self.n1 * self.n2)
        return np.array([[a, -a], [b, b]])

    def inverse_angle_matrix(self) -> np.ndarray:
        """Matrix ``A^-1`` with ``q = A^-1 @ theta``."""
        n1, n2 = self.n1, self.n2
        return np.array([[n1, n1 * n2], [-n1, n1 * n2]])

    def torque_matrix(self) -> np.ndarray:
        """Matrix ``T`` with ``tau_q = T @ tau_theta`` for the active mode."""
        if self.torque_map_mode is TorqueMapMode.LITERAL:
            c = 1.0 / self.n1
            return np.array([[c, c], [-c, c]])
        return self.angle_matrix().T

    def inverse_torque_matrix(self) -> np.ndarray:
        """Matrix ``T^-1``: joint torques produced by given motor torques."""
        if self.torque_map_mode is TorqueMapMode.LITERAL:
            h = 0.5 * self.n1
            return np.array([[h, -h], [h, h]])
        return self.inverse_angle_matrix().T


@dataclass(frozen=True)
class FingerGeometry:
    l1: float = 0.05
    l2: float = 0.04
    theta1_limits: tuple[float, float] = (0.0, 3.0)
    theta2_limits: tuple[float, float] = (-math.pi / 2, 3 * math.pi / 4)

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0):
            raise ValueError("link lengths must be positive")
        for name in ("theta1_limits", "theta2_limits"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be a non-empty interval, got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))


@dataclass
class JointState:
    """Finger joint state with the matching motor-space state.

    Build instances with :meth:`from_joint` or :meth:`from_motor` so the two
    halves stay linked by the transmission.
    """

    theta: np.ndarray
    theta_dot: np.ndarray
    q: np.ndarray = field(default=None)
    q_dot: np.ndarray = field(default=None)

    @classmethod
    def from_joint(cls, theta, theta_dot=(0.0, 0.0), params: TransmissionParams | None = None):
        params = params or TransmissionParams()
        theta = np.asarray(theta, dtype=float)
        theta_dot = np.asarray(theta_dot, dtype=float)
        return cls(theta, theta_dot, joint_to_motor(theta, params), joint_to_motor(theta_dot, params))

    @classmethod
    def from_motor(cls, q, q_dot=(0.0, 0.0), params: TransmissionParams | None = None):
        params = params or TransmissionParams()
        q = np.asarray(q, dtype=float)
        q_dot = np.asarray(q_dot, dtype=float)
        return cls(motor_to_joint(q, params), motor_to_joint(q_dot, params), q, q_dot)


def motor_to_joint(q, params: TransmissionParams) -> np.ndarray:
    """Joint angles (or velocities) from motor angles (or velocities)."""
    q1, q2 = np.asarray(q, dtype=float)
    n1, n2 = params.n1, params.n2
    return np.array([(q1 - q2) / (2.0 * n1), (q1 + q2) / (2.0 * n1 * n2)])


def joint_to_motor(theta, params: TransmissionParams) -> np.ndarray:
    """Inverse of :func:`motor_to_joint`."""
    t1, t2 = np.asarray(theta, dtype=float)
    n1, n2 = params.n1, params.n2
    return np.array([n1 * t1 + n1 * n2 * t2, -n1 * t1 + n1 * n2 * t2])


def joint_torque_to_motor_torque(tau_theta, params: TransmissionParams) -> np.ndarray:
    """Motor torques required to produce ``tau_theta`` at the joints."""
    return params.torque_matrix() @ np.asarray(tau_theta, dtype=float)


def motor_torque_to_joint_torque(tau_q, params: TransmissionParams) -> np.ndarray:
    """Joint torques produced by motor shaft torques ``tau_q``.

    This is the inverse of the active torque map, so that commanding
    ``joint_torque_to_motor_torque(tau)`` reproduces ``tau`` at the joints in
    either mode.  In ``EnergyConsistent`` mode it is ``A^-T``.
    """
    return params.inverse_torque_matrix() @ np.asarray(tau_q, dtype=float)


def forward_kinematics(theta, geom: FingerGeometry) -> np.ndarray:
    t1, t2 = np.asarray(theta, dtype=float)
    l1, l2 = geom.l1, geom.l2
    return np.array([
        l1 * math.cos(t1) + l2 * math.cos(t1 + t2),
        l1 * math.sin(t1) + l2 * math.sin(t1 + t2),
    ])


def jacobian(theta, geom: FingerGeometry) -> np.ndarray:
    """Fingertip Jacobian, ``xdot = J(theta) @ theta_dot``."""
    t1, t2 = np.asarray(theta, dtype=float)
    l1, l2 = geom.l1, geom.l2
    s1, c1 = math.sin(t1), math.cos(t1)
    s12, c12 = math.sin(t1 + t2), math.cos(t1 + t2)
    return np.array([
        [-l1 * s1 - l2 * s12, -l2 * s12],
        [l1 * c1 + l2 * c12, l2 * c12],
    ])


def sample_workspace(geom: FingerGeometry, grid_n: int = 50) -> np.ndarray:
    """Fingertip positions over a ``grid_n x grid_n`` grid of the joint-limit box.

    Returns an array of shape ``(grid_n**2, 2)``.  The grid includes the
    limit values themselves, so ``grid_n=2`` gives the four corner images.
    """
    if int(grid_n) != grid_n or grid_n < 2:
        raise ValueError(f"grid_n must be an integer >= 2, got {grid_n}")
    t1 = np.linspace(*geom.theta1_limits, int(grid_n))
    t2 = np.linspace(*geom.theta2_limits, int(grid_n))
    T1, T2 = np.meshgrid(t1, t2, indexing="ij")
    T1, T2 = T1.ravel(), T2.ravel()
    x = geom.l1 * np.cos(T1) + geom.l2 * np.cos(T1 + T2)
    y = geom.l1 * np.sin(T1) + geom.l2 * np.sin(T1 + T2)
    return np.column_stack([x, y])


def write_workspace_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_m", "y_m"])
        for x, y in np.asarray(points):
            w.writerow([repr(float(x)), repr(float(y))])


def inverse_kinematics(point, geom: FingerGeometry, elbow: int = 1) -> np.ndarray:
    """Joint angles placing the fingertip at ``point``; ``elbow=+1`` bends theta2 > 0."""
    x, y = map(float, point)
    l1, l2 = geom.l1, geom.l2
    c2 = (x * x + y * y - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if not -1.0 <= c2 <= 1.0:
        raise ValueError(f"point {point} is out of reach")
    t2 = math.copysign(math.acos(c2), elbow)
    t1 = math.atan2(y, x) - math.atan2(l2 * math.sin(t2), l1 + l2 * math.cos(t2))
    return np.array([t1, t2])
