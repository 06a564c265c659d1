"""Declarative experiments: config schema, world construction, presets and verdicts."""

from __future__ import annotations

import copy
import enum
import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import config as cfgio
from .closure import force_closure, force_closure_2contact, form_closure
from .config import ConfigError
from .contact import ContactPoint, Polygon, RigidObject, ShapeKind
from .foc import EncoderModel, MotorParams, kt_from_kv, run_motor_bench
from .impedance import ControlSchedule, GainSchedule, OverridePolicy, ScheduleEvent, Space
from .sim import (BaseMotion, ContactParams, ControllerSetting, CosineDip, Disturbance, FingerPlant,
                  HandGeometry, PiecewiseLinearMotion, SimWorld, Trace, run, FINGER_COLUMNS,
                  MOTOR_COLUMNS)
from .transmission import FingerGeometry, TorqueMapMode, TransmissionParams, inverse_kinematics, \
    sample_workspace

WORKSPACE_TOLERANCE = 0.005
WORKSPACE_GRID = 60


class TrajectoryKind(str, enum.Enum):
    HOLD = "Hold"
    CIRCLE = "Circle"
    RECTANGLE = "Rectangle"
    PIECEWISE_LINEAR = "PiecewiseLinear"


class Frame(str, enum.Enum):
    FINGER = "finger"
    HAND = "hand"


class ScenarioKind(str, enum.Enum):
    WORLD = "world"
    MOTOR_BENCH = "motor_bench"


class SuccessKind(str, enum.Enum):
    NONE = "none"
    TRACKING = "tracking"
    PRESS = "press"
    GRASP = "grasp"
    CLOSURE = "closure"
    IN_HAND = "in_hand"
    PALM_PUSH = "palm_push"
    THETA2 = "theta2"
    MOTOR_LINEARITY = "motor_linearity"
    FOC_ABLATION = "foc_ablation"


# --- schema -------------------------------------------------------------------


@dataclass
class MotorConfig:
    kv: float = 360.0
    pole_pairs: int = 7
    R: float = 0.1
    L: float = 30e-6
    rotor_inertia: float = 2e-6
    viscous_friction: float = 1e-5
    bus_voltage: float = 12.0
    i_max: float = 15.0
    kp: float = 0.5
    ki: float = 300.0
    cogging_amplitude: float = 0.0
    current_noise_std: float = 0.005
    voltage_noise_std: float = 0.01
    voltage_noise_tau: float = 5e-3
    encoder_cpr: int = 16384
    ablate_id: bool = False

    def __post_init__(self):
        self.params()

    def params(self) -> MotorParams:
        return MotorParams(kt=kt_from_kv(self.kv), kv=self.kv, pole_pairs=self.pole_pairs, R=self.R,
                           L=self.L, rotor_inertia=self.rotor_inertia,
                           viscous_friction=self.viscous_friction, bus_voltage=self.bus_voltage,
                           cogging_amplitude=self.cogging_amplitude,
                           current_noise_std=self.current_noise_std,
                           voltage_noise_std=self.voltage_noise_std,
                           voltage_noise_tau=self.voltage_noise_tau)


@dataclass
class ContactConfig:
    kn: float = 2000.0
    dn: float = 10.0
    k_visc: float = 100.0
    k_stick: float = 0.0

    def __post_init__(self):
        if not (self.kn > 0 and self.dn >= 0 and self.k_visc >= 0 and self.k_stick >= 0):
            raise ValueError("contact stiffness must be positive and damping >= 0")


@dataclass
class PlantConfig:
    l1: float = 0.05
    l2: float = 0.04
    theta1_limits: list[float] = field(default_factory=lambda: [0.0, 3.0])
    theta2_limits: list[float] = field(default_factory=lambda: [-math.pi / 2, 3 * math.pi / 4])
    m1: float = 0.03
    m2: float = 0.02
    joint_damping: float = 1e-4
    limit_stiffness: float = 50.0
    n1: float = 2.57
    n2: float = 1.0
    torque_map_mode: TorqueMapMode = TorqueMapMode.LITERAL
    finger_spacing: float = 0.08
    palm: bool = True
    palm_width: float = 0.06
    palm_thickness: float = 0.02
    tip_radius: float = 0.008
    link_radius: float = 0.006
    finger_mu: float = 1.0
    palm_mu: float = 0.5
    inner_dt: float = 1e-4
    ratio: int = 5
    velocity_cutoff_hz: float = 100.0
    motor: MotorConfig = field(default_factory=MotorConfig)
    contact: ContactConfig = field(default_factory=ContactConfig)

    def __post_init__(self):
        self.geometry()
        self.transmission()
        ControlSchedule(self.inner_dt, self.ratio)

    def geometry(self) -> FingerGeometry:
        return FingerGeometry(self.l1, self.l2, tuple(self.theta1_limits), tuple(self.theta2_limits))

    def transmission(self) -> TransmissionParams:
        return TransmissionParams(self.n1, self.n2, self.torque_map_mode)

    def hand(self) -> HandGeometry:
        return HandGeometry(self.finger_spacing, self.palm_width, self.palm_thickness,
                            self.tip_radius, self.link_radius, self.finger_mu, self.palm_mu)


def _vec(v, n, name):
    if v is not None and (len(v) != n or not all(math.isfinite(x) for x in v)):
        raise ValueError(f"{name} must hold {n} finite numbers")


@dataclass
class TrajectorySpec:
    """Set-point path for one finger.

    Points are fingertip positions (m) in ``frame``, or joint angles (rad)
    when the controller runs in joint space.  Before ``start`` the path
    holds its first point.  ``K``/``B`` optionally replace the controller
    gains for this finger.
    """

    kind: TrajectoryKind = TrajectoryKind.HOLD
    frame: Frame = Frame.FINGER
    point: list[float] | None = None
    center: list[float] = field(default_factory=lambda: [0.0, 0.06])
    radius: float = 0.02
    rate: float = 1.0
    phase: float = 0.0
    corners: list[list[float]] | None = None
    speed: float = 0.02
    waypoints: list[list[float]] | None = None
    start: float = 0.0
    K: list[float] | None = None
    B: list[float] | None = None

    def __post_init__(self):
        _vec(self.point, 2, "point")
        _vec(self.center, 2, "center")
        _vec(self.K, 2, "K")
        _vec(self.B, 2, "B")
        for name in ("radius", "rate", "phase", "speed", "start"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.kind is TrajectoryKind.CIRCLE and not (self.radius > 0 and self.rate > 0):
            raise ValueError("circle radius and rate must be > 0")
        if self.kind is TrajectoryKind.RECTANGLE:
            if self.corners is None or len(self.corners) != 4:
                raise ValueError("rectangle needs 4 corners")
            for c in self.corners:
                _vec(c, 2, "corner")
            if not self.speed > 0:
                raise ValueError("rectangle speed must be > 0")
        if self.kind is TrajectoryKind.PIECEWISE_LINEAR:
            if not self.waypoints or len(self.waypoints) < 2:
                raise ValueError("piecewise-linear path needs >= 2 waypoints [t, x, y]")
            for w in self.waypoints:
                _vec(w, 3, "waypoint")
            ts = [w[0] for w in self.waypoints]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("waypoint times must increase")
        if self.K is not None and min(self.K) < 0 or self.B is not None and min(self.B) < 0:
            raise ValueError("gains must be >= 0")

    def evaluate(self, t: float, default=None):
        """Set-point at time ``t`` in this spec's own frame."""
        if self.kind is TrajectoryKind.HOLD:
            p = self.point if self.point is not None else default
            return float(p[0]), float(p[1])
        s = max(t - self.start, 0.0)
        if self.kind is TrajectoryKind.CIRCLE:
            a = self.rate * s + self.phase
            return (self.center[0] + self.radius * math.cos(a),
                    self.center[1] + self.radius * math.sin(a))
        if self.kind is TrajectoryKind.RECTANGLE:
            return _polyline_at(self.corners, self.speed * s, closed=True)
        w = self.waypoints
        if t <= w[0][0]:
            return w[0][1], w[0][2]
        for (t0, x0, y0), (t1, x1, y1) in zip(w, w[1:]):
            if t < t1:
                a = (t - t0) / (t1 - t0)
                return x0 + a * (x1 - x0), y0 + a * (y1 - y0)
        return w[-1][1], w[-1][2]

    def sample_points(self, default=None):
        """Representative set-points for the load-time reachability check."""
        if self.kind is TrajectoryKind.HOLD:
            return [self.evaluate(0.0, default)]
        if self.kind is TrajectoryKind.CIRCLE:
            return [(self.center[0] + self.radius * math.cos(a), self.center[1] + self.radius * math.sin(a))
                    for a in np.linspace(0.0, 2 * math.pi, 73)]
        if self.kind is TrajectoryKind.RECTANGLE:
            pts = []
            c = self.corners + [self.corners[0]]
            for a, b in zip(c, c[1:]):
                pts += [(a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])) for u in np.linspace(0, 1, 11)]
            return pts
        return [(w[1], w[2]) for w in self.waypoints]


def _polyline_at(corners, dist, closed=True):
    pts = [tuple(c) for c in corners] + ([tuple(corners[0])] if closed else [])
    segs = [math.dist(a, b) for a, b in zip(pts, pts[1:])]
    total = sum(segs)
    d = dist % total if closed else min(dist, total)
    for (a, b), L in zip(zip(pts, pts[1:]), segs):
        if d <= L:
            u = d / L if L > 0 else 0.0
            return a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])
        d -= L
    return pts[-1]


@dataclass
class FingerConfig:
    """Initial pose (joint angles, or a fingertip point with elbow-up IK) and path."""

    initial_theta: list[float] | None = None
    initial_tip: list[float] | None = None
    initial_frame: Frame = Frame.FINGER
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)

    def __post_init__(self):
        _vec(self.initial_theta, 2, "initial_theta")
        _vec(self.initial_tip, 2, "initial_tip")
        if self.initial_theta is not None and self.initial_tip is not None:
            raise ValueError("give initial_theta or initial_tip, not both")


@dataclass
class OverrideConfig:
    enabled: bool = True
    theta2_threshold: float = 0.05
    tau_star: float = 0.1


@dataclass
class ControllerConfig:
    space: Space = Space.CARTESIAN
    K: list[float] = field(default_factory=lambda: [100.0, 100.0])
    B: list[float] = field(default_factory=lambda: [2.0, 2.0])
    f_max: float | None = None
    override: OverrideConfig = field(default_factory=OverrideConfig)

    def __post_init__(self):
        ControllerSetting(self.space, self.K, self.B, self.f_max)
        OverridePolicy(self.override.theta2_threshold, self.override.tau_star, self.override.enabled)


@dataclass
class TriggerConfig:
    """Predicate trigger on the encoder-measured fingertip displacement (hand frame)."""

    kind: str = "tip_displacement"
    axis: str = "y"
    threshold: float = 0.01
    fingers: str = "any"

    def __post_init__(self):
        if self.kind != "tip_displacement":
            raise ValueError("only 'tip_displacement' triggers are supported")
        if self.axis not in ("x", "y", "norm"):
            raise ValueError("axis must be 'x', 'y' or 'norm'")
        if self.fingers not in ("any", "all"):
            raise ValueError("fingers must be 'any' or 'all'")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")

    def __call__(self, world: SimWorld) -> bool:
        hits = [trigger_value(world.tip_displacement(i), self.axis) >= self.threshold for i in range(2)]
        return any(hits) if self.fingers == "any" else all(hits)


def trigger_value(d, axis):
    if axis == "x":
        return abs(d[0])
    if axis == "y":
        return abs(d[1])
    return math.hypot(d[0], d[1])


@dataclass
class ScheduleEventConfig:
    """Fires at time ``at`` or when ``when`` holds; unset gains are inherited.

    ``targets`` (hand frame, or joint angles in joint space) replace both
    fingers' trajectories from then on.
    """

    label: str = ""
    at: float | None = None
    when: TriggerConfig | None = None
    space: Space | None = None
    K: list[float] | None = None
    B: list[float] | None = None
    f_max: float | None = None
    clear_f_max: bool = False
    targets: list[list[float]] | None = None
    release_targets: bool = False

    def __post_init__(self):
        if (self.at is None) == (self.when is None):
            raise ValueError("schedule event needs exactly one of 'at' or 'when'")
        _vec(self.K, 2, "K")
        _vec(self.B, 2, "B")
        if self.targets is not None:
            if len(self.targets) != 2:
                raise ValueError("targets needs one point per finger")
            for p in self.targets:
                _vec(p, 2, "target")


@dataclass
class ObjectConfig:
    shape: ShapeKind = ShapeKind.DISK
    radius: float = 0.02
    vertices: list[list[float]] | None = None
    mass: float = 0.02
    inertia: float | None = None
    position: list[float] = field(default_factory=lambda: [0.0, 0.06])
    orientation: float = 0.0
    velocity: list[float] = field(default_factory=lambda: [0.0, 0.0])
    angular_velocity: float = 0.0
    mu: float = 0.8
    gravity_start: float = 0.0

    def __post_init__(self):
        self.build()

    def build(self) -> RigidObject:
        verts = tuple(tuple(v) for v in self.vertices) if self.vertices else ()
        return RigidObject(self.shape, self.radius, verts, self.mass, self.inertia,
                           tuple(self.position), self.orientation, tuple(self.velocity),
                           self.angular_velocity, self.mu)


@dataclass
class SurfaceConfig:
    vertices: list[list[float]]
    tag: str = "surface"
    mu: float = 0.5
    kn: float | None = None
    dn: float | None = None

    def __post_init__(self):
        self.build()

    def build(self) -> Polygon:
        from .contact import check_convex_ccw
        verts = [tuple(v) for v in self.vertices]
        check_convex_ccw(verts)
        return Polygon(verts, self.tag, self.mu, kn=self.kn, dn=self.dn)


@dataclass
class BaseMotionConfig:
    kind: str = "Fixed"
    position: list[float] = field(default_factory=lambda: [0.0, 0.0])
    rotation: float = 0.0
    depth: float = 0.05
    peak_speed: float = 0.5
    start: float = 0.0
    direction: list[float] = field(default_factory=lambda: [0.0, -1.0])
    waypoints: list[list[float]] | None = None

    def __post_init__(self):
        if self.kind not in ("Fixed", "CosineDip", "PiecewiseLinear"):
            raise ValueError("kind must be Fixed, CosineDip or PiecewiseLinear")
        self.build()

    def build(self) -> BaseMotion:
        if self.kind == "CosineDip":
            return CosineDip(self.position, self.rotation, self.depth, self.peak_speed, self.start,
                             self.direction)
        if self.kind == "PiecewiseLinear":
            if not self.waypoints:
                raise ValueError("PiecewiseLinear base motion needs waypoints")
            return PiecewiseLinearMotion(self.waypoints, self.rotation)
        return BaseMotion(self.position, self.rotation)


@dataclass
class DisturbanceConfig:
    start: float
    duration: float
    force: list[float] = field(default_factory=lambda: [0.0, 0.0])
    torque: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("disturbance duration must be positive")


@dataclass
class BenchConfig:
    """Locked-rotor motor test: one constant-torque segment per setpoint."""

    mode: str = "linearity"
    setpoints: list[float] = field(default_factory=lambda: [0.01 * k for k in range(1, 11)])
    segment: float = 0.1
    steady_fraction: float = 0.5

    def __post_init__(self):
        if self.mode not in ("linearity", "ablation"):
            raise ValueError("mode must be 'linearity' or 'ablation'")
        if not self.setpoints:
            raise ValueError("at least one setpoint is required")
        if not (self.segment > 0 and 0 < self.steady_fraction < 1):
            raise ValueError("segment must be > 0 and steady_fraction in (0, 1)")


@dataclass
class SuccessConfig:
    kind: SuccessKind = SuccessKind.NONE
    transient: float = 1.0
    max_error: float = 0.01
    axis: str = "y"
    slope_tolerance: float = 0.05
    displacement_range: list[float] = field(default_factory=lambda: [0.0, 0.04])
    min_force: float = 8.2
    min_normal_force: float = 0.2
    f_max: float | None = None
    min_object_rise: float | None = None
    trigger_threshold: float | None = None
    no_pause: bool = False
    closure: str = "form"
    target: list[float] | None = None
    min_rotation: float | None = None
    tolerance: float = 0.003
    start: float = 0.0
    min_relative_rise: float = 0.003
    theta2_bound: float = 0.0
    expect_below: bool = False
    kt_tolerance: float = 0.005
    id_fraction: float = 0.01
    ablation_factor: float = 5.0


@dataclass
class ScenarioConfig:
    name: str
    duration: float = 1.0
    description: str = ""
    kind: ScenarioKind = ScenarioKind.WORLD
    seed: int = 0
    out_dir: str | None = None
    plant: PlantConfig = field(default_factory=PlantConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    fingers: list[FingerConfig] = field(default_factory=lambda: [FingerConfig(), FingerConfig()])
    gain_schedule: list[ScheduleEventConfig] = field(default_factory=list)
    object: ObjectConfig | None = None
    environment: list[SurfaceConfig] = field(default_factory=list)
    base_motion: BaseMotionConfig = field(default_factory=BaseMotionConfig)
    disturbances: list[DisturbanceConfig] = field(default_factory=list)
    gravity: list[float] = field(default_factory=lambda: [0.0, -9.81])
    bench: BenchConfig | None = None
    success: SuccessConfig = field(default_factory=SuccessConfig)

    def __post_init__(self):
        if not self.name:
            raise ValueError("name must be non-empty")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError("duration must be positive")
        if len(self.fingers) != 2:
            raise ValueError("fingers must list exactly two entries")
        _vec(self.gravity, 2, "gravity")
        if self.kind is ScenarioKind.MOTOR_BENCH and self.bench is None:
            self.bench = BenchConfig()


# --- loading --------------------------------------------------------------------


@lru_cache(maxsize=8)
def _workspace_tree(geom: FingerGeometry):
    return cKDTree(sample_workspace(geom, WORKSPACE_GRID))


def check_workspace(cfg: ScenarioConfig):
    """Raise :class:`ConfigError` if a Cartesian set-point is unreachable."""
    if cfg.kind is not ScenarioKind.WORLD:
        return
    geom = cfg.plant.geometry()
    hand = cfg.plant.hand()
    joint = cfg.controller.space is Space.JOINT
    lo, hi = abs(geom.l1 - geom.l2), geom.l1 + geom.l2
    tree = _workspace_tree(geom)

    def check(i, p_local, where):
        r = math.hypot(*p_local)
        if r > hi + 1e-12 or r < lo - 1e-12:
            raise ConfigError(where, f"point {tuple(round(v, 6) for v in p_local)} (finger {i} frame) "
                                     f"is outside the reachable annulus [{lo:.3f}, {hi:.3f}] m")
        d, _ = tree.query(p_local)
        if d > WORKSPACE_TOLERANCE:
            raise ConfigError(where, f"point {tuple(round(v, 6) for v in p_local)} (finger {i} frame) "
                                     f"is {d * 1000:.1f} mm from the joint-limited workspace")

    for i, fc in enumerate(cfg.fingers):
        tr = fc.trajectory
        if joint:
            continue
        for k, p in enumerate(tr.sample_points(default_in_frame(cfg, i, tr.frame))):
            p_local = hand.hand_to_finger(i, p) if tr.frame is Frame.HAND else p
            where = {TrajectoryKind.PIECEWISE_LINEAR: f"waypoints[{k}]",
                     TrajectoryKind.HOLD: "point"}.get(tr.kind, f"<sample {k}>")
            check(i, p_local, f"fingers[{i}].trajectory.{where}")
    if not joint:
        for e, ev in enumerate(cfg.gain_schedule):
            if ev.targets is not None and (ev.space or cfg.controller.space) is Space.CARTESIAN:
                for i, p in enumerate(ev.targets):
                    check(i, hand.hand_to_finger(i, p), f"gain_schedule[{e}].targets[{i}]")


def initial_theta(cfg: ScenarioConfig, i: int):
    fc = cfg.fingers[i]
    geom = cfg.plant.geometry()
    if fc.initial_theta is not None:
        return tuple(fc.initial_theta)
    tip = fc.initial_tip
    if tip is None:
        tip = [0.0, 0.06]
        frame = Frame.FINGER
    else:
        frame = fc.initial_frame
    p = cfg.plant.hand().hand_to_finger(i, tip) if frame is Frame.HAND else tip
    try:
        return tuple(inverse_kinematics(p, geom))
    except ValueError as exc:
        raise ConfigError(f"fingers[{i}].initial_tip", str(exc)) from None


def initial_tip(cfg, i):
    from .transmission import forward_kinematics
    return tuple(forward_kinematics(initial_theta(cfg, i), cfg.plant.geometry()))


def default_in_frame(cfg, i, frame):
    p = initial_tip(cfg, i)
    return cfg.plant.hand().finger_to_hand(i, p) if frame is Frame.HAND else p


def load_config(path) -> ScenarioConfig:
    """Parse and validate a scenario JSON file (strict: unknown keys fail)."""
    text = Path(path).read_text()
    cfg = cfgio.loads(ScenarioConfig, text, str(path))
    check_workspace(cfg)
    return cfg


def config_from_dict(data) -> ScenarioConfig:
    cfg = cfgio.from_dict(ScenarioConfig, data)
    check_workspace(cfg)
    return cfg


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return cfgio.to_dict(cfg)


# --- world construction ------------------------------------------------------------


def _base_settings(cfg: ScenarioConfig):
    c = cfg.controller
    out = []
    for fc in cfg.fingers:
        tr = fc.trajectory
        out.append(ControllerSetting(c.space, tr.K if tr.K is not None else c.K,
                                     tr.B if tr.B is not None else c.B, c.f_max))
    return out


def build_schedule(cfg: ScenarioConfig):
    base = _base_settings(cfg)
    events = [ScheduleEvent(0.0, base, "initial")]
    current = base
    for ev in cfg.gain_schedule:
        new = []
        for s in current:
            f_max = None if ev.clear_f_max else (ev.f_max if ev.f_max is not None else s.f_max)
            targets = s.targets
            if ev.release_targets:
                targets = None
            if ev.targets is not None:
                targets = tuple(tuple(p) for p in ev.targets)
            new.append(ControllerSetting(ev.space if ev.space is not None else s.space,
                                         ev.K if ev.K is not None else s.K,
                                         ev.B if ev.B is not None else s.B, f_max, targets))
        trigger = ev.at if ev.at is not None else ev.when
        events.append(ScheduleEvent(trigger, new, ev.label or f"event{len(events)}"))
        current = new
    return GainSchedule(events)


def _trajectory_fn(cfg, i):
    tr = cfg.fingers[i].trajectory
    hand = cfg.plant.hand()
    default = default_in_frame(cfg, i, tr.frame)
    if cfg.controller.space is Space.JOINT:
        th0 = initial_theta(cfg, i)
        return lambda t: tr.evaluate(t, th0)
    if tr.frame is Frame.HAND:
        return lambda t: tr.evaluate(t, default)
    return lambda t: hand.finger_to_hand(i, tr.evaluate(t, default))


def build_world(cfg: ScenarioConfig, seed: int | None = None) -> SimWorld:
    p = cfg.plant
    geom, trans, hand = p.geometry(), p.transmission(), p.hand()
    mc = p.motor
    fingers = [FingerPlant(geom, p.m1, p.m2, joint_damping=p.joint_damping,
                           limit_stiffness=p.limit_stiffness, transmission=trans,
                           rotor_inertia=mc.rotor_inertia, motor_friction=mc.viscous_friction,
                           theta=initial_theta(cfg, i)) for i in range(2)]
    o = cfg.controller.override
    return SimWorld(
        fingers, [_trajectory_fn(cfg, i) for i in range(2)], schedule=build_schedule(cfg),
        hand=hand, obj=cfg.object.build() if cfg.object else None,
        environment=[s.build() for s in cfg.environment], base_motion=cfg.base_motion.build(),
        disturbances=[Disturbance(d.start, d.duration, tuple(d.force), d.torque) for d in cfg.disturbances],
        control=ControlSchedule(p.inner_dt, p.ratio),
        override=OverridePolicy(o.theta2_threshold, o.tau_star, o.enabled),
        motor_params=mc.params(), kp=mc.kp, ki=mc.ki, ablate_id=mc.ablate_id, i_max=mc.i_max,
        contact=ContactParams(p.contact.kn, p.contact.dn, p.contact.k_visc, p.contact.k_stick),
        gravity=tuple(cfg.gravity), velocity_cutoff_hz=p.velocity_cutoff_hz,
        encoder=EncoderModel(mc.encoder_cpr), seed=cfg.seed if seed is None else seed,
        palm=p.palm, gravity_start=cfg.object.gravity_start if cfg.object else 0.0)


# --- execution -----------------------------------------------------------------------


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    trace: Trace
    summary: dict
    contacts: list
    success: bool
    reason: str
    files: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 0 if self.success else 1


CONTACT_COLUMNS = ("tag", "x_m", "y_m", "nx", "ny", "mu", "penetration_m", "fx_N", "fy_N", "fn_N")


def simulate(cfg: ScenarioConfig, seed: int | None = None) -> ScenarioResult:
    """Run a scenario in memory and evaluate its success predicate."""
    if cfg.kind is ScenarioKind.MOTOR_BENCH:
        trace, summary = _run_bench(cfg, cfg.seed if seed is None else seed)
        contacts = []
    else:
        world = build_world(cfg, seed)
        res = run(world, cfg.duration, transient=cfg.success.transient
                  if cfg.success.kind is SuccessKind.TRACKING else 0.0)
        trace, summary = res.trace, res.summary
        contacts = [(c.tag, c.position[0], c.position[1], c.normal[0], c.normal[1], c.mu,
                     c.penetration, c.force[0], c.force[1], c.normal_force)
                    for c in world.contacts if c.body == "object"]
    ok, reason, metrics = evaluate(cfg, trace, contacts)
    summary.update(metrics)
    summary["scenario"] = cfg.name
    summary["success"] = ok
    summary["failure_reason"] = reason
    return ScenarioResult(cfg, trace, summary, contacts, ok, reason)


def _run_bench(cfg, seed):
    b = cfg.bench
    mc = cfg.plant.motor
    params = mc.params()
    cols = ["t_s", "setpoint_Nm", "ablated", "iq_A", "id_A", "iq_true_A", "id_true_A", "uq_V", "ud_V",
            "tau_Nm"]
    rows = []
    t0 = 0.0
    dt = cfg.plant.inner_dt
    runs = [(sp, False) for sp in b.setpoints]
    if b.mode == "ablation":
        runs = [(b.setpoints[0], False), (b.setpoints[0], True)]
    seeds = np.random.SeedSequence(seed).spawn(len(runs))
    for (sp, ablate), s in zip(runs, seeds):
        out = run_motor_bench(sp, b.segment, dt=dt, params=params, kp=mc.kp, ki=mc.ki, seed=s,
                              ablate_id=ablate or mc.ablate_id, encoder=EncoderModel(mc.encoder_cpr))
        for k in range(len(out["t"])):
            rows.append((t0 + float(out["t"][k]), float(sp), 1.0 if ablate else 0.0,
                         float(out["iq"][k]), float(out["id"][k]), float(out["iq_true"][k]),
                         float(out["id_true"][k]), float(out["uq"][k]), float(out["ud"][k]),
                         float(out["tau"][k])))
        t0 += b.segment
    trace = Trace(cols, rows)
    summary = {"rows": len(rows), "kt_Nm_A": params.kt}
    return trace, summary


# --- success predicates (trace only) ------------------------------------------------------


def _fail(reason, metrics):
    return False, reason, metrics


def evaluate(cfg: ScenarioConfig, trace: Trace, contacts=()):
    """Scenario verdict recomputed from the emitted tables alone."""
    s = cfg.success
    kind = s.kind
    m: dict = {}
    if kind is SuccessKind.NONE:
        return True, "", m
    if kind is SuccessKind.MOTOR_LINEARITY:
        return _eval_linearity(cfg, trace, m)
    if kind is SuccessKind.FOC_ABLATION:
        return _eval_ablation(cfg, trace, m)
    t = trace.column("t_s")
    if kind is SuccessKind.TRACKING:
        from .sim import tracking_errors
        e = tracking_errors(trace, 0)
        sel = t >= s.transient - 1e-12
        m["max_error_after_transient_m"] = float(e[sel].max())
        m["rms_error_after_transient_m"] = float(math.sqrt(np.mean(e[sel] ** 2)))
        if m["max_error_after_transient_m"] >= s.max_error:
            return _fail(f"tracking error {m['max_error_after_transient_m']:.4g} m >= {s.max_error} m", m)
        return True, "", m
    if kind is SuccessKind.PRESS:
        return _eval_press(cfg, trace, m)
    if kind is SuccessKind.THETA2:
        th2 = trace.column("f0_theta2_rad")
        m["min_theta2_rad"] = float(th2.min())
        below = m["min_theta2_rad"] < s.theta2_bound
        if below != s.expect_below:
            return _fail(f"min theta2 {m['min_theta2_rad']:.4g} rad vs bound {s.theta2_bound}", m)
        return True, "", m
    if kind is SuccessKind.CLOSURE:
        cps = [ContactPoint((c[1], c[2]), (c[3], c[4]), c[5], c[6], c[0]) for c in contacts]
        m["final_object_contacts"] = len(cps)
        if s.closure == "form":
            r = form_closure(cps)
        else:
            r = force_closure(cps)
        m["closure"] = bool(r.closed)
        if r.certificate is not None:
            m["certificate"] = [float(v) for v in r.certificate]
        if not r.closed:
            return _fail(f"final contacts are not in {s.closure} closure", m)
        if s.closure == "force":
            ok, reason = _eval_grasp(cfg, trace, m)
            if not ok:
                return _fail(reason, m)
        return True, "", m
    # grasp family
    ok, reason = _eval_grasp(cfg, trace, m)
    if not ok:
        return _fail(reason, m)
    if kind is SuccessKind.IN_HAND:
        sel = t >= s.start - 1e-12
        x, y, phi = trace.column("obj_x_m")[sel], trace.column("obj_y_m")[sel], trace.column("obj_phi_rad")[sel]
        if s.target is not None:
            dx, dy = float(x[-1] - x[0]), float(y[-1] - y[0])
            m["object_displacement_m"] = [dx, dy]
            err = math.hypot(dx - s.target[0], dy - s.target[1])
            if err > s.tolerance:
                return _fail(f"object moved {dx:.4g}, {dy:.4g} m; target {s.target}", m)
        if s.min_rotation is not None:
            # signed: the object must turn at least this far in the given sense
            dphi = float(phi[-1] - phi[0])
            m["object_rotation_rad"] = dphi
            if math.copysign(1.0, s.min_rotation) * dphi < abs(s.min_rotation):
                return _fail(f"object rotated {dphi:.4g} rad; needed {s.min_rotation} rad", m)
        return True, "", m
    if kind is SuccessKind.PALM_PUSH:
        sel = t >= s.start - 1e-12
        oy = trace.column("obj_y_m")[sel]
        ty = 0.5 * (trace.column("f0_y_m") + trace.column("f1_y_m"))[sel]
        rel = oy - ty
        m["relative_rise_m"] = float(rel[-1] - rel[0])
        if m["relative_rise_m"] < s.min_relative_rise:
            return _fail(f"object rose {m['relative_rise_m']:.4g} m relative to the fingertips", m)
        return True, "", m
    return True, "", m


def _eval_grasp(cfg, trace, m):
    s = cfg.success
    fn0, fn1 = trace.column("f0_tip_fn_N"), trace.column("f1_tip_fn_N")
    m["final_normal_forces_N"] = [float(fn0[-1]), float(fn1[-1])]
    m["max_normal_force_N"] = [float(fn0.max()), float(fn1.max())]
    if s.f_max is not None:
        worst = max(float(fn0.max()), float(fn1.max()))
        if worst > s.f_max:
            return False, f"fingertip normal force {worst:.6g} N exceeds F_max {s.f_max} N"
    if min(fn0[-1], fn1[-1]) <= s.min_normal_force:
        return False, f"grasp lost: final normal forces {fn0[-1]:.4g}, {fn1[-1]:.4g} N"
    if s.min_object_rise is not None:
        y = trace.column("obj_y_m")
        m["object_rise_m"] = float(y[-1] - y[0])
        if m["object_rise_m"] < s.min_object_rise:
            return False, f"object rose only {m['object_rise_m']:.4g} m"
    if s.trigger_threshold is not None:
        ev = trace.column("schedule_event")
        t = trace.column("t_s")
        fired = np.nonzero(ev >= 1)[0]
        if fired.size == 0:
            return False, "contact trigger never fired"
        d = np.maximum(np.abs(trace.column("f0_y_m") - trace.column("f0_y_m")[0]),
                       np.abs(trace.column("f1_y_m") - trace.column("f1_y_m")[0]))
        first = int(np.nonzero(d >= s.trigger_threshold)[0][0])
        m["trigger_time_s"] = float(t[fired[0]])
        m["first_threshold_time_s"] = float(t[first])
        if fired[0] != first:
            return False, "trigger time does not match the first threshold crossing"
    if s.no_pause:
        by = trace.column("base_y_m")
        bx = trace.column("base_x_m")
        moving = np.nonzero(np.hypot(np.diff(bx), np.diff(by)) > 0)[0]
        if moving.size:
            still = np.hypot(np.diff(bx), np.diff(by))[moving[0]:moving[-1] + 1] == 0
            m["base_still_samples"] = int(still.sum())
            if still.any():
                return False, "base paused during the dip"
    return True, ""


def _eval_press(cfg, trace, m):
    s = cfg.success
    ax = s.axis
    ev = trace.column("schedule_event")
    d_all = trace.column(f"f0_{ax}d_m")
    d = np.abs(d_all - d_all[0])
    f = trace.column("f0_env_fn_N")
    lo, hi = s.displacement_range
    sel = (ev <= 0) & (d >= lo) & (d <= hi)
    if sel.sum() < 3:
        return _fail("not enough press samples in the displacement window", m)
    slope = float(np.polyfit(d[sel], f[sel], 1)[0])
    K = cfg.controller.K[0 if ax == "x" else 1]
    m["press_slope_N_m"] = slope
    m["press_slope_ratio"] = slope / K
    m["max_force_N"] = float(f.max())
    if abs(slope / K - 1.0) > s.slope_tolerance:
        return _fail(f"press slope {slope:.4g} N/m is not within {s.slope_tolerance:.0%} of K={K}", m)
    if m["max_force_N"] < s.min_force:
        return _fail(f"maximum force {m['max_force_N']:.4g} N < {s.min_force} N", m)
    return True, "", m


def _steady_groups(cfg, trace):
    b = cfg.bench
    t = trace.column("t_s")
    seg = np.floor((t - 1e-12) / b.segment).astype(int)
    local = t - seg * b.segment
    return seg, local >= (1.0 - b.steady_fraction) * b.segment


def _eval_linearity(cfg, trace, m):
    seg, steady = _steady_groups(cfg, trace)
    iq, tau = trace.column("iq_A"), trace.column("tau_Nm")
    xs, ys = [], []
    for k in np.unique(seg):
        sel = (seg == k) & steady
        xs.append(float(iq[sel].mean()))
        ys.append(float(tau[sel].mean()))
    kt = kt_from_kv(cfg.plant.motor.kv)
    slope = float(np.polyfit(xs, ys, 1)[0])
    m["torque_current_slope_Nm_A"] = slope
    m["kt_Nm_A"] = kt
    m["slope_relative_error"] = abs(slope / kt - 1.0)
    m["setpoint_means"] = [[x, y] for x, y in zip(xs, ys)]
    if m["slope_relative_error"] > cfg.success.kt_tolerance:
        return _fail(f"torque/current slope {slope:.6g} differs from kt {kt:.6g}", m)
    return True, "", m


def _eval_ablation(cfg, trace, m):
    seg, steady = _steady_groups(cfg, trace)
    ab = trace.column("ablated")
    iq, i_d = trace.column("iq_A"), trace.column("id_A")
    ctl = steady & (ab == 0)
    abl = steady & (ab == 1)
    iq_mean = float(iq[ctl].mean())
    id_rms = float(np.sqrt(np.mean(i_d[ctl] ** 2)))
    std_ctl, std_abl = float(i_d[ctl].std()), float(i_d[abl].std())
    m.update({"iq_mean_A": iq_mean, "id_rms_A": id_rms, "id_std_A": std_ctl,
              "id_std_ablated_A": std_abl, "ablation_std_ratio": std_abl / std_ctl})
    s = cfg.success
    if id_rms >= s.id_fraction * abs(iq_mean):
        return _fail(f"steady |i_d| {id_rms:.4g} A is not below {s.id_fraction:.0%} of i_q", m)
    if std_abl < s.ablation_factor * std_ctl:
        return _fail(f"ablated i_d std only {std_abl / std_ctl:.3g}x the regulated one", m)
    return True, "", m


# --- outputs ---------------------------------------------------------------------------------


def resolve_out_dir(cfg: ScenarioConfig, flag: str | None = None) -> Path:
    """Output directory: command-line flag, then ``QDDSIM_OUT``, then config, then ``./qddsim_out``."""
    if flag:
        return Path(flag)
    env = os.environ.get("QDDSIM_OUT")
    if env:
        return Path(env)
    if cfg.out_dir:
        return Path(cfg.out_dir)
    return Path("qddsim_out")


def write_outputs(result: ScenarioResult, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.config.name
    files = {}
    trace = result.trace
    p = out / f"{name}_trace.csv"
    trace.write_csv(p)
    files["trace"] = str(p)
    if result.config.kind is ScenarioKind.WORLD:
        for i in range(2):
            cols = ["t_s"] + [f"f{i}_{c}" for c in FINGER_COLUMNS]
            p = out / f"{name}_finger{i}.csv"
            trace.write_csv(p, cols, {c: c[3:] for c in cols[1:]})
            files[f"finger{i}"] = str(p)
        for j in range(4):
            cols = ["t_s"] + [f"m{j}_{c}" for c in MOTOR_COLUMNS]
            p = out / f"{name}_motor{j}.csv"
            trace.write_csv(p, cols, {c: c[3:] for c in cols[1:]})
            files[f"motor{j}"] = str(p)
        p = out / f"{name}_contacts.csv"
        Trace(["tag"] + list(CONTACT_COLUMNS[1:]), []).write_csv(p)
        with open(p, "a", newline="") as fh:
            for c in result.contacts:
                fh.write(",".join([c[0]] + [repr(float(v)) for v in c[1:]]) + "\n")
        files["contacts"] = str(p)
    p = out / f"{name}_summary.json"
    result.files = files
    summary = dict(result.summary)
    summary["files"] = files
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    files["summary"] = str(p)
    return files


def read_contacts_csv(path):
    rows = []
    with open(path) as fh:
        next(fh)
        for line in fh:
            parts = line.rstrip("\n").split(",")
            rows.append((parts[0],) + tuple(float(v) for v in parts[1:]))
    return rows


def run_scenario(cfg: ScenarioConfig, out_dir=None, seed: int | None = None) -> ScenarioResult:
    """Simulate, evaluate and write the trace/summary files; see :attr:`ScenarioResult.exit_code`."""
    if seed is not None:
        cfg = copy.deepcopy(cfg)
        cfg.seed = seed
    result = simulate(cfg)
    write_outputs(result, resolve_out_dir(cfg, out_dir))
    return result


# --- presets ------------------------------------------------------------------------------------

PRESETS: dict = {}


def preset(name, description):
    def deco(fn):
        PRESETS[name] = (description, fn)
        return fn
    return deco


def get_preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; try one of: {', '.join(PRESETS)}")
    cfg = config_from_dict(PRESETS[name][1]())
    return cfg


def list_presets():
    return [(name, desc) for name, (desc, _) in PRESETS.items()]


from . import presets as _presets  # noqa: E402,F401  (registers the built-in experiments)
