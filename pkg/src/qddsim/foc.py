"""BLDC motor electrical plant in the dq frame and its FOC torque loop.

Transforms follow the usual conventions:

* ``clarke`` is the unscaled form (``i_alpha = i_a - i_b/2 - i_c/2``).  It
  returns 1.5x the phase amplitude for a balanced triple, so the sensing path
  multiplies by :data:`CLARKE_GAIN` to get amplitude-invariant currents.
* ``inverse_clarke`` is amplitude invariant (``u_a = U_alpha``).

The motor model is a surface PMSM with equal d/q inductance.  Torque is
``kt * i_q`` with amplitude-invariant currents, and the back-EMF flux linkage
is chosen so electrical and mechanical power agree.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

SQRT3 = math.sqrt(3.0)
CLARKE_GAIN = 2.0 / 3.0
TWO_PI = 2.0 * math.pi


def kt_from_kv(kv_rpm_per_volt: float) -> float:
    """Torque constant (N*m/A) from a KV rating (RPM/V)."""
    return 60.0 / (TWO_PI * kv_rpm_per_volt)


@dataclass
class MotorParams:
    kt: float = kt_from_kv(360.0)
    kv: float = 360.0
    pole_pairs: int = 7
    R: float = 0.1
    L: float = 30e-6
    rotor_inertia: float = 2e-6
    viscous_friction: float = 1e-5
    bus_voltage: float = 12.0
    cogging_amplitude: float = 0.0
    # 12 slots / 14 magnets -> LCM 84 cogging periods per turn
    cogging_harmonic: int = 84
    # plant non-idealities, off unless a scenario enables them
    current_noise_std: float = 0.0
    voltage_noise_std: float = 0.0
    voltage_noise_tau: float = 5e-3

    def __post_init__(self):
        for name in ("kt", "R", "L", "rotor_inertia", "bus_voltage"):
            if not getattr(self, name) > 0:
                raise ValueError(f"MotorParams.{name} must be positive")
        if self.cogging_amplitude < 0:
            raise ValueError("cogging_amplitude must be >= 0")
        if self.current_noise_std < 0 or self.voltage_noise_std < 0:
            raise ValueError("noise levels must be >= 0")
        if not self.voltage_noise_tau > 0:
            raise ValueError("voltage_noise_tau must be positive")

    @property
    def flux_linkage(self) -> float:
        return self.kt / (1.5 * self.pole_pairs)

    @property
    def voltage_limit(self) -> float:
        return self.bus_voltage / SQRT3


@dataclass
class PIGains:
    kp: float = 0.5
    ki: float = 300.0
    output_limit: float = 12.0 / SQRT3
    integrator_state: float = 0.0

    def __post_init__(self):
        if not self.output_limit > 0:
            raise ValueError("output_limit must be positive")

    def update(self, error: float, dt: float) -> float:
        lim = self.output_limit
        integ = self.integrator_state + self.ki * error * dt
        if integ > lim:
            integ = lim
        elif integ < -lim:
            integ = -lim
        self.integrator_state = integ
        out = self.kp * error + integ
        if out > lim:
            return lim
        if out < -lim:
            return -lim
        return out

    def reset(self):
        self.integrator_state = 0.0


@dataclass
class EncoderModel:
    cpr: int = 16384
    offset: float = 0.0

    def __post_init__(self):
        if int(self.cpr) != self.cpr or self.cpr < 1:
            raise ValueError("cpr must be a positive integer")


@dataclass
class MotorState:
    rotor_angle: float = 0.0
    rotor_speed: float = 0.0
    i_d: float = 0.0
    i_q: float = 0.0
    u_d: float = 0.0
    u_q: float = 0.0
    u_abc: tuple = (0.0, 0.0, 0.0)
    i_abc: tuple = (0.0, 0.0, 0.0)
    # controller-side measurements
    i_d_meas: float = 0.0
    i_q_meas: float = 0.0
    # slowly varying voltage disturbance in the stationary frame
    dist_alpha: float = 0.0
    dist_beta: float = 0.0


class NoiseSource:
    """Buffered standard-normal draws from a seeded numpy Generator."""

    def __init__(self, seed, block: int = 4096):
        self._rng = np.random.default_rng(seed)
        self._block = block
        self._buf = self._rng.standard_normal(block).tolist()
        self._i = 0

    def normal(self) -> float:
        if self._i == self._block:
            self._buf = self._rng.standard_normal(self._block).tolist()
            self._i = 0
        v = self._buf[self._i]
        self._i += 1
        return v


def clarke(i_abc):
    i_a, i_b, i_c = i_abc
    return (i_a - 0.5 * i_b - 0.5 * i_c, 0.5 * SQRT3 * (i_b - i_c))


def park(i_alpha_beta, theta_e):
    i_alpha, i_beta = i_alpha_beta
    c, s = math.cos(theta_e), math.sin(theta_e)
    return (i_alpha * c + i_beta * s, i_beta * c - i_alpha * s)


def inverse_park(u_dq, theta_e):
    u_d, u_q = u_dq
    c, s = math.cos(theta_e), math.sin(theta_e)
    return (u_d * c - u_q * s, u_q * c + u_d * s)


def inverse_clarke(u_alpha_beta):
    u_alpha, u_beta = u_alpha_beta
    return (u_alpha, 0.5 * (-u_alpha + SQRT3 * u_beta), 0.5 * (-u_alpha - SQRT3 * u_beta))


def encoder_read(true_angle: float, enc: EncoderModel) -> float:
    step = TWO_PI / enc.cpr
    out = math.floor((true_angle - enc.offset) / step) * step + enc.offset
    # round-off can leave the residual a full count wide
    if true_angle - out >= step:
        out += step
    return out


def foc_step(desired_torque, state: MotorState, params: MotorParams, gains, dt,
             encoder: EncoderModel | None = None, noise: NoiseSource | None = None,
             ablate_id: bool = False):
    """Advance one inner FOC cycle; mutates and returns ``state`` plus shaft torque.

    ``gains`` is the ``(q_loop, d_loop)`` pair of :class:`PIGains`.  With
    ``ablate_id`` the d-axis regulator is bypassed and ``U_d`` is held at 0.
    ``noise`` is required whenever the params enable sensor or voltage noise.
    """
    if not math.isfinite(desired_torque):
        raise ValueError(f"desired torque must be finite, got {desired_torque}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    pi_q, pi_d = gains
    p = params.pole_pairs
    theta_e = p * state.rotor_angle
    if encoder is None:
        theta_e_meas = theta_e
    else:
        theta_e_meas = p * encoder_read(state.rotor_angle, encoder)

    # phase currents from the true dq state
    ce, se = math.cos(theta_e), math.sin(theta_e)
    i_al = state.i_d * ce - state.i_q * se
    i_be = state.i_q * ce + state.i_d * se
    i_a = i_al
    i_b = 0.5 * (-i_al + SQRT3 * i_be)
    state.i_abc = (i_a, i_b, -i_a - i_b)

    # two shunt sensors, third phase reconstructed
    sig = params.current_noise_std
    if sig > 0.0:
        m_a = i_a + sig * noise.normal()
        m_b = i_b + sig * noise.normal()
    else:
        m_a, m_b = i_a, i_b
    m_c = -m_a - m_b
    m_al = CLARKE_GAIN * (m_a - 0.5 * m_b - 0.5 * m_c)
    m_be = CLARKE_GAIN * 0.5 * SQRT3 * (m_b - m_c)
    cm, sm = math.cos(theta_e_meas), math.sin(theta_e_meas)
    id_m = m_al * cm + m_be * sm
    iq_m = m_be * cm - m_al * sm
    state.i_d_meas = id_m
    state.i_q_meas = iq_m

    iq_ref = desired_torque / params.kt
    u_q = pi_q.update(iq_ref - iq_m, dt)
    u_d = 0.0 if ablate_id else pi_d.update(-id_m, dt)
    vlim = params.voltage_limit
    mag = math.hypot(u_d, u_q)
    if mag > vlim:
        u_d *= vlim / mag
        u_q *= vlim / mag
    state.u_d, state.u_q = u_d, u_q

    u_al = u_d * cm - u_q * sm
    u_be = u_q * cm + u_d * sm
    state.u_abc = (u_al, 0.5 * (-u_al + SQRT3 * u_be), 0.5 * (-u_al - SQRT3 * u_be))

    # applied stationary voltage plus driver disturbance, seen in the true rotor frame
    v_al = u_al + state.dist_alpha
    v_be = u_be + state.dist_beta
    vd = v_al * ce + v_be * se
    vq = v_be * ce - v_al * se

    # semi-implicit Euler: resistive drop implicit, coupling explicit
    w_e = p * state.rotor_speed
    L, R = params.L, params.R
    den = 1.0 + dt * R / L
    i_d = (state.i_d + dt / L * (vd + w_e * L * state.i_q)) / den
    i_q = (state.i_q + dt / L * (vq - w_e * L * i_d - w_e * params.flux_linkage)) / den
    state.i_d, state.i_q = i_d, i_q

    sv = params.voltage_noise_std
    if sv > 0.0:
        a = math.exp(-dt / params.voltage_noise_tau)
        b = sv * math.sqrt(1.0 - a * a)
        state.dist_alpha = a * state.dist_alpha + b * noise.normal()
        state.dist_beta = a * state.dist_beta + b * noise.normal()

    tau = params.kt * i_q
    if params.cogging_amplitude:
        tau += params.cogging_amplitude * math.sin(params.cogging_harmonic * state.rotor_angle)
    return state, tau


class Motor:
    """One FOC-driven motor: params, gains, encoder, noise and state together."""

    TRACE_COLUMNS = ("t_s", "theta_rad", "omega_rad_s", "iq_A", "id_A", "uq_V", "ud_V", "tau_Nm")

    def __init__(self, params: MotorParams | None = None, kp=0.5, ki=300.0,
                 encoder: EncoderModel | None = None, seed=0, ablate_id=False,
                 rotor_angle=0.0):
        self.params = params or MotorParams()
        lim = self.params.voltage_limit
        self.pi_q = PIGains(kp, ki, lim)
        self.pi_d = PIGains(kp, ki, lim)
        self.encoder = encoder if encoder is not None else EncoderModel()
        self.noise = NoiseSource(seed)
        self.ablate_id = ablate_id
        self.state = MotorState(rotor_angle=rotor_angle)
        self.tau = 0.0

    def step(self, desired_torque: float, dt: float) -> float:
        _, self.tau = foc_step(desired_torque, self.state, self.params, (self.pi_q, self.pi_d),
                               dt, self.encoder, self.noise, self.ablate_id)
        return self.tau

    def trace_row(self, t):
        s = self.state
        return (t, s.rotor_angle, s.rotor_speed, s.i_q_meas, s.i_d_meas, s.u_q, s.u_d, self.tau)


def run_motor_bench(desired_torque, duration, dt=1e-4, locked=True, params=None,
                    kp=0.5, ki=300.0, seed=0, ablate_id=False, rotor_angle=0.3,
                    encoder=None, load_torque=0.0):
    """Single-motor bench test; returns a dict of per-step arrays.

    With ``locked`` the rotor is held at ``rotor_angle`` (the torque-arm rig
    pressing on a scale).  Otherwise the rotor integrates
    ``J*w' = tau - b*w + load_torque`` with semi-implicit Euler.
    """
    m = Motor(params, kp, ki, encoder, seed, ablate_id, rotor_angle)
    n = int(math.ceil(duration / dt - 1e-9))
    out = {k: np.empty(n) for k in ("t", "iq", "id", "iq_true", "id_true", "uq", "ud", "tau", "theta", "omega")}
    J, b = m.params.rotor_inertia, m.params.viscous_friction
    s = m.state
    for k in range(n):
        tau = m.step(desired_torque, dt)
        if not locked:
            s.rotor_speed += (tau - b * s.rotor_speed + load_torque) / J * dt
            s.rotor_angle += s.rotor_speed * dt
        out["t"][k] = (k + 1) * dt
        out["iq"][k] = s.i_q_meas
        out["id"][k] = s.i_d_meas
        out["iq_true"][k] = s.i_q
        out["id_true"][k] = s.i_d
        out["uq"][k] = s.u_q
        out["ud"][k] = s.u_d
        out["tau"][k] = tau
        out["theta"][k] = s.rotor_angle
        out["omega"][k] = s.rotor_speed
    return out


def write_motor_trace_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(Motor.TRACE_COLUMNS)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
