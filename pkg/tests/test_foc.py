import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qddsim.foc import (CLARKE_GAIN, EncoderModel, MotorParams, MotorState, PIGains, clarke,
                        encoder_read, foc_step, inverse_clarke, inverse_park, kt_from_kv, park,
                        run_motor_bench)

SQRT3 = math.sqrt(3.0)
finite = st.floats(-100.0, 100.0, allow_nan=False)
angle = st.floats(-50.0, 50.0, allow_nan=False)


def test_kt_from_kv():
    # frozen: 60 / (2 pi 360)
    assert kt_from_kv(360.0) == pytest.approx(0.026525823848649224, rel=1e-15)
    assert MotorParams().kt == pytest.approx(0.0265, abs=5e-5)


def test_clarke_examples():
    assert clarke((0.0, 0.0, 0.0)) == (0.0, 0.0)
    np.testing.assert_allclose(clarke((1.0, -0.5, -0.5)), (1.5, 0.0), atol=1e-12)
    np.testing.assert_allclose(clarke((0.0, 1.0, -1.0)), (0.0, SQRT3), atol=1e-12)


def test_park_examples():
    np.testing.assert_allclose(park((1.0, 2.0), 0.0), (1.0, 2.0), atol=1e-12)
    np.testing.assert_allclose(park((1.0, 0.0), math.pi / 2), (0.0, -1.0), atol=1e-12)


def test_inverse_park_examples():
    np.testing.assert_allclose(inverse_park((1.0, 0.0), 0.0), (1.0, 0.0), atol=1e-12)
    np.testing.assert_allclose(inverse_park((0.0, 1.0), math.pi / 2), (-1.0, 0.0), atol=1e-12)
    np.testing.assert_allclose(park(inverse_park((0.3, -0.7), 1.234), 1.234), (0.3, -0.7),
                               atol=1e-12)


def test_inverse_clarke_examples():
    assert inverse_clarke((0.0, 0.0)) == (0.0, 0.0, 0.0)
    np.testing.assert_allclose(inverse_clarke((1.5, 0.0)), (1.5, -0.75, -0.75), atol=1e-12)
    np.testing.assert_allclose(inverse_clarke((0.0, SQRT3)), (0.0, 1.5, -1.5), atol=1e-12)


@settings(max_examples=1000, deadline=None)
@given(finite, finite, angle)
def test_pipeline_identity_on_balanced_triples(a, b, theta):
    abc = (a, b, -a - b)
    ab = clarke(abc)
    ab = (CLARKE_GAIN * ab[0], CLARKE_GAIN * ab[1])
    out = inverse_clarke(inverse_park(park(ab, theta), theta))
    np.testing.assert_allclose(out, abc, atol=1e-12 * max(1.0, abs(a), abs(b)), rtol=0)


@settings(max_examples=1000, deadline=None)
@given(finite, finite, angle)
def test_park_preserves_norm(x, y, theta):
    d, q = park((x, y), theta)
    assert abs(math.hypot(d, q) - math.hypot(x, y)) <= 1e-12 * max(1.0, math.hypot(x, y))


@given(finite, finite)
def test_inverse_clarke_sums_to_zero(x, y):
    assert abs(sum(inverse_clarke((x, y)))) <= 1e-12 * max(1.0, abs(x), abs(y))


def test_encoder_examples():
    enc = EncoderModel(16384)
    assert encoder_read(0.0, enc) == 0.0
    step = 2 * math.pi / 16384
    assert encoder_read(step * 3 + 1e-9, enc) == pytest.approx(step * 3, abs=1e-15)
    assert encoder_read(math.pi, EncoderModel(4)) == pytest.approx(math.pi, abs=1e-15)


@settings(max_examples=500, deadline=None)
@given(st.floats(-100.0, 100.0), st.integers(1, 1 << 16), st.floats(-1.0, 1.0))
def test_encoder_error_bound(a, cpr, offset):
    enc = EncoderModel(cpr, offset)
    err = a - encoder_read(a, enc)
    assert -1e-12 <= err < 2 * math.pi / cpr


def test_pi_anti_windup():
    pi = PIGains(0.5, 300.0, 1.0)
    rng = np.random.default_rng(1)
    for e in rng.normal(0.0, 50.0, 2000):
        out = pi.update(float(e), 1e-4)
        assert abs(pi.integrator_state) <= 1.0
        assert abs(out) <= 1.0


def test_zero_torque_stays_at_rest():
    out = run_motor_bench(0.0, 0.05)
    assert np.all(out["iq_true"] == 0.0)
    assert np.all(out["id_true"] == 0.0)
    assert np.all(out["tau"] == 0.0)


def test_zero_torque_with_cogging_outputs_only_cogging():
    p = MotorParams(cogging_amplitude=0.002)
    out = run_motor_bench(0.0, 0.01, params=p, rotor_angle=0.3)
    np.testing.assert_allclose(out["tau"], 0.002 * math.sin(84 * 0.3), atol=1e-15)


def test_locked_rotor_steady_state():
    p = MotorParams()
    out = run_motor_bench(0.05, 0.1, params=p)
    iq = out["iq_true"][-1]
    assert iq == pytest.approx(0.05 / p.kt, rel=1e-6)
    assert abs(out["id_true"][-1]) < 0.01 * iq
    # analytic dq steady state at standstill: u_q = R i_q
    assert out["uq"][-1] == pytest.approx(p.R * iq, rel=1e-6)


def _noisy():
    return MotorParams(current_noise_std=0.005, voltage_noise_std=0.01)


def test_id_ablation_increases_variance():
    p = _noisy()
    on = run_motor_bench(0.1, 0.2, params=p, seed=3)["id_true"][1000:]
    off = run_motor_bench(0.1, 0.2, params=p, seed=3, ablate_id=True)["id_true"][1000:]
    assert off.std() > on.std()


def test_voltage_clamp():
    state = MotorState()
    p = MotorParams()
    gains = (PIGains(50.0, 1e5, p.voltage_limit), PIGains(50.0, 1e5, p.voltage_limit))
    for _ in range(50):
        foc_step(10.0, state, p, gains, 1e-4)
        assert math.hypot(state.u_d, state.u_q) <= p.voltage_limit + 1e-12


def test_rejects_non_finite_torque():
    with pytest.raises(ValueError):
        foc_step(float("nan"), MotorState(), MotorParams(), (PIGains(), PIGains()), 1e-4)


def test_phase_currents_balanced():
    state = MotorState(rotor_angle=0.7)
    p = MotorParams()
    gains = (PIGains(), PIGains())
    for _ in range(20):
        foc_step(0.05, state, p, gains, 1e-4)
        assert abs(sum(state.i_abc)) < 1e-12
        assert abs(sum(state.u_abc)) < 1e-12


def test_free_rotor_spins_up():
    out = run_motor_bench(0.02, 0.05, locked=False)
    assert out["omega"][-1] > 0.0
