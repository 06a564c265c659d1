"""Cached simulation results shared by the test modules."""

import copy
import functools

import numpy as np

from qddsim.scenarios import get_preset, simulate

# criterion number -> (passed, title, detail), printed at the end of the session
ACCEPTANCE: dict = {}


@functools.lru_cache(maxsize=None)
def preset_result(name):
    return simulate(get_preset(name))


@functools.lru_cache(maxsize=None)
def press_dt_halving_gap():
    """Final tip distance between the press run and the same run at half the step (noise off)."""
    base = copy.deepcopy(get_preset("press"))
    # a per-step noise stream cannot be matched across step sizes
    base.plant.motor.current_noise_std = 0.0
    base.plant.motor.voltage_noise_std = 0.0
    half = copy.deepcopy(base)
    half.plant.inner_dt = base.plant.inner_dt / 2
    half.plant.ratio = base.plant.ratio * 2
    a, b = simulate(base).trace, simulate(half).trace
    pa = np.array([a.column("f0_true_x_m")[-1], a.column("f0_true_y_m")[-1]])
    pb = np.array([b.column("f0_true_x_m")[-1], b.column("f0_true_y_m")[-1]])
    return float(np.hypot(*(pa - pb)))
