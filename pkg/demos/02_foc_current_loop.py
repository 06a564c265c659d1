"""Field-oriented current control of one BLDC motor.

A locked rotor receives a torque command. The q-axis PI loop drives i_q to
tau / k_t while the d-axis loop holds i_d at zero. Switching the d-axis loop
off (U_d = 0) leaves i_d to wander with the sensor and voltage noise.
"""
# %%
import numpy as np

from qddsim.foc import MotorParams, kt_from_kv, run_motor_bench

p = MotorParams(current_noise_std=0.005, voltage_noise_std=0.01)
print(f"k_t = {kt_from_kv(p.kv):.6f} N m/A")

# %%
on = run_motor_bench(0.1, 0.3, params=p, seed=1)
off = run_motor_bench(0.1, 0.3, params=p, seed=1, ablate_id=True)
half = len(on["iq_true"]) // 2
print(f"steady i_q {on['iq_true'][half:].mean():.4f} A (target {0.1 / p.kt:.4f} A)")
print(f"i_d std with loop    {on['id_true'][half:].std():.2e} A")
print(f"i_d std without loop {off['id_true'][half:].std():.2e} A")

# %% Torque follows current linearly with slope k_t.
iq, tau = [], []
for cmd in np.linspace(0.01, 0.1, 10):
    out = run_motor_bench(cmd, 0.05, params=MotorParams())
    iq.append(out["iq_true"][-1])
    tau.append(out["tau"][-1])
print(f"fitted slope {np.polyfit(iq, tau, 1)[0]:.6f} N m/A")
