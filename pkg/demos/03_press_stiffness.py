"""Rendering a virtual spring at the fingertip.

The `press` scenario drives the set-point of finger 0 into a stiff scale.
With impedance K = 100 N/m the contact force grows along F = K d, then
saturates once the current cap is reached.
"""
# %%
import numpy as np

from qddsim.scenarios import get_preset, simulate

res = simulate(get_preset("press"))
tr = res.trace
yd = tr.column("f0_yd_m")
d = np.abs(yd - yd[0])
f = tr.column("f0_env_fn_N")

# %%
for target in (0.01, 0.02, 0.03, 0.04):
    k = int(np.argmin(np.abs(d - target)))
    print(f"d = {100 * d[k]:.1f} cm  F = {f[k]:.3f} N  (K d = {100 * d[k]:.3f} N)")
print(f"fitted slope {res.summary['press_slope_N_m']:.2f} N/m, peak force {f.max():.2f} N")
print("verdict:", "pass" if res.success else res.reason)
