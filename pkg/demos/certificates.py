# %% [markdown]
# # Decrease certificates
#
# Sampled checks that an auxiliary function `g` decreases along every Euler
# step of the descent field.  A certificate is only ever falsified: a pass
# means no counterexample was found in the sampled region.

# %%
import numpy as np

from dstab.catalog import get_problem
from dstab.core import RegionError
from dstab.lyapunov import (calibrate_p_dL, calibrate_pq_dL, check_conserved_many,
                            check_second_order, estimate_zeta, verify_dL, verify_p_dL,
                            verify_pq_dL)

# %% [markdown]
# ## Calibrating the decrease rate
#
# The calibration measures the smallest observed ratio of decrease to
# `alpha^p` and halves it.  The calibrated `omega` passes by construction;
# twice the raw value should fail, which shows the calibration is tight.

# %%
for pid in ("ellipse:a=2,b=1", "parabola"):
    p = get_problem(pid)
    F = p.descent()
    region = lambda rng, m, p=p: p.sample("lyapunov", rng, m)
    cal = calibrate_p_dL(p.g, F, region, 2.0, 0.1, 200, 12)
    ok = verify_p_dL(p.g, F, region, 2.0, cal.omega, cal.alpha_bar, 200, 12)
    bad = verify_p_dL(p.g, F, region, 2.0, 2 * cal.omega_raw, cal.alpha_bar, 200, 12)
    print(f"{pid}: omega = {cal.omega:.4g} at alpha_bar = {cal.alpha_bar:.3g}: "
          f"{ok.report.verdict}; at 2*omega_raw: {bad.report.verdict}")

# %% [markdown]
# ## Two-step decrease near a flat valley
#
# On `f = y^2 + x^2 y^4` with `g = |x|` a step never increases `g`, but some
# steps leave it unchanged, so no one-step rate `omega alpha^4` exists.  Over
# every pair of steps the decrease has a positive rate.

# %%
p = get_problem("flat4")
F = p.descent()
region = lambda rng, m: p.sample("lyapunov", rng, m)
print("non-increase:", verify_dL(p.g, F, region, 0.1, 100, 8).report.verdict)
try:
    calibrate_p_dL(p.g, F, region, 4.0, 0.1, 100, 8)
except RegionError as exc:
    print("one-step rate:", exc)
cal = calibrate_pq_dL(p.g, F, region, 4.0, 2, 0.1, 100)
cert = verify_pq_dL(p.g, F, region, 4.0, 2, cal.omega, cal.alpha_bar, 100)
print(f"(4,2): omega = {cal.omega:.3g}, {cert.report.verdict}")

# %% [markdown]
# ## Conserved quantities
#
# Each quantity's gradient is orthogonal to every field direction, so it is
# constant along the continuous flow.

# %%
for pid in ("parabola", "monomial:u=1,2,3", "l1-3d", "rank1"):
    p = get_problem(pid)
    reps = check_conserved_many(p.conserved, p.descent(),
                                lambda rng, m, p=p: p.sample("box", rng, m), 2000)
    for C, rep in zip(p.conserved, reps):
        print(f"{pid:>18}  {C.name:<22} max |<grad C, u>| = {rep.worst_margin:.1e}")

# %% [markdown]
# ## Second-order drift and the annulus constant
#
# On the parabola the second-order change of `g` along the flow vanishes at
# the origin and is negative elsewhere on the valley.  On the annulus
# `0 < f <= 0.04` within distance 1 of the attractor, the smallest gradient
# norm is `2 sqrt(0.02)`, reached at `x = 0`.

# %%
p = get_problem("parabola")
for t in (0.0, 0.5, 1.0):
    s, ok = check_second_order(p.g, p.descent(), np.array([t, t * t]), 0.1, 200, 0)
    print(f"t = {t}: s2 = {s:.4g}")
zeta = estimate_zeta(p, 0.04, p.attractor, 1.0, 2000)
print(f"zeta estimate {zeta:.5f} vs 2*sqrt(0.02) = {2 * np.sqrt(0.02):.5f}")
