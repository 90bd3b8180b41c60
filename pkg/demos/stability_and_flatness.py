# %% [markdown]
# # Stability probes and flatness
#
# Probes search for trajectories that leave an `epsilon` ball.  Finding one is
# a counterexample; finding none within the budget is reported as such.

# %%
import numpy as np

from dstab.catalog import get_problem, orthogonal_conjugate, rotation
from dstab.flatness import flatness_profile, screen_flat_minima
from dstab.stability import (StabilityProbeConfig, estimate_subregularity, probe_attractor,
                             probe_point_stability)

# %% [markdown]
# ## Flat against sharp minima of `(xy - 1)^2`
#
# Both points are global minima.  Only the flatter one keeps nearby iterates close.

# %%
p = get_problem("monomial:u=1,1")
cfg = StabilityProbeConfig(0.05, (0.01, 0.02), (0.005, 0.01), N_init=2, K=20000)
for at in ((1.0, 1.0), (2.0, 0.5)):
    rep = probe_point_stability(p, p.descent(), np.array(at), cfg)
    print(at, rep.verdict, f"worst margin {rep.worst_margin:.3g}")

# %% [markdown]
# ## Attractors from random starts

# %%
for pid, pexp in (("flat4", 4.0), ("ellipse:a=2,b=1", 2.0)):
    q = get_problem(pid)
    n = q.notes["attractor_probe"]
    rep = probe_attractor(q, q.descent(), q.attractor, pexp,
                          lambda rng, m, q=q: q.sample("basin", rng, m), 0.2, 30, n["K"],
                          c=n["c"], cap=n["cap"])
    print(pid, rep.verdict, f"hit rate {rep.stats['hit_rate']:.0%}")

# %% [markdown]
# ## Subregularity exponents
#
# For `|x|^(2m)` the fitted exponent should be `1/(2m-1)`.

# %%
radii = np.geomspace(1e-3, 1e-1, 5)
for m in (1, 2, 3):
    q = get_problem(f"power:m={m}")
    fit = estimate_subregularity(q, q.minima, np.zeros(1), radii, 40)
    print(f"m = {m}: tau = {fit.tau:.4f}, expected {1 / (2 * m - 1):.4f}")

# %% [markdown]
# ## Flatness along the parabola valley
#
# Profiles grow like `(4t^2 + 1) r^2` at `(t, t^2)`, so the origin is flattest
# and the ranking follows `|t|`.  A rotated copy of the problem ranks the same points.

# %%
par = get_problem("parabola")
for t in (0.0, 0.5, 1.0):
    prof = flatness_profile(par, np.array([t, t * t]), radii)
    print(f"t = {t}: profile / r^2 = {np.round(prof.values / radii ** 2, 3)}")

t = np.linspace(-1, 1, 41)
grid = np.column_stack([t, t * t])
ranked = screen_flat_minima(par, grid, 0, radii)
print("top five t:", [float(r.point[0]) for r in ranked[:5]])
U = rotation(np.pi / 6)
rot = screen_flat_minima(orthogonal_conjugate(par, U), grid @ U, 0, radii)
print("same order after rotation:",
      [round(abs(float((U @ r.point)[0])), 9) for r in rot] ==
      [round(abs(float(r.point[0])), 9) for r in ranked])
