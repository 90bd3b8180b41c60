# %% [markdown]
# # Figure runs
#
# The three reference trajectories of the normalized Euler scheme, with the
# convergence check used by `dstab reproduce`.  Each run takes 10^5 steps and
# writes an SVG of the iterates over contours of `f` and of the auxiliary `g`.
# Output goes to `demos/out/`.

# %%
import time
from pathlib import Path

import numpy as np

from dstab.cli import FIGURES, figure_check, run_figure
from dstab.svg import trajectory_svg

OUT = Path(__file__).resolve().parent / "out" if "__file__" in globals() else Path("out")
OUT.mkdir(exist_ok=True)

# %% [markdown]
# Step sizes follow `alpha_k = min(cap, c / (k+1)^(1/p))`.  The exponent `p`
# only needs `sum alpha_k^p` to diverge, so `p = 6` gives slowly shrinking steps.

# %%
for name, spec in FIGURES.items():
    t0 = time.perf_counter()
    problem, traj = run_figure(name)
    value, thr, ok = figure_check(name, problem, traj)
    (OUT / f"{name}.svg").write_text(trajectory_svg(problem, traj.points, title=name))
    print(f"{name}: {spec['problem']} from {spec['x0']}, check {value:.3e} <= {thr}: {ok}, "
          f"{time.perf_counter() - t0:.1f}s")

# %% [markdown]
# How fast `g` falls along the flat4 run: sampled every decade of `k`.

# %%
problem, traj = run_figure("fig1")
for k in 10 ** np.arange(6):
    k = min(int(k), len(traj) - 1)
    print(f"k = {k:>6}  g = {traj.g_values[k]:.3e}  x = {traj.points[k]}")
