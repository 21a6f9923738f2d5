"""
Escaping a strict saddle
========================

The test function ``1/2 sum_i lam_i w_i^2 + 1/4 ||w||^4`` with one negative
eigenvalue has a strict saddle at the origin.  Started exactly there,
gradient steps never move.  Injected Gaussian noise pushes the iterate onto
the unstable direction, and more noise gets it there sooner.
"""

# %%
from ntsgd.experiments import escape_experiment
from ntsgd.objectives import SaddleSpec
from ntsgd.optim import OptimizerConfig, StepSchedule

spec = SaddleSpec.standard(10, negative=-1.0, positive=1.0, quartic=1.0)
print("eigenvalues", spec.eigenvalues, " lowest reachable loss", spec.lower_bound())

cfg = OptimizerConfig(cut_rate=0.1, schedule=StepSchedule.constant(0.05))
res = escape_experiment(spec, [0.0, 1e-4, 1e-3, 1e-2], cfg, range(50), loss_drop=0.1)

# %%
print("sigma     escaped  median steps")
for sigma, n, n_esc, rate, med in res.summary.rows():
    print(f"{sigma:<9g} {n_esc:3d}/{n}   {med}")

# %%
# Without noise every run stops at the first step: the iterate is a bitwise
# fixed point.
print(set(res.runs.column("outcome")[:50]))
