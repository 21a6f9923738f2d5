"""
Gradient norm versus horizon
============================

With step size ``1/sqrt(T)`` the smallest squared gradient norm seen in a
run of ``T`` steps should shrink at least like ``1/sqrt(T)``.  Fit the
log-log slope on logistic regression with a tiny cut rate and noise.
"""

# %%
import math

from ntsgd.datasets import synth_blobs
from ntsgd.experiments import convergence_sweep
from ntsgd.numerics import RngState
from ntsgd.objectives import LogisticObjective
from ntsgd.optim import OptimizerConfig, StepSchedule

obj = LogisticObjective(synth_blobs(RngState(2024), 200, 5, 2.0))
cfg = OptimizerConfig(cut_rate=1e-4, sigma=math.sqrt(1e-6 / 5), schedule=StepSchedule.inv_sqrt_t(1.0),
                      batch_size=10)
res = convergence_sweep(obj, cfg, [100, 1000, 10000], range(5))

# %%
print("T       mean min |grad|^2   mean |grad(w_J)|^2")
for T, n_ok, n_div, sampled, best in res.summary.rows():
    print(f"{T:<7d} {best:.3e}           {sampled:.3e}")
print(f"slope (min over run): {res.slope_min:.2f}   slope (sampled iterate): {res.slope_sampled:.2f}")
