"""
Gradient truncation by energy
=============================

Truncation keeps the largest gradient coordinates until they carry at least
``1 - cut_rate`` of the squared norm and drops the rest.  The dropped part is
the residual, so the gradient splits exactly into two disjoint pieces.
"""

# %%
import numpy as np

from ntsgd.numerics import RngState
from ntsgd.truncation import gradient_truncate

g = np.array([3.0, 1.0, 2.0, 0.5])
r = gradient_truncate(g, 0.2)
print("gradient   ", g)
print("truncated  ", r.truncated)
print("residual   ", r.residual)
print("threshold  ", r.threshold, " sparsity", r.sparsity, " kept energy", round(r.kept_energy_ratio, 4))

# %%
# Heavy-tailed gradients are where truncation pays off: a handful of
# coordinates hold most of the energy.
rng = RngState(0)
g = rng.standard_normal(1000) ** 3
for cut in (0.0, 0.01, 0.1, 0.5, 0.9, 1.0):
    r = gradient_truncate(g, cut)
    print(f"cut_rate={cut:<5} keeps {r.n_kept:4d}/1000 coordinates, kept energy {r.kept_energy_ratio:.3f}")

# %%
# The kept sets are nested: a larger cut rate never keeps a coordinate that
# a smaller one dropped.
a, b = gradient_truncate(g, 0.1), gradient_truncate(g, 0.5)
print("nested:", bool(np.all(a.kept_mask[b.kept_mask])))
