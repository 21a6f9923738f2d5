"""
Stable rank of a saddle Hessian
===============================

The stable rank of ``(I - eta H)^(2 tau)`` counts the directions that still
carry weight after ``tau`` steps near a saddle.  It starts at the dimension
and collapses to the number of escape directions as ``tau`` grows.
"""

# %%
import numpy as np

from ntsgd.experiments import TheoryConstants, escape_prescription, stable_rank

H = np.diag([-1.0] + [1.0] * 9)
for tau in (0, 1, 5, 10, 50, 200):
    print(f"tau={tau:<4d} stable rank {stable_rank(H, 0.1, tau).value:.4f}")

# %%
# Two negative directions leave two surviving directions.
H2 = np.diag([-1.0, -1.0] + [0.5] * 8)
print("two escape directions:", round(stable_rank(H2, 0.1, 200).value, 6))

# %%
# Suggested parameters for given (measured or assumed) constants.
p = escape_prescription(TheoryConstants(G_hat=0.05, L_hat=1.0), H, 0.05, 100)
for k, v in p.items():
    print(f"{k:16s} {v}")
