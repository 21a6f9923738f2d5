"""
Sparse training of a small network
==================================

Train a one-hidden-layer tanh network on synthetic 10-class blobs with
noisy truncated SGD over a grid of cut rates.  Sparsity climbs with the cut
rate while held-out accuracy barely moves until the cut gets aggressive.
"""

# %%
from ntsgd.datasets import synth_blobs, train_test_split
from ntsgd.experiments import sparsity_sweep
from ntsgd.numerics import RngState
from ntsgd.objectives import MLPObjective
from ntsgd.optim import OptimizerConfig, StepSchedule

full = synth_blobs(RngState(5), 3000, 20, 3.0, 10)
train, test = train_test_split(full, 1000, RngState(6))
net = MLPObjective(train, n_hidden=32, n_classes=10)
print(f"{train.n} training samples, {test.n} held out, {net.dim} parameters")

# %%
cfg = OptimizerConfig(sigma=1e-3, schedule=StepSchedule.constant(0.1), batch_size=100, horizon=1000,
                      record_every=250)
res = sparsity_sweep(net, test, [0.01, 0.1, 0.2, 0.5, 0.9], [1e-3], range(3), cfg, extra_cells=[(0.0, 0.0)])

print("cut_rate  sigma   sparsity  train_acc  test_acc")
for e, s, n_ok, sp, loss, tr, te in res.summary.rows():
    print(f"{e:<9} {s:<7} {sp:8.3f}  {tr:9.4f}  {te:8.4f}")
