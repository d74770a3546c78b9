"""Sparse versus dense higher-order PLS on one simulated data set.

The "square" design has 30 relevant covariates out of 240 and a 64 x 64
coefficient image whose nonzero part is a single square. With only 120
samples the dense fit smears signal over every pixel, while the sparse fit
recovers the square and ignores the noise covariates.

Run with ``python3 demos/sparse_vs_dense.py`` (a few seconds).
"""

import numpy as np

from tensorpls import (
    SimScenario, ThresholdSpec, estimation_error, generate, hopls_fit, prediction_error, shops_fit,
)
from tensorpls.simulate import draw

scenario = SimScenario(n=120)
data = generate(scenario, rng=7)
X, Y, B = data.X, data.Y, data.B
print(f"X is {X.shape}, Y is {Y.shape}, ||B|| = {np.linalg.norm(B):.2f}")

sparse = shops_fit(Y, X, K=3, spec=ThresholdSpec(nu=0.5), rng=7)
dense = hopls_fit(Y, X, K=3)

# Fresh data from the same design, for prediction error.
X_new, Y_new = draw(data.design, 500, 8)

for name, model in (("SHOPS", sparse), ("HOPLS", dense)):
    print(f"{name}: estimation error {estimation_error(model.B, B):7.3f}, "
          f"prediction error {prediction_error(model.B, X_new, Y_new):8.2f}")

# The noise floor: even the true B leaves the response noise behind.
print(f"true B: prediction error {prediction_error(B, X_new, Y_new):8.2f}")

# Which covariates did the sparse fit keep?
kept = sparse.cumulative[-1][0]
print(f"SHOPS kept {len(kept)} covariates: {np.sum(kept < 30)} of the 30 relevant ones "
      f"and {np.sum(kept >= 30)} noise covariates")

# A crude picture of the first coefficient slice, one character per 4 x 4 block.
img = np.abs(sparse.B[0]).reshape(16, 4, 16, 4).mean(axis=(1, 3))
for row in img:
    print("".join("#" if x > 0.5 * img.max() else "." for x in row))
