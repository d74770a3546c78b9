"""Choosing K and nu, then comparing methods over replicates.

Cross-validation fits one SHOPS model per fold and nu and reads every
smaller K off it. The benchmark then repeats the whole simulate-and-fit
cycle and reports means with standard deviations.

Run with ``python3 demos/tuning_and_benchmark.py`` (about a minute).
"""

from tensorpls import SimScenario, benchmark, cross_validate, elbow_K, generate
from tensorpls.metrics import format_table

data = generate(SimScenario(n=120), rng=1)

# The eigenvalue elbow of X'X gives a starting guess for K.
print("elbow K:", elbow_K(data.X))

cv = cross_validate(data.Y, data.X, K_max=4, nu_grid=[0.3, 0.5, 0.7], folds=5, rng=1)
print("mean held-out error (rows nu = 0.3, 0.5, 0.7, columns K = 1..4):")
print(cv.mean.round(2))
print(f"chosen K = {cv.best_K}, nu = {cv.best_nu}")

# Five replicates of two sample sizes. OLS is skipped because n <= p.
report = benchmark([SimScenario(n=120), SimScenario(n=240)], ["SHOPS", "HOPLS"],
                   replicates=5, seed=2024, K=3)
print(format_table(report.aggregate()))
