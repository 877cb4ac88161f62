"""
Reading off the convergence rate
================================

The median sup error should scale like ``(ln n / n)^(beta / (2 beta + d))``.
A log-log fit over a doubling sequence of sample sizes estimates that
exponent. Fewer replicates than the acceptance run keep this quick.
"""
from wwdensity.simulation import run_rate_experiment

report = run_rate_experiment({
    "density": {"family": "gaussian"},
    "plan": {"beta": 2.0},
    "kernel": {"base": "epanechnikov", "higher_order": True},
    "n_list": [2**k for k in range(10, 15)],
    "replicates": 30,
    "seed": 0,
})
for row in report.rate_table:
    print(f"n={row['n']:6d}  median sup error {row['median_sup_error']:.4f}")
print(f"fitted exponent {report.slope:.3f}  (target {report.summary['target_exponent']:.1f}), "
      f"bootstrap CI {report.slope_ci[0]:.3f}..{report.slope_ci[1]:.3f}")
