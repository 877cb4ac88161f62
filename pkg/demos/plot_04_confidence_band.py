"""
A calibrated uniform band
=========================

Simulate the normalized sup deviation ``B_n sup |f_n - f|`` many times,
fit a tail envelope to it, then turn the envelope into a constant-width
band around a fresh estimate.
"""
from wwdensity import BandwidthPlan, Grid, GridEstimate, ww_on_grid
from wwdensity.confidence import build_band, calibrate_tail, coverage_check
from wwdensity.simulation import DensitySpec, kernel_from_config, run_tail_experiment, sample_density

n = 2048
config = {"density": {"family": "gaussian"}, "plan": {"beta": 2.0}, "n": n,
          "replicates": 500, "seed": 1}
calibration = run_tail_experiment(config)
model = calibrate_tail(calibration.deviations, confidence=0.999)
print(f"envelope C={model.C:.3f} s={model.s:.4f}")

# Same grid and kernel as the experiment defaults.
truth = DensitySpec.gaussian()
plan = BandwidthPlan(2.0)
kernel = kernel_from_config({}, plan)
grid = Grid.for_plan([-3.0], [3.0], plan, n)
f = truth.pdf(grid.points())

# Coverage is a frequency statement: any single sample may still escape.
for seed in (99, 100, 101):
    x = sample_density(truth, seed=seed, n=n)
    est = GridEstimate(grid, plan, kernel, values=ww_on_grid(x, grid, plan, kernel), n=n)
    for alpha in (0.1, 0.05):
        band = build_band(est, model, alpha)
        cov = coverage_check(band, f)
        print(f"seed={seed} alpha={alpha:<4} half-width {band.half_width:.4f} "
              f"covers truth: {cov.covered}")
