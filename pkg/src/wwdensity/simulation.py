"""Known-smoothness densities and seeded Monte Carlo experiments.

Every replicate ``r`` draws from its own generator
``SeedSequence(seed, spawn_key=(r,))``; replicates share no state and are
reduced in index order, so reports depend only on the configuration and not
on the number of worker threads.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, special

from .bandwidth import BandwidthPlan
from .confidence import (
    build_band,
    calibrate_tail,
    coverage_check,
    empirical_survival,
    envelope_domination,
)
from .estimators import (
    Grid,
    GridEstimate,
    expected_on_grid,
    lp_risk_estimate,
    pr_on_grid,
    sup_deviation,
    ww_on_grid,
)
from .gls import YoungWeight, nu_quantile, psi_risk
from .kernels import HolderClass, KernelSpec, build_higher_order_kernel, epanechnikov, gaussian

__all__ = [
    "DensitySpec",
    "ExperimentReport",
    "replicate_rng",
    "sample_density",
    "holder_constant",
    "fit_rate_slope",
    "run_rate_experiment",
    "run_tail_experiment",
    "run_coverage_experiment",
    "run_ww_vs_pr",
    "run_experiment",
]

_SQRT_2PI = math.sqrt(2 * math.pi)
_BOOTSTRAP_KEY = 2**31


@dataclass(frozen=True)
class DensitySpec:
    """Product-form test density on R^d.

    ``gaussian``/``gaussian_mixture``: components with per-axis means
    ``means[i]`` (length d) and isotropic scale ``sigmas[i]``.
    ``smooth_bump``: on each axis ``c (1 - u^2)^s`` over ``support``, with
    ``u`` the affine map to [-1, 1]; its (s-1)-th derivative is Lipschitz.
    """

    family: str = "gaussian"
    d: int = 1
    weights: tuple = (1.0,)
    means: tuple = ((0.0,),)
    sigmas: tuple = (1.0,)
    support: tuple = (-1.0, 1.0)
    smoothness: int = 3

    def __post_init__(self):
        if self.family not in ("gaussian", "gaussian_mixture", "smooth_bump"):
            raise ValueError(f"unsupported density family {self.family!r}")
        means = tuple(tuple(float(v) for v in np.broadcast_to(np.atleast_1d(m), (self.d,)))
                      for m in self.means)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if self.family != "smooth_bump":
            if not len(self.weights) == len(means) == len(self.sigmas):
                raise ValueError("weights, means and sigmas must have equal length")
            if any(w < 0 for w in self.weights) or not math.isclose(sum(self.weights), 1.0):
                raise ValueError("mixture weights must be nonnegative and sum to 1")
            if any(s <= 0 for s in self.sigmas):
                raise ValueError("sigmas must be positive")
        elif self.smoothness < 1 or not self.support[1] > self.support[0]:
            raise ValueError("bump needs smoothness >= 1 and a nondegenerate support")

    @classmethod
    def gaussian(cls, mu=0.0, sigma=1.0, d=1):
        return cls("gaussian", d, (1.0,), (mu,), (sigma,))

    @classmethod
    def mixture(cls, weights, mus, sigmas, d=1):
        return cls("gaussian_mixture", d, tuple(weights), tuple(mus), tuple(sigmas))

    @classmethod
    def smooth_bump(cls, a=-1.0, b=1.0, smoothness=3, d=1):
        return cls("smooth_bump", d, support=(a, b), smoothness=smoothness)

    def _bump_const(self) -> float:
        s = self.smoothness
        a, b = self.support
        mass = math.sqrt(math.pi) * math.exp(special.gammaln(s + 1) - special.gammaln(s + 1.5))
        return 2.0 / ((b - a) * mass)

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.d == 1 else x[None, :]
        if self.family == "smooth_bump":
            a, b = self.support
            u = (2 * x - a - b) / (b - a)
            per = np.where(np.abs(u) < 1, (1 - u * u) ** self.smoothness, 0.0)
            return np.prod(per * self._bump_const(), axis=1)
        out = np.zeros(x.shape[0])
        for w, mu, s in zip(self.weights, self.means, self.sigmas):
            if w == 0:
                continue
            z = (x - np.asarray(mu)) / s
            out += w * np.exp(-0.5 * np.sum(z * z, axis=1)) / (_SQRT_2PI * s) ** self.d
        return out

    def derivative_1d(self, x, order: int) -> np.ndarray:
        """order-th derivative of a univariate density."""
        if self.d != 1:
            raise ValueError("derivatives are provided for univariate densities only")
        x = np.asarray(x, dtype=float)
        if self.family == "smooth_bump":
            a, b = self.support
            u = (2 * x - a - b) / (b - a)
            poly = np.polynomial.Polynomial([1.0, 0.0, -1.0]) ** self.smoothness
            dp = poly.deriv(order) if order else poly
            scale = self._bump_const() * (2.0 / (b - a)) ** order
            return np.where(np.abs(u) < 1, dp(u) * scale, 0.0)
        out = np.zeros_like(x)
        herm = np.zeros(order + 1)
        herm[order] = 1.0
        for w, mu, s in zip(self.weights, self.means, self.sigmas):
            z = (x - mu[0]) / s
            phi = np.exp(-0.5 * z * z) / _SQRT_2PI
            out += w * (-1) ** order * np.polynomial.hermite_e.hermeval(z, herm) * phi / s ** (order + 1)
        return out

    def to_dict(self) -> dict:
        if self.family == "smooth_bump":
            return {"family": self.family, "d": self.d, "support": list(self.support),
                    "smoothness": self.smoothness}
        return {"family": self.family, "d": self.d, "weights": list(self.weights),
                "means": [list(m) for m in self.means], "sigmas": list(self.sigmas)}

    @classmethod
    def from_dict(cls, data: dict) -> "DensitySpec":
        fam = data.get("family", "gaussian")
        d = int(data.get("d", 1))
        if fam == "smooth_bump":
            a, b = data.get("support", (-1.0, 1.0))
            return cls.smooth_bump(a, b, int(data.get("smoothness", 3)), d)
        if fam == "gaussian" and ("mu" in data or "sigma" in data):
            return cls.gaussian(data.get("mu", 0.0), data.get("sigma", 1.0), d)
        return cls(fam, d, tuple(data.get("weights", (1.0,))), tuple(data.get("means", ((0.0,),))),
                   tuple(data.get("sigmas", (1.0,))))


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate,)))


def sample_density(spec: DensitySpec, seed: int, n: int, replicate: int = 0) -> np.ndarray:
    """n i.i.d. draws as an (n, d) array; a pure function of its arguments."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = replicate_rng(seed, replicate)
    if spec.family == "smooth_bump":
        a, b = spec.support
        t = rng.beta(spec.smoothness + 1, spec.smoothness + 1, size=(n, spec.d))
        return a + (b - a) * t
    comp = rng.choice(len(spec.weights), size=n, p=np.asarray(spec.weights))
    z = rng.standard_normal((n, spec.d))
    means = np.asarray(spec.means)
    sig = np.asarray(spec.sigmas)
    return means[comp] + sig[comp, None] * z


def holder_constant(spec: DensitySpec, beta: float, grid_points: int = 4001) -> float:
    """Hölder constant L of a univariate density for smoothness β.

    With ``r = ceil(β) - 1`` and ``γ = β - r ∈ (0, 1]``, L bounds
    ``|f^(r)(x) - f^(r)(y)| / |x - y|^γ``. For γ = 1 this is sup |f^(r+1)|,
    located on a grid and polished with a bounded search; otherwise the
    quotient is maximized over all grid pairs.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    r = math.ceil(beta) - 1
    gamma = beta - r
    if spec.family == "smooth_bump":
        if beta > spec.smoothness:
            raise ValueError(f"bump of smoothness {spec.smoothness} is not in the class beta={beta}")
        lo, hi = spec.support
    else:
        centers = [m[0] for m in spec.means]
        lo = min(centers) - 12 * max(spec.sigmas)
        hi = max(centers) + 12 * max(spec.sigmas)
    x = np.linspace(lo, hi, grid_points)
    if gamma == 1.0:
        vals = np.abs(spec.derivative_1d(x, r + 1))
        i = int(np.argmax(vals))
        a, b = x[max(i - 1, 0)], x[min(i + 1, x.size - 1)]
        res = optimize.minimize_scalar(lambda t: -abs(float(spec.derivative_1d(np.array(t), r + 1))),
                                       bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        return float(max(vals[i], -res.fun))
    g = spec.derivative_1d(x, r)
    step = x[1] - x[0]
    best = 0.0
    for m in range(1, x.size):
        q = np.abs(g[m:] - g[:-m]) / (m * step) ** gamma
        best = max(best, float(q.max()))
    return best


@dataclass
class ExperimentReport:
    """Monte Carlo results; ``runtime`` is kept out of the serialized form."""

    kind: str
    config: dict
    seed: int
    replicates: int
    deviations: list = field(default_factory=list)
    tail_curve: dict = field(default_factory=dict)
    rate_table: list = field(default_factory=list)
    slope: float | None = None
    slope_ci: list | None = None
    residuals: list = field(default_factory=list)
    coverage: float | None = None
    worst_violations: list = field(default_factory=list)
    psi_risks: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    runtime: float = 0.0

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "runtime"}
        return _plain(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_line(self) -> str:
        if self.kind == "rate":
            slope = "undefined" if self.slope is None else f"{self.slope:.4f}"
            return f"rate: slope={slope}"
        if self.kind == "coverage":
            return f"coverage: {self.coverage:.4f}"
        if self.kind == "compare":
            return f"compare: median WW/PR ratio={self.summary['median_ratio']:.4f}"
        return f"tail: median={self.summary['median']:.4f}"

    def write(self, out_dir) -> list:
        """Write report JSON plus CSV curves; returns the written paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{self.kind}_report.json"]
        paths[0].write_text(self.to_json() + "\n")
        if self.tail_curve:
            p = out / f"{self.kind}_tail_curve.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["u", "survival"])
                for u, s in zip(self.tail_curve["u"], self.tail_curve["survival"]):
                    w.writerow([repr(u), repr(s)])
            paths.append(p)
        if self.rate_table:
            p = out / f"{self.kind}_rate_table.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["n", "median_sup_error"])
                for row in self.rate_table:
                    w.writerow([row["n"], repr(row["median_sup_error"])])
            paths.append(p)
        return paths


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def worker_count(config: dict | None = None) -> int:
    """Threads used for replicates; WW_DENSITY_THREADS caps it. Never affects results."""
    n = (config or {}).get("workers") or os.cpu_count() or 1
    cap = os.environ.get("WW_DENSITY_THREADS")
    if cap:
        n = min(n, max(int(cap), 1))
    return max(int(n), 1)


def _map_replicates(fn, indices, workers: int) -> list:
    if workers <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices))


class _Setup:
    """Objects shared by all replicates of one experiment."""

    def __init__(self, config: dict, n_grid: int):
        self.density = DensitySpec.from_dict(config.get("density", {"family": "gaussian"}))
        self.plan = BandwidthPlan.from_dict(config.get("plan", {"beta": 2.0, "d": self.density.d}))
        if self.plan.d != self.density.d:
            raise ValueError("plan and density dimensions differ")
        self.kernel = kernel_from_config(config.get("kernel", {}), self.plan)
        dom = config.get("domain", {})
        lower = dom.get("lower", [-3.0] * self.plan.d)
        upper = dom.get("upper", [3.0] * self.plan.d)
        if config.get("grid_step"):
            self.grid = Grid.with_step(lower, upper, float(config["grid_step"]))
        else:
            self.grid = Grid.for_plan(lower, upper, self.plan, n_grid,
                                      step_factor=float(config.get("grid_step_factor", 0.25)))
        self.truth = self.density.pdf(self.grid.points()).reshape(self.grid.shape)
        self.seed = int(config.get("seed", 0))


def kernel_from_config(cfg: dict, plan: BandwidthPlan) -> KernelSpec:
    """Full kernel dict, or ``{"base": ..., "higher_order": bool}``."""
    if "poly_coeffs" in cfg:
        return KernelSpec.from_dict(cfg)
    base = epanechnikov() if cfg.get("base", "epanechnikov") == "epanechnikov" else gaussian()
    if cfg.get("higher_order", True):
        return build_higher_order_kernel(base, HolderClass(plan.beta))
    return base


def fit_rate_slope(n_list, errors):
    """Least-squares slope of log(error) against log(ln n / n), with residuals.

    Returns ``(None, [])`` when any error is nonpositive.
    """
    n = np.asarray(n_list, dtype=float)
    e = np.asarray(errors, dtype=float)
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        return None, []
    x = np.log(np.log(n) / n)
    y = np.log(e)
    slope, icept = np.polyfit(x, y, 1)
    return float(slope), (y - (slope * x + icept)).tolist()


def run_rate_experiment(config: dict) -> ExperimentReport:
    """Median sup error over replicates at each n, and its log-log slope."""
    t0 = time.perf_counter()
    n_list = [int(v) for v in config["n_list"]]
    if len(n_list) < 4 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing with at least 4 entries")
    reps = int(config.get("replicates", 100))
    estimator = config.get("estimator", "ww")
    report = ExperimentReport("rate", config, int(config.get("seed", 0)), reps)

    if estimator == "power_law":
        expo = float(config.get("power_law_exponent", 0.4))
        n = np.asarray(n_list, dtype=float)
        errs = np.tile((np.log(n) / n) ** expo, (reps, 1))
    else:
        setup = _Setup(config, n_list[-1])

        def one(r):
            if estimator == "truth":
                return [0.0] * len(n_list)
            x = sample_density(setup.density, setup.seed, n_list[-1], r)
            return [sup_deviation(ww_on_grid(x[:n], setup.grid, setup.plan, setup.kernel),
                                  setup.truth) for n in n_list]

        errs = np.array(_map_replicates(one, range(reps), worker_count(config)))

    med = np.median(errs, axis=0)
    report.rate_table = [{"n": n, "median_sup_error": float(m)} for n, m in zip(n_list, med)]
    report.slope, report.residuals = fit_rate_slope(n_list, med)
    if report.slope is None:
        report.flags.append("degenerate: nonpositive median errors, slope undefined")
    elif reps > 1 and estimator != "power_law":
        rng = np.random.default_rng(np.random.SeedSequence(report.seed, spawn_key=(_BOOTSTRAP_KEY,)))
        boots = []
        for _ in range(200):
            idx = rng.integers(0, reps, reps)
            s, _ = fit_rate_slope(n_list, np.median(errs[idx], axis=0))
            if s is not None:
                boots.append(s)
        if boots:
            report.slope_ci = [float(np.quantile(boots, 0.025)), float(np.quantile(boots, 0.975))]
    if estimator != "power_law":
        report.summary = {"target_exponent": setup.plan.rho}
    report.runtime = time.perf_counter() - t0
    return report


def _normalized_deviations(setup: _Setup, n: int, indices, centered: bool, workers: int,
                           keep_values: bool = False):
    reference = (expected_on_grid(setup.density, n, setup.grid, setup.plan, setup.kernel)
                 if centered else setup.truth)
    B = setup.plan.normalizer(n)

    def one(r):
        x = sample_density(setup.density, setup.seed, n, r)
        values = ww_on_grid(x, setup.grid, setup.plan, setup.kernel)
        dev = B * sup_deviation(values, reference)
        return (dev, values) if keep_values else dev

    return _map_replicates(one, indices, workers)


def _psi_risks(dev, weights) -> dict:
    out = {}
    for w in weights:
        weight = YoungWeight(w.get("rule", "power"), float(w.get("m", 2.0)))
        out[f"{weight.rule}:{weight.m:g}"] = psi_risk(dev, weight)
    return out


def _tail_summary(dev) -> dict:
    dev = np.asarray(dev)
    return {
        "median": float(np.median(dev)),
        "q90": float(np.quantile(dev, 0.9)),
        "q99": float(np.quantile(dev, 0.99)),
        "max": float(dev.max()),
    }


def run_tail_experiment(config: dict) -> ExperimentReport:
    """Empirical survival of B_n sup|f_n - ref| with ref = f or E f_n."""
    t0 = time.perf_counter()
    n = int(config["n"])
    reps = int(config.get("replicates", 200))
    if reps < 200:
        raise ValueError("tail experiment needs at least 200 replicates")
    centered = bool(config.get("centered", False))
    setup = _Setup(config, n)
    dev = np.array(_normalized_deviations(setup, n, range(reps), centered, worker_count(config)))
    u, surv = empirical_survival(dev)
    report = ExperimentReport("tail", config, setup.seed, reps, deviations=dev.tolist())
    report.tail_curve = {"u": np.concatenate([[0.0], u]).tolist(),
                         "survival": np.concatenate([[1.0], surv]).tolist()}
    report.summary = _tail_summary(dev) | {"B_n": setup.plan.normalizer(n), "centered": centered}
    report.psi_risks = _psi_risks(dev, config.get("young_weights", [{"rule": "power", "m": 2}]))
    report.runtime = time.perf_counter() - t0
    return report


def run_coverage_experiment(config: dict) -> ExperimentReport:
    """Calibrate the tail envelope on one replicate set, measure band coverage on another.

    Calibration uses replicate indices ``0..calib_reps-1`` and the holdout
    continues from ``calib_reps``. Setting ``holdout_is_calibration`` reuses
    the calibration replicates (a self-consistency check). ``transfer_n``
    additionally measures coverage at a second sample size with the same model.
    """
    t0 = time.perf_counter()
    n = int(config["n"])
    alpha = float(config.get("alpha", 0.1))
    calib = int(config.get("calib_reps", 500))
    hold = int(config.get("holdout_reps", 500))
    setup = _Setup(config, max(n, int(config.get("transfer_n", n))))
    workers = worker_count(config)
    centered = bool(config.get("centered", False))

    cal_dev = np.array(_normalized_deviations(setup, n, range(calib), centered, workers))
    model = calibrate_tail(cal_dev, reach=float(config.get("reach", 0.5)),
                           confidence=config.get("envelope_confidence", 0.999))

    def holdout(n_eval, start):
        idx = range(start, start + hold) if not config.get("holdout_is_calibration") else range(calib)
        pairs = _normalized_deviations(setup, n_eval, idx, False, workers, keep_values=True)
        covered, worst, devs = [], [], []
        for dev, values in pairs:
            est = GridEstimate(setup.grid, setup.plan, setup.kernel, values=values, n=n_eval)
            res = coverage_check(build_band(est, model, alpha), setup.truth)
            covered.append(res.covered)
            worst.append(res.worst_violation)
            devs.append(dev)
        return float(np.mean(covered)), worst, np.array(devs)

    coverage, worst, hold_dev = holdout(n, calib)
    report = ExperimentReport("coverage", config, setup.seed, calib + hold)
    report.coverage = coverage
    report.worst_violations = worst
    report.deviations = hold_dev.tolist()
    frac, knots = envelope_domination(model, hold_dev)
    report.summary = {
        "alpha": alpha,
        "model": model.to_dict(),
        "u_alpha": nu_quantile(model, alpha),
        "B_n": setup.plan.normalizer(n),
        "holdout_envelope_domination": frac,
        "holdout_knots_in_domain": knots,
    }
    if config.get("transfer_n"):
        tn = int(config["transfer_n"])
        report.summary["transfer_n"] = tn
        report.summary["transfer_coverage"] = holdout(tn, calib + hold)[0]
    u, surv = empirical_survival(cal_dev)
    report.tail_curve = {"u": u.tolist(), "survival": surv.tolist()}
    report.runtime = time.perf_counter() - t0
    return report


def run_ww_vs_pr(config: dict) -> ExperimentReport:
    """Paired sup and L_p errors of the recursive and the classical estimate."""
    t0 = time.perf_counter()
    n = int(config["n"])
    reps = int(config.get("replicates", 100))
    p = float(config.get("p", 2.0))
    setup = _Setup(config, n)

    def one(r):
        if config.get("estimator") == "truth":
            return (0.0, 0.0, 0.0, 0.0)
        x = sample_density(setup.density, setup.seed, n, r)
        ww = ww_on_grid(x, setup.grid, setup.plan, setup.kernel)
        pr = pr_on_grid(x, setup.grid, setup.plan, setup.kernel)
        return (sup_deviation(ww, setup.truth), sup_deviation(pr, setup.truth),
                lp_risk_estimate([ww - setup.truth], setup.grid, p),
                lp_risk_estimate([pr - setup.truth], setup.grid, p))

    rows = np.array(_map_replicates(one, range(reps), worker_count(config)))
    ratio = np.divide(rows[:, 0], rows[:, 1], out=np.ones(reps), where=rows[:, 1] > 0)
    report = ExperimentReport("compare", config, setup.seed, reps)
    report.summary = {
        "median_ratio": float(np.median(ratio)),
        "median_sup_ww": float(np.median(rows[:, 0])),
        "median_sup_pr": float(np.median(rows[:, 1])),
        f"median_L{p:g}_ww": float(np.median(rows[:, 2])),
        f"median_L{p:g}_pr": float(np.median(rows[:, 3])),
        "paired_sup": rows[:, :2].tolist(),
    }
    report.runtime = time.perf_counter() - t0
    return report


EXPERIMENTS = {
    "rate": run_rate_experiment,
    "tail": run_tail_experiment,
    "coverage": run_coverage_experiment,
    "compare": run_ww_vs_pr,
}


def run_experiment(config: dict) -> ExperimentReport:
    kind = config.get("experiment")
    if kind not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {kind!r}; expected one of {sorted(EXPERIMENTS)}")
    return EXPERIMENTS[kind](config)
