"""Uniform confidence bands from a calibrated tail envelope.

If ``P(B_n sup_D |f_n - f| > u) <= alpha`` then ``f`` lies within
``f_n ± u / B_n`` on all of ``D`` with probability at least ``1 - alpha``.
The envelope ``C nu(u / (e s))`` is fitted to Monte Carlo replicates of the
normalized sup deviation and inverted for ``u``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize, stats

from .estimators import Grid, GridEstimate
from .gls import TailModel, log_nu, nu_quantile

__all__ = [
    "ConfidenceBand",
    "Coverage",
    "empirical_survival",
    "calibrate_tail",
    "envelope_domination",
    "log_survival_trend",
    "build_band",
    "coverage_check",
]


def empirical_survival(deviations):
    """Distinct sorted values u and the fraction of replicates strictly above each."""
    dev = np.sort(np.asarray(deviations, dtype=float))
    u, counts = np.unique(dev, return_counts=True)
    above = dev.size - np.cumsum(counts)
    return u, above / dev.size


def _envelope_constant(u, surv, s):
    """Smallest C with C nu(u/(e s)) >= surv on in-domain knots, and the gap."""
    z = u / (math.e * s)
    mask = (z >= math.e) & (surv > 0)
    if mask.sum() < 2:
        return math.inf, math.inf, mask
    lnu = log_nu(z[mask])
    lsurv = np.log(surv[mask])
    log_c = float(np.max(lsurv - lnu))
    gap = float(np.mean((log_c + lnu - lsurv) ** 2))
    # tiny scales give astronomically large C; keep the gap, cap the constant.
    # The relative bump absorbs exp/log rounding so the binding knot stays covered.
    return (math.exp(log_c) * (1 + 1e-12) if log_c < 700 else math.inf), gap, mask


def calibrate_tail(deviations, reach: float = 0.5, scale: float | None = None,
                   confidence: float | None = None, n_scales: int = 200,
                   decades: float = 2.0) -> TailModel:
    """Fit the tightest ν-shaped upper envelope to an empirical survival curve.

    Candidate scales are ``s_max * 10**(-decades * j / n_scales)``, where the
    domain edge ``e² s_max`` is the first knot whose survival is at most
    ``reach``; every such knot is thus constrained and levels up to about
    ``reach`` stay invertible. For each scale ``C`` is the envelope minimum
    over in-domain knots. The scale with the smallest mean squared log gap
    between envelope and survival wins, refined by bounded Brent search.
    Passing ``scale`` skips the search.

    With ``confidence`` set, the envelope is fitted to the one-sided
    Clopper-Pearson upper limit of each knot's survival instead of the raw
    fraction, so it keeps dominating fresh replicates of the same size.
    """
    dev = np.asarray(deviations, dtype=float)
    if dev.size < 100:
        raise ValueError(f"need at least 100 replicates, got {dev.size}")
    if np.any(dev <= 0) or not np.all(np.isfinite(dev)):
        raise ValueError("deviations must be positive and finite")
    if np.all(dev == dev[0]):
        raise ValueError("degenerate deviations: all replicates are equal")
    u, surv = empirical_survival(dev)
    target = surv
    if confidence is not None:
        if not 0 < confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        k = np.round(surv * dev.size)
        target = np.where(k < dev.size,
                          stats.beta.ppf(confidence, k + 1, np.maximum(dev.size - k, 1)), 1.0)

    if scale is not None:
        C, _, _ = _envelope_constant(u, target, scale)
        if not math.isfinite(C):
            raise ValueError("fewer than two knots inside the tail domain for this scale")
        return TailModel(C, float(scale))

    anchor = u[np.argmax(surv <= reach)]
    s_max = anchor / math.e**2
    # search on r = s / s_max so that rescaled data give rescaled fits exactly
    r_grid = 10.0 ** (-decades * np.arange(n_scales) / (n_scales - 1))
    u_rel = u / s_max

    def gap(r):
        return _envelope_constant(u_rel, target, r)[1]

    gaps = np.array([gap(r) for r in r_grid])
    if not np.isfinite(gaps).any():
        raise ValueError("no scale leaves two knots inside the tail domain")
    i = int(np.argmin(gaps))
    r_best, g_best = r_grid[i], gaps[i]
    lo, hi = r_grid[min(i + 1, n_scales - 1)], r_grid[max(i - 1, 0)]
    if hi > lo:
        res = optimize.minimize_scalar(gap, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-10})
        if res.fun < g_best:
            r_best = float(res.x)
    C, _, _ = _envelope_constant(u_rel, target, r_best)
    model = TailModel(C, float(r_best * s_max))
    # envelope must sit on or above every in-domain knot
    z = u / (math.e * model.s)
    inside = z >= math.e
    assert np.all(model.tail_bound(u[inside]) >= surv[inside])
    return model


def log_survival_trend(deviations, points: int = 8, min_count: int = 10):
    """Shape of the empirical log-survival over the upper half of the data.

    The survival is read at ``points`` evenly spaced values between the
    median and the value exceeded by ``min_count`` replicates. Returns
    whether log-survival strictly decreases across them and the median of its
    second differences (negative for a concave trend).
    """
    dev = np.sort(np.asarray(deviations, dtype=float))
    u = np.linspace(np.median(dev), dev[dev.size - min_count - 1], points)
    surv = (dev.size - np.searchsorted(dev, u, side="right")) / dev.size
    with np.errstate(divide="ignore"):
        ls = np.log(surv)
    return bool(np.all(np.diff(ls) < 0)), float(np.median(np.diff(ls, 2)))


def envelope_domination(model: TailModel, deviations) -> tuple[float, int]:
    """Fraction of in-domain knots where the envelope is >= the empirical survival."""
    u, surv = empirical_survival(deviations)
    inside = u >= model.t_min
    if not inside.any():
        return 1.0, 0
    ok = model.tail_bound(u[inside]) >= surv[inside]
    return float(ok.mean()), int(inside.sum())


@dataclass(frozen=True)
class ConfidenceBand:
    grid: Grid
    lower: np.ndarray
    estimate: np.ndarray
    upper: np.ndarray
    alpha: float
    n: int
    B_n: float
    u_alpha: float
    model: TailModel

    @property
    def half_width(self) -> float:
        return self.u_alpha / self.B_n

    def metadata(self) -> dict:
        return {
            "alpha": self.alpha,
            "u_alpha": self.u_alpha,
            "B_n": self.B_n,
            "n": self.n,
            "model": self.model.to_dict(),
            "domain_box": self.grid.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.metadata(), indent=2, sort_keys=True)


def build_band(estimate: GridEstimate, model: TailModel, alpha: float) -> ConfidenceBand:
    """Constant-width band estimate ± u_α / B_n over the estimate's grid."""
    if estimate.n < 2:
        raise ValueError("band needs n >= 2")
    u_alpha = nu_quantile(model, alpha)
    B = estimate.plan.normalizer(estimate.n)
    w = u_alpha / B
    v = np.array(estimate.values, dtype=float)
    return ConfidenceBand(estimate.grid, v - w, v, v + w, alpha, estimate.n, B, u_alpha, model)


class Coverage(NamedTuple):
    covered: bool
    worst_violation: float


def coverage_check(band: ConfidenceBand, f_true) -> Coverage:
    """Whether ``f_true`` stays inside the band at every node."""
    f = np.asarray(f_true, dtype=float)
    if f.shape != band.estimate.shape:
        raise ValueError(f"shape mismatch {f.shape} vs {band.estimate.shape}")
    excess = np.maximum(band.lower - f, f - band.upper)
    worst = float(max(excess.max(), 0.0))
    return Coverage(worst == 0.0, worst)
