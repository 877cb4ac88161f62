r"""Wolverton-Wagner recursive estimator, Parzen-Rosenblatt baseline.

The recursive estimate gives every observation its own window,

.. math::

    f_n(x) = \frac{1}{n} \sum_{k=1}^n h_k^{-d} K\!\left(\frac{x - \xi_k}{h_k}\right),

and therefore updates in one step, ``f_{n+1} = (n f_n + h_{n+1}^{-d}
K((x - \xi_{n+1})/h_{n+1})) / (n + 1)``, without touching earlier data.
:class:`GridEstimate` maintains that recursion on a fixed lattice over a
box ``D``; :func:`ww_batch` and :func:`ww_on_grid` evaluate the closed sum
directly and serve as oracles for the streaming path.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .bandwidth import BandwidthPlan
from .kernels import KernelSpec, QuadratureError

__all__ = [
    "Grid",
    "GridEstimate",
    "as_sample",
    "ww_update",
    "ww_batch",
    "pr_batch",
    "ww_on_grid",
    "pr_on_grid",
    "kernel_sum_on_grid",
    "expected_estimate",
    "expected_on_grid",
    "sup_deviation",
    "lp_risk_estimate",
]


def as_sample(sample, d: int | None = None) -> np.ndarray:
    """Coerce observations to a finite ``(n, d)`` float array."""
    arr = np.asarray(sample, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None] if d in (None, 1) else arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"sample must be 1-D or 2-D, got shape {arr.shape}")
    if d is not None and arr.shape[1] != d:
        raise ValueError(f"sample has dimension {arr.shape[1]}, expected {d}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample contains non-finite values")
    return arr


@dataclass(frozen=True)
class Grid:
    """Regular lattice covering the box ``[lower, upper]`` including its faces."""

    lower: tuple
    upper: tuple
    shape: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        shape = tuple(int(m) for m in np.atleast_1d(self.shape))
        if not (len(lo) == len(hi) == len(shape)):
            raise ValueError("lower, upper and shape must have the same length")
        if any(not b > a for a, b in zip(lo, hi)):
            raise ValueError("box must have upper > lower on every axis")
        if any(m < 2 for m in shape):
            raise ValueError("every axis needs at least 2 nodes")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def with_step(cls, lower, upper, step: float) -> "Grid":
        """Finest lattice whose per-axis spacing does not exceed ``step``."""
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if not step > 0:
            raise ValueError("grid step must be positive")
        # the 1e-9 slack keeps exact multiples (6 / 0.25) from gaining a node
        intervals = np.ceil((hi - lo) / step - 1e-9).astype(int)
        return cls(tuple(lo), tuple(hi), tuple(np.maximum(intervals, 1) + 1))

    @classmethod
    def for_plan(cls, lower, upper, plan: BandwidthPlan, n_final: int,
                 kernel: KernelSpec | None = None, step_factor: float = 0.25) -> "Grid":
        """Lattice with spacing at most ``step_factor * h_n`` for the final n."""
        h = plan.bandwidth_at(max(int(n_final), 1))
        return cls.with_step(lower, upper, step_factor * h)

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def axes(self) -> list:
        return [np.linspace(a, b, m) for a, b, m in zip(self.lower, self.upper, self.shape)]

    @property
    def steps(self) -> tuple:
        return tuple((b - a) / (m - 1) for a, b, m in zip(self.lower, self.upper, self.shape))

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in zip(self.lower, self.upper))

    def points(self) -> np.ndarray:
        """Nodes as an ``(N, d)`` array in C order of :attr:`shape`."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def trapezoid_weights(self) -> np.ndarray:
        per_axis = []
        for ax, h in zip(self.axes, self.steps):
            w = np.full(ax.size, h)
            w[0] = w[-1] = h / 2
            per_axis.append(w)
        return reduce(np.multiply.outer, per_axis)

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "shape": list(self.shape)}

    @classmethod
    def from_dict(cls, data: dict) -> "Grid":
        return cls(tuple(data["lower"]), tuple(data["upper"]), tuple(data["shape"]))


def _bump_on_grid(grid: Grid, kernel: KernelSpec, xi: np.ndarray, h: float) -> np.ndarray:
    """h^{-d} K((x - xi) / h) at every node, built as an outer product."""
    factors = [kernel.profile((ax - c) / h) / h for ax, c in zip(grid.axes, xi)]
    return reduce(np.multiply.outer, factors) if len(factors) > 1 else factors[0]


@dataclass
class GridEstimate:
    """Streaming recursive estimate maintained on a lattice.

    Only the node values and the count are kept. With ``memorize=True`` the
    observations are also retained so :meth:`evaluate` can serve off-grid
    points through the batch formula.
    """

    grid: Grid
    plan: BandwidthPlan
    kernel: KernelSpec
    values: np.ndarray = None
    n: int = 0
    memorize: bool = False
    _retained: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.grid.d != self.plan.d:
            raise ValueError(f"grid dimension {self.grid.d} != plan dimension {self.plan.d}")
        if self.values is None:
            self.values = np.zeros(self.grid.shape)
        else:
            self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
            if not np.all(np.isfinite(self.values)):
                raise ValueError("estimate values must be finite")
        if self.n < 0:
            raise ValueError("observation count must be nonnegative")

    @property
    def d(self) -> int:
        return self.grid.d

    def update(self, xi) -> "GridEstimate":
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if xi.shape != (self.d,):
            raise ValueError(f"observation has dimension {xi.size}, expected {self.d}")
        if not np.all(np.isfinite(xi)):
            raise ValueError("observation is not finite")
        k = self.n + 1
        bump = _bump_on_grid(self.grid, self.kernel, xi, self.plan.bandwidth_at(k))
        self.values = (self.n * self.values + bump) / k
        self.n = k
        if self.memorize:
            self._retained.append(xi)
        return self

    def extend(self, sample) -> "GridEstimate":
        for xi in as_sample(sample, self.d):
            self.update(xi)
        return self

    def evaluate(self, x) -> float:
        if not self.memorize:
            raise RuntimeError("off-grid evaluation needs memorize=True")
        if self.n == 0:
            raise ValueError("no observations yet")
        return ww_batch(np.array(self._retained), x, self.plan, self.kernel)

    def metadata(self) -> dict:
        return {
            "n": self.n,
            "plan": self.plan.to_dict(),
            "kernel": self.kernel.to_dict(),
            "domain_box": self.grid.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.metadata(), indent=2, sort_keys=True)


def ww_update(state: GridEstimate, xi) -> GridEstimate:
    """One recursive step; mutates and returns ``state``."""
    return state.update(xi)


def ww_batch(sample, x, plan: BandwidthPlan, kernel: KernelSpec) -> float:
    """Direct sum (1/n) Σ h_k^{-d} K((x - ξ_k)/h_k) at a single point."""
    pts = as_sample(sample, plan.d)
    n = pts.shape[0]
    if n == 0:
        raise ValueError("empty sample")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = np.atleast_1d(plan.bandwidth_at(np.arange(1, n + 1)))
    terms = np.prod(kernel.profile((x - pts) / h[:, None]), axis=1) / h**plan.d
    return math.fsum(terms) / n


def pr_batch(sample, x, plan: BandwidthPlan, kernel: KernelSpec) -> float:
    """Parzen-Rosenblatt estimate with the common window h_n."""
    pts = as_sample(sample, plan.d)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("Parzen-Rosenblatt estimate needs n >= 2")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = plan.pr_bandwidth(n)
    terms = np.prod(kernel.profile((x - pts) / h), axis=1)
    return math.fsum(terms) / (n * h**plan.d)


def kernel_sum_on_grid(points, h, grid: Grid, kernel: KernelSpec,
                       chunk: int = 4096) -> np.ndarray:
    """Σ_k h_k^{-d} K((x - ξ_k)/h_k) at every node.

    Compact 1-D kernels scatter into the few nodes each bump touches;
    otherwise per-axis factor matrices are contracted chunk by chunk.
    Chunks are reduced in a fixed order so results do not depend on threads.
    """
    pts = as_sample(points, grid.d)
    h = np.broadcast_to(np.asarray(h, dtype=float), (pts.shape[0],))
    if grid.d == 1 and math.isfinite(kernel.support_radius):
        return _sparse_sum_1d(pts[:, 0], h, grid, kernel)
    axes = grid.axes
    out = np.zeros(grid.shape)
    letters = "abcdefgh"[: grid.d]
    spec = ",".join("k" + c for c in letters) + "->" + letters
    for start in range(0, pts.shape[0], chunk):
        p = pts[start:start + chunk]
        hh = h[start:start + chunk, None]
        mats = [kernel.profile((ax[None, :] - p[:, [j]]) / hh) / hh for j, ax in enumerate(axes)]
        out += mats[0].sum(axis=0) if grid.d == 1 else np.einsum(spec, *mats)
    return out


def _sparse_sum_1d(xi, h, grid: Grid, kernel: KernelSpec) -> np.ndarray:
    lo, step, m = grid.lower[0], grid.steps[0], grid.shape[0]
    r = kernel.support_radius * h
    # one spare node per side; the profile itself is zero outside the support
    first = np.clip(np.ceil((xi - r - lo) / step) - 1, 0, m).astype(np.int64)
    last = np.clip(np.floor((xi + r - lo) / step) + 1, -1, m - 1).astype(np.int64)
    counts = np.maximum(last - first + 1, 0)
    owner = np.repeat(np.arange(xi.size), counts)
    offset = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    node = first[owner] + offset
    x = grid.axes[0][node]
    w = kernel.profile((x - xi[owner]) / h[owner]) / h[owner]
    return np.bincount(node, weights=w, minlength=m).astype(float)


def ww_on_grid(sample, grid: Grid, plan: BandwidthPlan, kernel: KernelSpec) -> np.ndarray:
    """Recursive estimate for the whole sample, evaluated at every node."""
    pts = as_sample(sample, plan.d)
    n = pts.shape[0]
    if n == 0:
        raise ValueError("empty sample")
    h = np.atleast_1d(plan.bandwidth_at(np.arange(1, n + 1)))
    return kernel_sum_on_grid(pts, h, grid, kernel) / n


def pr_on_grid(sample, grid: Grid, plan: BandwidthPlan, kernel: KernelSpec) -> np.ndarray:
    pts = as_sample(sample, plan.d)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("Parzen-Rosenblatt estimate needs n >= 2")
    return kernel_sum_on_grid(pts, plan.pr_bandwidth(n), grid, kernel) / n


def _density_callable(f_true) -> Callable:
    return f_true.pdf if hasattr(f_true, "pdf") else f_true


def expected_estimate(f_true, n: int, x, plan: BandwidthPlan, kernel: KernelSpec,
                      epsabs: float = 1e-13) -> float:
    """E f_n(x) = (1/n) Σ_k ∫ K(u) f(x - h_k u) du by adaptive quadrature.

    ``f_true`` is a density object with a vectorized ``pdf`` over ``(m, d)``
    arrays, or such a callable.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pdf = _density_callable(f_true)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = plan.d
    if x.shape != (d,):
        raise ValueError(f"point has dimension {x.size}, expected {d}")
    R = kernel.support_radius if math.isfinite(kernel.support_radius) else 12.0
    h = np.atleast_1d(plan.bandwidth_at(np.arange(1, n + 1)))
    terms = []
    for hk in h:
        if d == 1:
            def g(u, hk=hk):
                return float(kernel.profile(u)) * float(pdf(np.array([[x[0] - hk * u]]))[0])

            val, err = integrate.quad(g, -R, R, points=[0.0], epsabs=epsabs,
                                      epsrel=1e-12, limit=400)
        else:
            def g(*u, hk=hk):
                u = np.asarray(u)
                return float(np.prod(kernel.profile(u))) * float(pdf((x - hk * u)[None, :])[0])

            val, err = integrate.nquad(g, [(-R, R)] * d, opts={"epsabs": 1e-11, "epsrel": 1e-10})
        if not err <= max(1e3 * epsabs, 1e-9):
            raise QuadratureError(f"convolution term with h={hk:.4g} did not converge", err)
        terms.append(val)
    return math.fsum(terms) / n


def _fixed_rule(kernel: KernelSpec, nodes: int):
    """Nodes and weights with ∫ K_1(u) g(u) du ≈ Σ w_j g(u_j)."""
    if math.isfinite(kernel.support_radius):
        u, w = np.polynomial.legendre.leggauss(nodes)
        return u, w * kernel.profile(u)
    u, w = np.polynomial.hermite_e.hermegauss(nodes)
    # hermegauss weight is exp(-u^2/2); K_1 / that weight = q(u) / sqrt(2 pi)
    q = kernel.profile(u) * np.sqrt(2 * np.pi) * np.exp(0.5 * u * u)
    return u, w * q / np.sqrt(2 * np.pi)


def expected_on_grid(f_true, n: int, grid: Grid, plan: BandwidthPlan, kernel: KernelSpec,
                     nodes: int = 48, chunk: int = 256) -> np.ndarray:
    """E f_n at every node using a fixed Gauss rule per coordinate.

    Gauss-Legendre for compact kernels, Gauss-Hermite for Gaussian ones;
    cheap enough to center Monte Carlo deviations on fine grids.
    """
    pdf = _density_callable(f_true)
    u, w = _fixed_rule(kernel, nodes)
    d = grid.d
    U = np.stack(np.meshgrid(*([u] * d), indexing="ij"), axis=-1).reshape(-1, d)
    W = reduce(np.multiply.outer, [w] * d).ravel() if d > 1 else w
    x = grid.points()
    h = np.atleast_1d(plan.bandwidth_at(np.arange(1, n + 1)))
    total = np.zeros(x.shape[0])
    for start in range(0, n, chunk):
        hk = h[start:start + chunk]
        shifts = (hk[:, None, None] * U[None, :, :]).reshape(-1, d)
        ww = np.tile(W, hk.size)
        for i0 in range(0, x.shape[0], 512):
            xs = x[i0:i0 + 512]
            vals = pdf((xs[:, None, :] - shifts[None, :, :]).reshape(-1, d))
            total[i0:i0 + 512] += vals.reshape(xs.shape[0], -1) @ ww
    return (total / n).reshape(grid.shape)


def sup_deviation(values, reference) -> float:
    """max over nodes of |values - reference|.

    A lower bound for the supremum over the continuous box.
    """
    a = np.asarray(values, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a - b)))


def lp_risk_estimate(differences: Sequence[np.ndarray], grid: Grid, p: float) -> float:
    """(mean over replicates of ∫_D |f_n - f|^p)^(1/p) with trapezoid weights."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if len(differences) == 0:
        raise ValueError("no replicates")
    w = grid.trapezoid_weights()
    integrals = [float(np.sum(w * np.abs(np.asarray(dr).reshape(grid.shape)) ** p))
                 for dr in differences]
    return float(np.mean(integrals)) ** (1.0 / p)
