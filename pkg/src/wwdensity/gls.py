r"""Grand Lebesgue Space numerics and the exponential tail shape.

The GLS norm of a random variable with moment curve :math:`p \mapsto \|Y\|_p`
is :math:`\sup_p \|Y\|_p / \psi(p)`. Writing :math:`h(p) = p \ln\psi(p)`, a
norm bound :math:`\kappa` turns into the tail bound
:math:`P(|Y| \ge t) \le \exp(-h^*(t/\kappa))` with the convex conjugate
:math:`h^*(t) = \sup_{p \ge 2} (pt - h(p))`.

The deviation tail of the recursive estimator is modelled by

.. math::

    \nu(z) = \exp(-z - \ln z \cdot \ln\ln z), \qquad z \ge e,

scaled as :math:`C \nu(t / (e s))` on :math:`t \ge e^2 s`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import interpolate, optimize

__all__ = [
    "PsiFunction",
    "YoungWeight",
    "TailModel",
    "Conjugate",
    "psi_l",
    "gls_norm",
    "young_fenchel",
    "chentzov_tail",
    "nu",
    "log_nu",
    "nu_quantile",
    "psi_risk",
]


def psi_l(p):
    """p / ln p for p > 1; minimal at p = e where it equals e."""
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 1):
        raise ValueError("psi_l is defined for p > 1")
    out = arr / np.log(arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PsiFunction:
    """Generating function ψ of a GLS on (a, b).

    ``rule`` is ``"psi_l"`` (p / ln p), ``"power"`` (p ** (1/m)) or
    ``"tabulated"`` (log-linear interpolation of ``table``). ``"constant"``
    (ψ ≡ m) is also accepted.
    """

    rule: str = "psi_l"
    a: float = 2.0
    b: float = math.inf
    m: float = 1.0
    table: tuple = ()

    def __post_init__(self):
        if not 1 < self.a < self.b:
            raise ValueError(f"need 1 < a < b, got ({self.a}, {self.b})")
        if self.rule not in ("psi_l", "power", "tabulated", "constant"):
            raise ValueError(f"unknown psi rule {self.rule!r}")
        if self.rule in ("power", "constant") and not self.m > 0:
            raise ValueError("parameter m must be positive")
        if self.rule == "tabulated":
            p, v = np.asarray(self.table, dtype=float).T
            if np.any(v <= 0) or np.any(np.diff(p) <= 0):
                raise ValueError("tabulated psi needs increasing p and positive values")

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if self.rule == "psi_l":
            out = p / np.log(p)
        elif self.rule == "power":
            out = p ** (1.0 / self.m)
        elif self.rule == "constant":
            out = np.full_like(p, self.m)
        else:
            tp, tv = np.asarray(self.table, dtype=float).T
            out = np.exp(interpolate.interp1d(tp, np.log(tv), fill_value="extrapolate")(p))
        return float(out) if out.ndim == 0 else out

    def log(self, p):
        """ln ψ(p), computed without overflow for the closed-form rules."""
        p = np.asarray(p, dtype=float)
        if self.rule == "psi_l":
            return np.log(p) - np.log(np.log(p))
        if self.rule == "power":
            return np.log(p) / self.m
        return np.log(self(p))


class YoungWeight(NamedTuple):
    """Ψ(y) = |y|^m (m > 1) or exp(|y|^m) - 1 (m > 0)."""

    rule: str = "power"
    m: float = 2.0

    def __call__(self, y):
        y = np.abs(np.asarray(y, dtype=float))
        if self.rule == "power":
            if not self.m > 1:
                raise ValueError("power Young weight needs m > 1")
            return y**self.m
        if self.rule == "exp_power":
            if not self.m > 0:
                raise ValueError("exp-power Young weight needs m > 0")
            return np.expm1(y**self.m)
        raise ValueError(f"unknown Young weight rule {self.rule!r}")


def gls_norm(moment_curve, psi: PsiFunction | Callable, p_grid) -> float:
    """sup over ``p_grid`` of ||Y||_p / ψ(p).

    ``moment_curve`` is a callable ``p -> ||Y||_p`` or an array aligned with
    ``p_grid``. Being a maximum over finitely many p, the result never exceeds
    the true norm.
    """
    p = np.asarray(p_grid, dtype=float)
    if p.size == 0:
        raise ValueError("empty p grid")
    m = np.asarray(moment_curve(p) if callable(moment_curve) else moment_curve, dtype=float)
    if m.shape != p.shape or not np.all(np.isfinite(m)):
        raise ValueError("moment curve must be finite on the p grid")
    return float(np.max(m / psi(p)))


class Conjugate(NamedTuple):
    value: float
    p_star: float
    cap_hit: bool


def young_fenchel(psi: PsiFunction, t: float, p_max: float = 1e6,
                  coarse: int = 4001) -> Conjugate:
    """h*(t) = sup_{2 <= p <= p_max} (p t - p ln ψ(p)).

    A log-spaced scan locates the best bracket; bounded Brent refines it.
    ``cap_hit`` is set when the maximizer sits on ``p_max``, in which case the
    true supremum may be larger and ``exp(-value)`` is not a certified tail
    bound.
    """
    if not p_max >= 2:
        raise ValueError("p_max must be >= 2")
    lo = max(2.0, psi.a)
    hi = min(p_max, psi.b)

    def g(p):
        return p * t - p * psi.log(p)

    grid = np.geomspace(lo, hi, coarse)
    vals = g(grid)
    i = int(np.argmax(vals))
    best_p, best = float(grid[i]), float(vals[i])
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if b > a:
        res = optimize.minimize_scalar(lambda p: -g(p), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12 * b})
        if -res.fun > best:
            best_p, best = float(res.x), float(-res.fun)
    for edge in (lo, hi):
        ge = float(g(edge))
        if ge >= best:
            best_p, best = edge, ge
    cap_hit = bool(math.isclose(best_p, hi, rel_tol=1e-9) and hi == p_max)
    return Conjugate(best, best_p, cap_hit)


def chentzov_tail(kappa: float, psi: PsiFunction, t: float, p_max: float = 1e6) -> float:
    """exp(-h*(t / κ)): tail bound for a variable with GLS norm κ, t >= κ."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if t < kappa:
        raise ValueError(f"bound holds for t >= kappa, got t={t}, kappa={kappa}")
    return math.exp(-young_fenchel(psi, t / kappa, p_max).value)


def log_nu(z):
    """ln ν(z) = -z - ln z · ln ln z for z >= e."""
    z = np.asarray(z, dtype=float)
    if np.any(z < math.e):
        raise ValueError("nu is defined for z >= e")
    lz = np.log(z)
    out = -z - lz * np.log(lz)
    return float(out) if out.ndim == 0 else out


def nu(z):
    """ν(z) = exp(-z) exp(-ln z ln ln z), strictly decreasing on [e, ∞)."""
    out = np.exp(log_nu(z))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TailModel:
    """Tail bound t -> C ν(t / (e s)) for t >= e² s."""

    C: float
    s: float
    shape: str = "nu"

    def __post_init__(self):
        if not (self.C > 0 and self.s > 0):
            raise ValueError("tail model needs C > 0 and s > 0")
        if self.shape != "nu":
            raise ValueError(f"unsupported tail shape {self.shape!r}")

    @property
    def t_min(self) -> float:
        return math.e**2 * self.s

    def tail_bound(self, t):
        """C ν(t / (e s)); may exceed 1 near the domain edge."""
        t = np.asarray(t, dtype=float)
        z = t / (math.e * self.s)
        # t >= e^2 s can round to z a hair below e
        z = np.where((z < math.e) & (t >= self.t_min), math.e, z)
        out = self.C * nu(z)
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        return {"C": self.C, "s": self.s, "shape": self.shape}

    @classmethod
    def from_dict(cls, data: dict) -> "TailModel":
        return cls(float(data["C"]), float(data["s"]), data.get("shape", "nu"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TailModel":
        return cls.from_dict(json.loads(text))


class UnreachableLevel(ValueError):
    pass


def nu_quantile(model: TailModel, alpha: float, rtol: float = 1e-12) -> float:
    """Smallest t >= e² s with C ν(t / (e s)) <= α.

    Solved on the log scale (z + ln z ln ln z = ln(C/α)) by bracketing root
    search; raises :class:`UnreachableLevel` when α exceeds the bound at the
    domain edge.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    target = math.log(model.C / alpha)
    edge = -log_nu(math.e)  # = e
    if target < edge * (1 - 1e-15):
        raise UnreachableLevel(
            f"alpha={alpha} exceeds the tail bound at the domain edge ({model.C * nu(math.e):.6g})"
        )
    if target <= edge:
        z = math.e
    else:
        z = optimize.brentq(lambda z: -log_nu(z) - target, math.e, max(target, math.e) + 1.0,
                            xtol=1e-300, rtol=max(rtol * 0.1, 1e-15), maxiter=500)
    return math.e * model.s * z


def psi_risk(deviations, weight: YoungWeight) -> float:
    """Monte Carlo mean of Ψ over normalized sup deviations."""
    dev = np.asarray(deviations, dtype=float)
    if dev.size == 0:
        raise ValueError("no deviations")
    if np.any(dev < 0):
        raise ValueError("deviations must be nonnegative")
    return float(np.mean(weight(dev)))
