r"""Symmetric kernels of declared orthogonality order.

A kernel is stored as a univariate profile

.. math::

    K_1(x) = q(x)\, b(x), \qquad q(x) = \sum_j a_j x^{2j},

where ``b`` is a Gaussian or Epanechnikov base and ``q`` an even polynomial.
In ``d`` dimensions the product rule :math:`K(x) = \prod_j K_1(x_j)` is used,
so every orthogonality property of the profile carries over per coordinate.
Higher-order kernels take negative values; nothing here clips them.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate

__all__ = [
    "HolderClass",
    "KernelSpec",
    "QuadratureError",
    "gaussian",
    "epanechnikov",
    "eval_kernel",
    "kernel_moment",
    "base_even_moment",
    "build_higher_order_kernel",
    "verify_holder",
    "check_kernel",
]

BASES = ("gaussian", "epanechnikov")
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, abserr):
        super().__init__(f"{message} (achieved error estimate {abserr:.3e})")
        self.abserr = abserr


@dataclass(frozen=True)
class HolderClass:
    """Hölder smoothness class Σ(β, L)."""

    beta: float
    L: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def integer_part(self) -> int:
        return math.floor(self.beta)

    @property
    def fraction_part(self) -> float:
        return self.beta - math.floor(self.beta)


@dataclass(frozen=True)
class KernelSpec:
    """Univariate kernel profile ``q(x) * base(x)`` with Hölder metadata.

    ``poly_coeffs[j]`` multiplies ``x**(2*j)``. ``order`` is the first
    non-vanishing moment index (all moments ``1..order-1`` are zero).
    ``delta`` and ``c`` are the declared Hölder exponent and constant of the
    profile.
    """

    base: str = "gaussian"
    poly_coeffs: tuple = (1.0,)
    order: int = 2
    delta: float = 1.0
    c: float = 1.0
    dimension_rule: str = "product"
    support_radius: float = field(init=False)

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"unknown kernel base {self.base!r}; expected one of {BASES}")
        if self.dimension_rule not in ("univariate", "product"):
            raise ValueError(f"unknown dimension rule {self.dimension_rule!r}")
        if not 0 < self.delta <= 1:
            raise ValueError(f"Hölder exponent must lie in (0, 1], got {self.delta}")
        if not self.c >= 0:
            raise ValueError(f"Hölder constant must be nonnegative, got {self.c}")
        coeffs = tuple(float(a) for a in self.poly_coeffs)
        if not coeffs or not all(math.isfinite(a) for a in coeffs):
            raise ValueError("poly_coeffs must be a nonempty list of finite reals")
        object.__setattr__(self, "poly_coeffs", coeffs)
        object.__setattr__(
            self, "support_radius", math.inf if self.base == "gaussian" else 1.0
        )

    @property
    def kind(self) -> str:
        if self.poly_coeffs == (1.0,):
            return self.base
        return "custom-polynomial-times-base"

    @property
    def q_power_coeffs(self) -> np.ndarray:
        """Coefficients of q in the plain power basis (odd slots zero)."""
        out = np.zeros(2 * len(self.poly_coeffs) - 1)
        out[::2] = self.poly_coeffs
        return out

    def profile(self, x):
        """Evaluate the univariate profile K_1 elementwise on an array."""
        x = np.asarray(x, dtype=float)
        x2 = x * x
        q = np.zeros_like(x2)
        for a in reversed(self.poly_coeffs):
            q = q * x2 + a
        if self.base == "gaussian":
            b = np.exp(-0.5 * x2) / _SQRT_2PI
        else:
            b = np.where(x2 <= 1.0, 0.75 * (1.0 - x2), 0.0)
        return q * b

    def profile_derivative(self, x):
        x = np.asarray(x, dtype=float)
        qc = self.q_power_coeffs
        q = P.polyval(x, qc)
        dq = P.polyval(x, P.polyder(qc)) if len(qc) > 1 else np.zeros_like(x)
        if self.base == "gaussian":
            b = np.exp(-0.5 * x * x) / _SQRT_2PI
            db = -x * b
        else:
            inside = np.abs(x) <= 1.0
            b = np.where(inside, 0.75 * (1.0 - x * x), 0.0)
            db = np.where(inside, -1.5 * x, 0.0)
        return dq * b + q * db

    @property
    def sup_abs(self) -> float:
        """sup |K_1| estimated on a dense grid over the effective support."""
        r = self.support_radius if math.isfinite(self.support_radius) else 12.0
        x = np.linspace(0.0, r, 20001)
        return float(np.max(np.abs(self.profile(x))))

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "poly_coeffs": list(self.poly_coeffs),
            "order": self.order,
            "support_radius": None if math.isinf(self.support_radius) else self.support_radius,
            "delta": self.delta,
            "c": self.c,
            "dimension_rule": self.dimension_rule,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        spec = cls(
            base=data["base"],
            poly_coeffs=tuple(data.get("poly_coeffs", (1.0,))),
            order=int(data.get("order", 2)),
            delta=float(data.get("delta", 1.0)),
            c=float(data.get("c", 1.0)),
            dimension_rule=data.get("dimension_rule", "product"),
        )
        radius = data.get("support_radius")
        expected = None if math.isinf(spec.support_radius) else spec.support_radius
        if radius != expected:
            raise ValueError(
                f"support_radius {radius!r} inconsistent with base {spec.base!r}"
            )
        return spec

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "KernelSpec":
        return cls.from_dict(json.loads(text))


def gaussian() -> KernelSpec:
    # sup|phi'| = phi(1), attained at |x| = 1
    return KernelSpec("gaussian", (1.0,), order=2, delta=1.0, c=math.exp(-0.5) / _SQRT_2PI)


def epanechnikov() -> KernelSpec:
    return KernelSpec("epanechnikov", (1.0,), order=2, delta=1.0, c=1.5)


def eval_kernel(spec: KernelSpec, x) -> float:
    """Evaluate K at a point of R^d (a scalar is treated as d = 1)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError("eval_kernel expects a single point")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite kernel argument {x!r}")
    if spec.dimension_rule == "univariate" and x.size != 1:
        raise ValueError("univariate kernel evaluated at a multivariate point")
    return float(np.prod(spec.profile(x)))


def base_even_moment(base: str, k: int) -> float:
    """Closed-form moment ∫ x^(2k) b(x) dx of a base kernel."""
    if base == "gaussian":
        # (2k-1)!!
        return float(math.prod(range(1, 2 * k, 2)))
    if base == "epanechnikov":
        return 3.0 / ((2 * k + 1) * (2 * k + 3))
    raise ValueError(f"unknown base {base!r}")


def _truncation_radius(spec: KernelSpec, power: int) -> float:
    if not math.isinf(spec.support_radius):
        return spec.support_radius
    # grow R until the Gaussian tail of |x|^m q(x) phi(x) is below 1e-14
    m = power + 2 * (len(spec.poly_coeffs) - 1)
    amax = max(abs(a) for a in spec.poly_coeffs)
    R = 6.0
    while True:
        tail = amax * len(spec.poly_coeffs) * R ** (m + 1) * math.exp(-0.5 * R * R) / _SQRT_2PI
        if tail < 1e-14:
            return R
        R += 0.5


def _univariate_moment(spec: KernelSpec, power: int) -> float:
    if power % 2 == 1:
        return 0.0
    R = _truncation_radius(spec, power)
    # split at 0 so both halves are smooth and QUADPACK sees the peak
    total = 0.0
    for a, b in ((-R, 0.0), (0.0, R)):
        val, err = integrate.quad(
            lambda t: t**power * float(spec.profile(t)),
            a,
            b,
            epsabs=1e-12,
            epsrel=1e-12,
            limit=200,
        )
        if not err <= 1e-10:
            raise QuadratureError(f"moment x^{power} did not converge", err)
        total += val
    return total


def kernel_moment(spec: KernelSpec, l) -> float:
    """∫ x^l K(x) dx for a nonnegative integer multi-index ``l``.

    Uses adaptive Gauss-Kronrod quadrature per coordinate; the product rule
    factorizes a multivariate moment into univariate ones. Odd coordinates
    are zero by symmetry and are not integrated.
    """
    idx = np.atleast_1d(np.asarray(l))
    if idx.ndim != 1 or np.any(idx < 0) or not np.all(idx == np.floor(idx)):
        raise ValueError(f"multi-index must be nonnegative integers, got {l!r}")
    if spec.dimension_rule == "univariate" and idx.size != 1:
        raise ValueError("univariate kernel has only one coordinate")
    return math.prod(_univariate_moment(spec, int(p)) for p in idx)


def build_higher_order_kernel(base: KernelSpec, target_class: HolderClass) -> KernelSpec:
    """Multiply ``base`` by an even polynomial so moments 1..[β] vanish.

    The coefficients solve the Hankel system
    ``sum_j a_j m_{2(i+j)} = [i == 0]`` for ``0 <= i <= [β] // 2``, where
    ``m_k`` are the base's even moments. Odd moments vanish by symmetry.
    """
    if base.poly_coeffs != (1.0,):
        raise ValueError("base kernel must be a plain Gaussian or Epanechnikov kernel")
    r = target_class.integer_part
    if r <= 1:
        return base
    size = r // 2 + 1
    H = np.array(
        [[base_even_moment(base.base, i + j) for j in range(size)] for i in range(size)]
    )
    rhs = np.zeros(size)
    rhs[0] = 1.0
    if np.linalg.cond(H) > 1e14:
        raise np.linalg.LinAlgError("singular moment system for this base")
    coeffs = np.linalg.solve(H, rhs)
    built = replace(base, poly_coeffs=tuple(coeffs), order=2 * size)
    return replace(built, c=_lipschitz_bound(built))


def _lipschitz_bound(spec: KernelSpec) -> float:
    r = spec.support_radius if math.isfinite(spec.support_radius) else 40.0
    x = np.linspace(-r, r, 400001)
    # tiny inflation covers the grid resolution of the derivative maximum
    return float(np.max(np.abs(spec.profile_derivative(x)))) * (1.0 + 1e-6)


@dataclass(frozen=True)
class HolderCheck:
    delta: float
    c_est: float
    passed: bool


def verify_holder(spec: KernelSpec, grid_step: float = 0.01) -> HolderCheck:
    """Smallest c with |K(x) - K(y)| <= c |x - y|^δ over grid pairs within 1."""
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    r = spec.support_radius + 1.0 if math.isfinite(spec.support_radius) else 10.0
    x = np.arange(-r, r + grid_step / 2, grid_step)
    k = spec.profile(x)
    c_est = 0.0
    for m in range(1, int(math.floor(1.0 / grid_step + 1e-9)) + 1):
        quotient = np.abs(k[m:] - k[:-m]) / (m * grid_step) ** spec.delta
        if quotient.size:
            c_est = max(c_est, float(quotient.max()))
    return HolderCheck(spec.delta, c_est, c_est <= spec.c)


def check_kernel(spec: KernelSpec, tol: float = 1e-10) -> None:
    """Raise ValueError unless K is normalized (symmetry holds by construction)."""
    mass = kernel_moment(spec, [0])
    if abs(mass - 1.0) > tol:
        raise ValueError(f"kernel integrates to {mass!r}, not 1")

