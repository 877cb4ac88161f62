import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from wwdensity.kernels import (
    HolderClass,
    KernelSpec,
    QuadratureError,
    base_even_moment,
    build_higher_order_kernel,
    check_kernel,
    epanechnikov,
    eval_kernel,
    gaussian,
    kernel_moment,
    verify_holder,
)


def test_eval_kernel_reference_points():
    assert eval_kernel(gaussian(), 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert eval_kernel(epanechnikov(), 0.0) == 0.75
    assert eval_kernel(epanechnikov(), 2.0) == 0.0
    assert eval_kernel(epanechnikov(), 1.0) == 0.0


def test_eval_kernel_product_rule():
    x = np.array([0.3, -1.2, 0.7])
    assert eval_kernel(gaussian(), x) == pytest.approx(np.prod(stats.norm.pdf(x)), rel=1e-14)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_eval_kernel_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        eval_kernel(gaussian(), [0.0, bad])


@given(st.floats(-5, 5))
def test_kernels_are_symmetric(x):
    k = build_higher_order_kernel(epanechnikov(), HolderClass(3.5))
    assert eval_kernel(k, x) == eval_kernel(k, -x)
    assert eval_kernel(gaussian(), x) == eval_kernel(gaussian(), -x)


@pytest.mark.parametrize("spec,l,expected", [
    (gaussian(), 0, 1.0),
    (gaussian(), 2, 1.0),
    (gaussian(), 4, 3.0),
    (epanechnikov(), 0, 1.0),
    (epanechnikov(), 2, 0.2),
    (epanechnikov(), 4, 3 / 35),
])
def test_kernel_moment_closed_forms(spec, l, expected):
    assert kernel_moment(spec, [l]) == pytest.approx(expected, abs=1e-12)


def test_odd_moments_vanish():
    assert kernel_moment(gaussian(), [3]) == 0.0
    assert kernel_moment(epanechnikov(), [1, 2]) == 0.0


def test_multivariate_moment_matches_nquad():
    k = epanechnikov()
    direct, _ = integrate.nquad(
        lambda x, y: x**2 * y**2 * eval_kernel(k, [x, y]), [[-1, 1], [-1, 1]])
    assert kernel_moment(k, [2, 2]) == pytest.approx(direct, rel=1e-10)
    assert kernel_moment(k, [2, 2]) == pytest.approx(0.04, rel=1e-12)


def test_kernel_moment_rejects_bad_index():
    with pytest.raises(ValueError):
        kernel_moment(gaussian(), [-1])
    with pytest.raises(ValueError):
        kernel_moment(gaussian(), [1.5])


def test_base_even_moments_match_mpmath():
    for k in range(5):
        g = mpmath.quad(lambda x: x ** (2 * k) * mpmath.npdf(x), [-mpmath.inf, 0, mpmath.inf])
        e = mpmath.quad(lambda x: x ** (2 * k) * 0.75 * (1 - x * x), [-1, 1])
        assert base_even_moment("gaussian", k) == pytest.approx(float(g), rel=1e-14)
        assert base_even_moment("epanechnikov", k) == pytest.approx(float(e), rel=1e-14)


def test_low_smoothness_returns_base_unchanged():
    assert build_higher_order_kernel(gaussian(), HolderClass(1.5)) is not None
    assert build_higher_order_kernel(gaussian(), HolderClass(1.5)) == gaussian()
    assert build_higher_order_kernel(epanechnikov(), HolderClass(0.5)) == epanechnikov()


def test_gaussian_order_four_coefficients():
    k = build_higher_order_kernel(gaussian(), HolderClass(3.5))
    assert k.poly_coeffs == pytest.approx((1.5, -0.5), abs=1e-12)
    assert k.order == 4
    x = np.linspace(-4, 4, 17)
    assert k.profile(x) == pytest.approx((3 - x**2) * stats.norm.pdf(x) / 2, abs=1e-15)


def test_epanechnikov_order_four_coefficients():
    k = build_higher_order_kernel(epanechnikov(), HolderClass(3.5))
    # independent 2x2 solve in the base moments (1, 1/5; 1/5, 3/35)
    expected = np.linalg.solve([[1, 0.2], [0.2, 3 / 35]], [1, 0])
    assert k.poly_coeffs == pytest.approx(tuple(expected), rel=1e-12)
    assert expected == pytest.approx([1.875, -4.375])


@pytest.mark.parametrize("base", [gaussian(), epanechnikov()])
@pytest.mark.parametrize("beta", [2.0, 3.5, 4.0, 6.5])
def test_built_kernels_are_orthogonal(base, beta):
    k = build_higher_order_kernel(base, HolderClass(beta))
    r = HolderClass(beta).integer_part
    lo, hi = (-1, 1) if k.base == "epanechnikov" else (-mpmath.inf, mpmath.inf)
    q = k.q_power_coeffs
    for l in range(r + 1):
        def f(x):
            b = 0.75 * (1 - x * x) if k.base == "epanechnikov" else mpmath.npdf(x)
            return x**l * b * sum(float(c) * x**j for j, c in enumerate(q))
        exact = float(mpmath.quad(f, [lo, 0, hi]))
        assert abs(exact - (l == 0)) <= 1e-10
        assert abs(kernel_moment(k, [l]) - (l == 0)) <= 1e-10
    check_kernel(k)


def test_higher_order_kernel_takes_negative_values():
    k = build_higher_order_kernel(gaussian(), HolderClass(3.5))
    assert eval_kernel(k, 2.0) < 0


def test_build_rejects_composite_base():
    k = build_higher_order_kernel(gaussian(), HolderClass(3.5))
    with pytest.raises(ValueError):
        build_higher_order_kernel(k, HolderClass(5.0))


def test_verify_holder_gaussian_and_epanechnikov():
    g = verify_holder(gaussian(), 0.01)
    assert g.passed and g.delta == 1.0
    assert g.c_est <= stats.norm.pdf(1.0)
    assert g.c_est == pytest.approx(stats.norm.pdf(1.0), rel=1e-3)
    e = verify_holder(epanechnikov(), 0.01)
    assert e.passed and e.c_est <= 1.5


def test_verify_holder_constant_zero_kernel():
    zero = KernelSpec("gaussian", (0.0,), order=2, delta=1.0, c=0.0)
    check = verify_holder(zero, 0.05)
    assert check.c_est == 0.0 and check.passed


def test_verify_holder_detects_understated_constant():
    tight = KernelSpec("epanechnikov", (1.0,), order=2, delta=1.0, c=1.0)
    assert not verify_holder(tight, 0.01).passed


def test_built_kernel_lipschitz_constant_certified():
    for base in (gaussian(), epanechnikov()):
        k = build_higher_order_kernel(base, HolderClass(3.5))
        assert verify_holder(k, 0.001).passed


def test_check_kernel_rejects_unnormalized():
    with pytest.raises(ValueError, match="integrates"):
        check_kernel(KernelSpec("gaussian", (2.0,)))


def test_quadrature_error_carries_estimate():
    err = QuadratureError("did not converge", 3e-7)
    assert err.abserr == 3e-7


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["gaussian", "epanechnikov"]), st.floats(1.0, 8.0))
def test_kernel_json_round_trip(base, beta):
    spec = build_higher_order_kernel(gaussian() if base == "gaussian" else epanechnikov(),
                                     HolderClass(beta))
    again = KernelSpec.from_json(spec.to_json())
    assert again == spec


def test_kernel_json_fields():
    import json
    data = json.loads(epanechnikov().to_json())
    assert set(data) == {"base", "poly_coeffs", "order", "support_radius", "delta", "c",
                         "dimension_rule"}
    assert data["support_radius"] == 1.0
    assert json.loads(gaussian().to_json())["support_radius"] is None


def test_holder_class_parts():
    h = HolderClass(3.5, 2.0)
    assert (h.integer_part, h.fraction_part) == (3, 0.5)
    assert HolderClass(2.0).integer_part == 2
    with pytest.raises(ValueError):
        HolderClass(-1.0)
