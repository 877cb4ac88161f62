import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wwdensity.bandwidth import BandwidthPlan

mpmath.mp.dps = 40


def test_first_window_is_one():
    for plan in (BandwidthPlan(1.0), BandwidthPlan(3.5, 2, 0.4)):
        assert plan.bandwidth_at(1) == 1.0
        assert plan.normalizer(1) == 1.0


def test_second_window_high_precision():
    plan = BandwidthPlan(1.0, 1, 1.0)
    h2 = float(mpmath.cbrt(mpmath.log(2) / 2))
    assert plan.bandwidth_at(2) == pytest.approx(h2, rel=1e-15)
    assert plan.pr_bandwidth(2) == pytest.approx(h2, rel=1e-15)
    assert h2 == pytest.approx(0.702423, abs=1e-6)
    assert plan.normalizer(2) == pytest.approx(float(mpmath.cbrt(2 / mpmath.log(2))), rel=1e-15)
    assert plan.effective_sample(2) == pytest.approx(2 * h2, rel=1e-15)


def test_rho():
    assert BandwidthPlan(2.0).rho == pytest.approx(0.4)
    assert BandwidthPlan(1.0, 3).rho == pytest.approx(0.2)


def test_windows_shrink():
    plan = BandwidthPlan(2.0)
    k = np.array([10, 100, 10**4, 10**8])
    h = plan.bandwidth_at(k)
    assert np.all(np.diff(h) < 0)
    assert h[-1] < 1e-2


def test_large_beta_exponent_limit():
    n = 10**6
    assert BandwidthPlan(1e9).pr_bandwidth(n) == pytest.approx(math.sqrt(math.log(n) / n), rel=1e-6)


@pytest.mark.parametrize("k", [0, -3, 2.5])
def test_bad_indices_rejected(k):
    with pytest.raises(ValueError):
        BandwidthPlan(2.0).bandwidth_at(k)


def test_pr_bandwidth_needs_two():
    with pytest.raises(ValueError):
        BandwidthPlan(2.0).pr_bandwidth(1)


@pytest.mark.parametrize("kwargs", [dict(beta=0), dict(beta=1, d=0), dict(beta=1, c1=-1)])
def test_invalid_plans(kwargs):
    with pytest.raises(ValueError):
        BandwidthPlan(**kwargs)


@given(st.floats(0.5, 10), st.integers(1, 4), st.integers(2, 10**9))
def test_normalizer_times_window_is_c1(beta, d, n):
    plan = BandwidthPlan(beta, d, 1.0)
    assert plan.normalizer(n) * plan.bandwidth_at(n) == pytest.approx(1.0, rel=1e-14)


@given(st.floats(0.5, 10), st.integers(2, 10**9), st.floats(0.1, 5))
def test_effective_sample_identity(beta, n, c1):
    plan = BandwidthPlan(beta, 1, c1)
    ref = c1 * n ** ((beta + 1) / (2 * beta + 1)) * math.log(n) ** plan.rho
    assert plan.effective_sample(n) == pytest.approx(ref, rel=1e-12)


def test_effective_sample_grows():
    v = BandwidthPlan(2.0).effective_sample(np.arange(10, 10**5, 97))
    assert np.all(np.diff(v) > 0)


def test_json_round_trip():
    plan = BandwidthPlan(3.5, 2, 0.7)
    assert BandwidthPlan.from_json(plan.to_json()) == plan
