"""Recursive (Wolverton-Wagner) kernel density estimation with uniform confidence bands."""
from .bandwidth import BandwidthPlan
from .kernels import (
    HolderClass,
    KernelSpec,
    build_higher_order_kernel,
    epanechnikov,
    eval_kernel,
    gaussian,
    kernel_moment,
    verify_holder,
)
from .estimators import (
    Grid,
    GridEstimate,
    expected_estimate,
    expected_on_grid,
    lp_risk_estimate,
    pr_batch,
    pr_on_grid,
    sup_deviation,
    ww_batch,
    ww_on_grid,
    ww_update,
)

__version__ = "0.1.0"
