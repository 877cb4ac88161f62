"""
Higher-order kernels
====================

A kernel of order ``r`` has vanishing moments ``1..r-1``. For smooth
densities this pushes the bias down to ``O(h^beta)``. The price is that the
kernel dips below zero.
"""
import numpy as np

from wwdensity import HolderClass, build_higher_order_kernel, epanechnikov, gaussian, kernel_moment

# For beta = 3.5 the moments x and x^3 vanish by symmetry, and x^2 has to be
# cancelled explicitly by the polynomial factor.
for base in (gaussian(), epanechnikov()):
    k = build_higher_order_kernel(base, HolderClass(3.5))
    moments = [kernel_moment(k, [l]) for l in range(5)]
    print(f"{k.base:>13}: q(x^2) coefficients {np.round(k.poly_coeffs, 6)}, order {k.order}")
    print(f"{'':>13}  moments 0..4: {np.array2string(np.array(moments), precision=3)}")

# The Gaussian case is (3 - x^2) phi(x) / 2, which turns negative past sqrt(3).
k = build_higher_order_kernel(gaussian(), HolderClass(3.5))
x = np.linspace(0, 4, 9)
print("\n x    K(x)")
for xi, v in zip(x, k.profile(x)):
    print(f"{xi:4.1f} {v: .5f}")
