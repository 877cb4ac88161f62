"""
Moment curves and tails
=======================

A moment curve ``p -> ||Y||_p`` bounded by ``kappa * psi(p)`` turns into an
exponential tail bound through the convex conjugate of ``p ln psi(p)``.
"""
import math

import numpy as np

from wwdensity.gls import PsiFunction, TailModel, chentzov_tail, nu, nu_quantile, young_fenchel

psi = PsiFunction("psi_l")  # p / ln p
for t in (1.0, 1.5, 2.0, 3.0, 5.0):
    c = young_fenchel(psi, t)
    print(f"h*({t:.1f}) = {c.value:10.4f}   maximizer p* = {c.p_star:9.3f}")

# h*(1) = 0 makes the bound vacuous at t = kappa; it decays quickly after.
for t in (1.0, 2.0, 4.0):
    print(f"P(|Y| > {t:.0f} kappa) <= {chentzov_tail(1.0, psi, t):.3e}")

# The tail shape used for bands, and its inverse.
model = TailModel(C=2.0, s=0.5)
for alpha in (0.1, 0.05, 0.01):
    u = nu_quantile(model, alpha)
    print(f"alpha={alpha:<5} u_alpha={u:.4f}  check {model.tail_bound(u):.4f}")
print("nu(e) =", nu(math.e), "=", math.exp(-math.e))
