"""
Bessel functions and GIG moments in the E-step
==============================================

The E-step needs three moments of a generalized inverse Gaussian law for
every observation and component. Its order is ``-(nu + p)/2``, which for
a few hundred variables is far beyond where ``scipy.special.kv`` stays
finite. Everything here is computed on the log scale.
"""

import numpy as np
from scipy import special

from mcstfa import gig_expectations, log_bessel_k

###############################################################################
# log K_v(x) where kv overflows
# -----------------------------

for v, x in [(5.0, 1.0), (150.0, 1.0), (300.0, 1e-3), (3.0, 1e10)]:
    with np.errstate(all="ignore"):
        raw = special.kv(v, x)
    print(f"v={v:6.1f} x={x:8.1e}   kv={raw:10.3e}   log K={log_bessel_k(v, x):12.4f}")

###############################################################################
# The three moments
# -----------------
# ``psi`` is the skewness quadratic form, ``chi = nu + delta`` grows with
# the Mahalanobis distance. Far points get large E[Y]: they are
# down-weighted in the location update through E[1/Y].

psi, lam = 2.0, -0.5 * (5.0 + 15)
for delta in (1.0, 10.0, 100.0, 1000.0):
    e_y, e_inv, e_log = gig_expectations(psi, 5.0 + delta, lam)
    print(f"delta={delta:7.1f}   E[Y]={e_y:8.4f}   E[1/Y]={e_inv:8.4f}   E[log Y]={e_log:8.4f}")

###############################################################################
# No skewness
# -----------
# At ``psi = 0`` the law is inverse gamma and E[1/Y] is the familiar
# t weight ``(nu + p) / (nu + delta)``.

nu, p, delta = 5.0, 15, 12.0
_, e_inv, _ = gig_expectations(0.0, nu + delta, -(nu + p) / 2)
print("\ninverse-gamma weight:", e_inv, "closed form:", (nu + p) / (nu + delta))
