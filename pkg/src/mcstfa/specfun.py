"""Scalar special functions used by the GIG and skew-t formulas.

Everything here works in log space. The modified Bessel function of the
third kind grows like ``Gamma(v) (2/x)**v`` for large order and small
argument, which overflows double precision long before the orders reached
by high-dimensional skew-t components (order ``(nu + p)/2``). Callers only
ever see ``log K_v(x)`` and form Bessel ratios as differences of logs.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

__all__ = [
    "DomainError",
    "log_bessel_k",
    "dlog_bessel_k_dorder",
    "bessel_k_ratio",
    "digamma",
    "log_gamma",
]

# kve is trusted below this value; above it we switch to the recurrence.
_KVE_CEILING = 1e290


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _check_positive(x: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must be finite")
    if np.any(x <= 0):
        raise DomainError(f"{name} must be > 0")


def _log_k_upward(v: np.ndarray, x: np.ndarray) -> np.ndarray:
    """log K_v(x) for v >= 0 by forward recurrence from the fractional order.

    Forward recurrence is the stable direction for K. Ratios
    r_k = K_{f+k+1}/K_{f+k} are propagated instead of K itself so nothing
    overflows.
    """
    n_steps = np.floor(v).astype(np.int64)
    frac = v - n_steps
    out = np.log(special.kve(frac, x)) - x
    if not np.any(n_steps):
        return out
    ratio = special.kve(frac + 1.0, x) / special.kve(frac, x)
    # ratios are >= 1 for nonnegative order; multiply them up and only take
    # a log when the running product gets large, to limit rounding
    prod = np.ones_like(x)
    acc = np.zeros_like(x)
    for k in range(int(n_steps.max())):
        active = n_steps > k
        prod = np.where(active, prod * ratio, prod)
        flush = prod > 1e200
        if np.any(flush):
            acc[flush] += np.log(prod[flush])
            prod[flush] = 1.0
        # K_{mu+1}/K_mu = K_{mu-1}/K_mu + 2 mu / x with mu = frac + k + 1
        ratio = np.where(active, 1.0 / ratio + 2.0 * (frac + k + 1.0) / x, ratio)
    return out + (acc + np.log(prod))


def _log_k_large_x(v: np.ndarray, x: np.ndarray) -> np.ndarray:
    """log K_v(x) from the large-argument asymptotic series (x >> v^2).

    K_v(x) ~ sqrt(pi / 2x) e^-x sum_k prod_{j<=k} (4v^2 - (2j-1)^2) / (j 8x).
    Used where kve gives up (x beyond about 1e9).
    """
    mu = 4.0 * v * v
    term = np.ones_like(x)
    total = np.ones_like(x)
    for j in range(1, 40):
        term = term * (mu - (2 * j - 1) ** 2) / (j * 8.0 * x)
        total = total + term
        if np.all(np.abs(term) < 1e-17 * np.abs(total)):
            break
    return 0.5 * np.log(np.pi / (2.0 * x)) - x + np.log(total)


def log_bessel_k(order: ArrayLike, x: ArrayLike) -> np.ndarray | float:
    """Natural log of the modified Bessel function of the third kind.

    Parameters
    ----------
    order : float or array_like
        Real order ``v``. ``K_v`` is even in ``v``, and only ``|v|`` is used,
        so ``log_bessel_k(v, x) == log_bessel_k(-v, x)`` holds exactly.
    x : float or array_like
        Positive argument. Broadcast against `order`.

    Returns
    -------
    float or ndarray
        ``log K_v(x)``. Scalar in, scalar out.

    Raises
    ------
    DomainError
        If `x` is not strictly positive or either input is not finite.
    """
    scalar = np.ndim(order) == 0 and np.ndim(x) == 0
    v, xx = np.broadcast_arrays(
        np.abs(np.asarray(order, dtype=float)), np.asarray(x, dtype=float)
    )
    if not np.all(np.isfinite(v)):
        raise DomainError("order must be finite")
    _check_positive(xx, "x")

    with np.errstate(over="ignore"):
        scaled = special.kve(v, xx)
    good = np.isfinite(scaled) & (scaled > 0) & (scaled < _KVE_CEILING)
    out = np.empty(v.shape, dtype=float)
    out[good] = np.log(scaled[good]) - xx[good]
    huge = ~good & (xx > 1e6) & (xx > 100.0 * v * v)
    if np.any(huge):
        out[huge] = _log_k_large_x(v[huge], xx[huge])
    bad = ~good & ~huge
    if np.any(bad):
        out[bad] = _log_k_upward(v[bad], xx[bad])
    return float(out) if scalar else out


def dlog_bessel_k_dorder(order: ArrayLike, x: ArrayLike) -> np.ndarray | float:
    """Derivative of ``log K_v(x)`` with respect to the order ``v``.

    Central difference with step ``max(1e-5, 1e-7 |v|)``. The result is
    exactly odd in `order` (and zero at ``order == 0``) because
    `log_bessel_k` is exactly even.
    """
    scalar = np.ndim(order) == 0 and np.ndim(x) == 0
    v = np.asarray(order, dtype=float)
    h = np.maximum(1e-5, 1e-7 * np.abs(v))
    out = (log_bessel_k(v + h, x) - log_bessel_k(v - h, x)) / (2.0 * h)
    return float(out) if scalar else out


def bessel_k_ratio(order: ArrayLike, x: ArrayLike) -> np.ndarray | float:
    """``K_{v+1}(x) / K_v(x)`` computed as a difference of logs."""
    v = np.asarray(order, dtype=float)
    out = np.exp(log_bessel_k(v + 1.0, x) - log_bessel_k(v, x))
    return float(out) if np.ndim(out) == 0 else out


def digamma(x: ArrayLike) -> np.ndarray | float:
    """Digamma function on the positive reals."""
    xx = np.asarray(x, dtype=float)
    _check_positive(xx, "x")
    out = special.digamma(xx)
    return float(out) if out.ndim == 0 else out


def log_gamma(x: ArrayLike) -> np.ndarray | float:
    """Log-gamma function on the positive reals."""
    xx = np.asarray(x, dtype=float)
    _check_positive(xx, "x")
    out = special.gammaln(xx)
    return float(out) if out.ndim == 0 else out
