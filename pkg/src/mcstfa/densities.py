"""Log densities for the normal, t, skew-t and generalized hyperbolic laws.

Scale matrices come in two flavours sharing one small interface
(``dim``, ``logdet``, ``mahalanobis``, ``solve``, ``dense``):

* `DenseScale` wraps an explicit SPD matrix (Cholesky based).
* `LowRankScale` represents ``Lambda Omega Lambda' + diag(psi)`` and never
  forms a p x p matrix. With ``M = Omega^{-1} + Lambda' Psi^{-1} Lambda``::

      Sigma^{-1}           = Psi^{-1} - Psi^{-1} Lambda M^{-1} Lambda' Psi^{-1}
      log|Sigma|           = log|Psi| + log|Omega| + log|M|
      Lambda' Sigma^{-1}   = Omega^{-1} M^{-1} Lambda' Psi^{-1}

Every function accepts a single observation ``x`` of shape ``(p,)`` (and
returns a float) or a batch of shape ``(n, p)`` (and returns ``(n,)``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from .specfun import log_bessel_k

__all__ = [
    "SingularScaleError",
    "DensityError",
    "DenseScale",
    "LowRankScale",
    "as_scale",
    "GhParams",
    "SkewTParams",
    "mahalanobis",
    "log_density_normal",
    "log_density_t",
    "log_density_skew_t",
    "log_density_gh",
    "skew_t_logpdf_from_stats",
    "skew_t_terms",
    "T_LIMIT_THRESHOLD",
]

LOG_2PI = np.log(2.0 * np.pi)
# below this value of alpha' Sigma^{-1} alpha the skew-t is evaluated as a t
T_LIMIT_THRESHOLD = 1e-12


class SingularScaleError(np.linalg.LinAlgError):
    """A scale matrix (or an inner Woodbury system) is not positive definite."""


class DensityError(ArithmeticError):
    """A log density evaluated to a non-finite value."""

    def __init__(self, message: str, component: int | None = None):
        super().__init__(message)
        self.component = component


def _cholesky(a: np.ndarray, what: str) -> np.ndarray:
    try:
        return linalg.cholesky(a, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularScaleError(f"{what} is not positive definite") from exc


class DenseScale:
    """Explicit SPD scale matrix."""

    def __init__(self, matrix):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("scale matrix must be square")
        self._chol = _cholesky(self.matrix, "scale matrix")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._chol))))

    def mahalanobis(self, resid: np.ndarray) -> np.ndarray:
        z = linalg.solve_triangular(self._chol, np.atleast_2d(resid).T, lower=True)
        return np.sum(z * z, axis=0)

    def solve(self, v: np.ndarray) -> np.ndarray:
        return linalg.cho_solve((self._chol, True), v)

    def dense(self) -> np.ndarray:
        return self.matrix


@dataclass(frozen=True, eq=False)
class LowRankScale:
    """Scale ``loadings @ factor_cov @ loadings.T + diag(noise_diag)``."""

    loadings: np.ndarray
    factor_cov: np.ndarray
    noise_diag: np.ndarray

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.loadings, dtype=float))
        omega = np.atleast_2d(np.asarray(self.factor_cov, dtype=float))
        psi = np.asarray(self.noise_diag, dtype=float).ravel()
        p, q = lam.shape
        if omega.shape != (q, q):
            raise ValueError(f"factor_cov must be {q}x{q}, got {omega.shape}")
        if psi.shape != (p,):
            raise ValueError(f"noise_diag must have length {p}")
        if q > p:
            raise ValueError("need q <= p")
        if np.any(psi <= 0) or not np.all(np.isfinite(psi)):
            raise SingularScaleError("noise_diag entries must be finite and > 0")
        object.__setattr__(self, "loadings", lam)
        object.__setattr__(self, "factor_cov", omega)
        object.__setattr__(self, "noise_diag", psi)

    @property
    def dim(self) -> int:
        return self.loadings.shape[0]

    @property
    def rank(self) -> int:
        return self.loadings.shape[1]

    @cached_property
    def _omega_chol(self) -> np.ndarray:
        return _cholesky(self.factor_cov, "factor covariance")

    @cached_property
    def lam_psi_inv(self) -> np.ndarray:
        """``Lambda' Psi^{-1}``, shape (q, p)."""
        return self.loadings.T / self.noise_diag

    @cached_property
    def lam_psi_lam(self) -> np.ndarray:
        """``Lambda' Psi^{-1} Lambda``, shape (q, q)."""
        return self.lam_psi_inv @ self.loadings

    @cached_property
    def _m_chol(self) -> np.ndarray:
        q = self.rank
        omega_inv = linalg.cho_solve((self._omega_chol, True), np.eye(q))
        m = omega_inv + self.lam_psi_lam
        return _cholesky(0.5 * (m + m.T), "inner Woodbury matrix")

    @cached_property
    def logdet(self) -> float:
        return float(
            np.sum(np.log(self.noise_diag))
            + 2.0 * np.sum(np.log(np.diag(self._omega_chol)))
            + 2.0 * np.sum(np.log(np.diag(self._m_chol)))
        )

    @cached_property
    def gamma_t(self) -> np.ndarray:
        """``gamma' = Omega Lambda' Sigma^{-1} = M^{-1} Lambda' Psi^{-1}``, (q, p)."""
        return linalg.cho_solve((self._m_chol, True), self.lam_psi_inv)

    @cached_property
    def lam_sigma_inv(self) -> np.ndarray:
        """``Lambda' Sigma^{-1}``, shape (q, p)."""
        return linalg.cho_solve((self._omega_chol, True), self.gamma_t)

    @cached_property
    def lam_sigma_lam(self) -> np.ndarray:
        """``Lambda' Sigma^{-1} Lambda``, shape (q, q)."""
        w = self.lam_sigma_inv @ self.loadings
        return 0.5 * (w + w.T)

    def mahalanobis(self, resid: np.ndarray) -> np.ndarray:
        r = np.atleast_2d(resid)
        t = linalg.solve_triangular(self._m_chol, self.lam_psi_inv @ r.T, lower=True)
        d = np.sum(r * r / self.noise_diag, axis=1) - np.sum(t * t, axis=0)
        return np.maximum(d, 0.0)

    def solve(self, v: np.ndarray) -> np.ndarray:
        """``Sigma^{-1} v`` for a vector or a (p, k) matrix."""
        v = np.asarray(v, dtype=float)
        pv = v / self.noise_diag if v.ndim == 1 else v / self.noise_diag[:, None]
        inner = linalg.cho_solve((self._m_chol, True), self.loadings.T @ pv)
        corr = self.loadings @ inner
        return pv - (corr / self.noise_diag if v.ndim == 1 else corr / self.noise_diag[:, None])

    def dense(self) -> np.ndarray:
        return self.loadings @ self.factor_cov @ self.loadings.T + np.diag(self.noise_diag)


ScaleLike = Union[DenseScale, LowRankScale, np.ndarray]


def as_scale(scale: ScaleLike):
    if isinstance(scale, (DenseScale, LowRankScale)):
        return scale
    return DenseScale(scale)


@dataclass(frozen=True, eq=False)
class SkewTParams:
    mu: np.ndarray
    sigma: ScaleLike
    alpha: np.ndarray
    nu: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be > 0")


@dataclass(frozen=True, eq=False)
class GhParams:
    lam: float
    chi: float
    psi: float
    mu: np.ndarray
    sigma: ScaleLike
    alpha: np.ndarray

    def __post_init__(self):
        if not (self.chi > 0 and self.psi > 0):
            raise ValueError("GH density needs chi > 0 and psi > 0")


def _prepare(x, mu, scale):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xx = np.atleast_2d(x)
    sc = as_scale(scale)
    mu = np.asarray(mu, dtype=float).ravel()
    if xx.shape[1] != sc.dim or mu.shape[0] != sc.dim:
        raise ValueError("dimension mismatch between x, mu and scale")
    return single, xx - mu, sc


def _finish(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


def mahalanobis(x, mu, scale: ScaleLike):
    """Squared Mahalanobis distance ``(x - mu)' Sigma^{-1} (x - mu)``."""
    single, resid, sc = _prepare(x, mu, scale)
    return _finish(sc.mahalanobis(resid), single)


def log_density_normal(x, mu, scale: ScaleLike):
    single, resid, sc = _prepare(x, mu, scale)
    p = sc.dim
    out = -0.5 * (p * LOG_2PI + sc.logdet + sc.mahalanobis(resid))
    return _finish(out, single)


def _t_logpdf(delta, logdet, nu, p):
    return (
        gammaln(0.5 * (nu + p))
        - gammaln(0.5 * nu)
        - 0.5 * p * np.log(nu * np.pi)
        - 0.5 * logdet
        - 0.5 * (nu + p) * np.log1p(delta / nu)
    )


def log_density_t(x, mu, scale: ScaleLike, nu: float):
    """Multivariate t log density with location `mu`, scale `scale`."""
    single, resid, sc = _prepare(x, mu, scale)
    return _finish(_t_logpdf(sc.mahalanobis(resid), sc.logdet, nu, sc.dim), single)


def skew_t_logpdf_from_stats(delta, alpha_quad, cross, logdet, nu, p):
    """Skew-t log density from precomputed sufficient quantities.

    Parameters
    ----------
    delta : ndarray
        Squared Mahalanobis distances ``(x - mu)' Sigma^{-1} (x - mu)``.
    alpha_quad : float
        ``alpha' Sigma^{-1} alpha``.
    cross : ndarray
        ``(x - mu)' Sigma^{-1} alpha``.
    logdet : float
        ``log |Sigma|``.
    nu : float
        Degrees of freedom.
    p : int
        Dimension.
    """
    return skew_t_terms(delta, alpha_quad, cross, logdet, nu, p)[0]


def skew_t_terms(delta, alpha_quad, cross, logdet, nu, p):
    """Like `skew_t_logpdf_from_stats` but also returns ``log K_{-(nu+p)/2}``.

    The Bessel term is the same one the GIG posterior of the latent scale
    needs, so the E-step reuses it. It is ``None`` on the t branch.
    """
    delta = np.asarray(delta, dtype=float)
    if alpha_quad < T_LIMIT_THRESHOLD:
        return _t_logpdf(delta, logdet, nu, p), None
    chi = nu + delta
    order = -0.5 * (nu + p)
    log_k = log_bessel_k(order, np.sqrt(alpha_quad * chi))
    logpdf = (
        0.5 * order * (np.log(chi) - np.log(alpha_quad))
        + 0.5 * nu * np.log(nu)
        + log_k
        - 0.5 * p * LOG_2PI
        - 0.5 * logdet
        - gammaln(0.5 * nu)
        - (0.5 * nu - 1.0) * np.log(2.0)
        + cross
    )
    return logpdf, log_k


def log_density_skew_t(x, params: SkewTParams):
    """Skew-t log density (the GH limit with ``lam = -nu/2``, ``chi = nu``, ``psi -> 0``).

    Falls back to the multivariate t when ``alpha' Sigma^{-1} alpha`` is
    below `T_LIMIT_THRESHOLD`.

    On the side `alpha` points to, the Bessel term and the linear term
    nearly cancel, so the absolute error of the log density grows like
    ``eps * |x - mu|``; it is meaningless beyond roughly ``1e15`` scale units.
    """
    single, resid, sc = _prepare(x, params.mu, params.sigma)
    alpha = np.asarray(params.alpha, dtype=float).ravel()
    s_alpha = sc.solve(alpha)
    alpha_quad = max(float(alpha @ s_alpha), 0.0)
    out = skew_t_logpdf_from_stats(
        sc.mahalanobis(resid), alpha_quad, resid @ s_alpha, sc.logdet, params.nu, sc.dim
    )
    return _finish(out, single)


def log_density_gh(x, params: GhParams):
    """Generalized hyperbolic log density in the ``(lam, chi, psi, mu, Sigma, alpha)`` form."""
    single, resid, sc = _prepare(x, params.mu, params.sigma)
    p = sc.dim
    alpha = np.asarray(params.alpha, dtype=float).ravel()
    s_alpha = sc.solve(alpha)
    psi_bar = params.psi + max(float(alpha @ s_alpha), 0.0)
    chi_bar = params.chi + sc.mahalanobis(resid)
    lam = params.lam
    out = (
        0.5 * (lam - 0.5 * p) * (np.log(chi_bar) - np.log(psi_bar))
        + 0.5 * lam * (np.log(params.psi) - np.log(params.chi))
        + log_bessel_k(lam - 0.5 * p, np.sqrt(psi_bar * chi_bar))
        - 0.5 * p * LOG_2PI
        - 0.5 * sc.logdet
        - log_bessel_k(lam, np.sqrt(params.chi * params.psi))
        + resid @ s_alpha
    )
    return _finish(out, single)
