"""Generalized inverse Gaussian expectations for the E-step.

The GIG law here has density proportional to

    y**(lam - 1) * exp(-(psi * y + chi / y) / 2),    y > 0,

so with ``omega = sqrt(psi * chi)``::

    E[Y]     = sqrt(chi/psi) K_{lam+1}(omega) / K_lam(omega)
    E[1/Y]   = sqrt(psi/chi) K_{lam+1}(omega) / K_lam(omega) - 2 lam / chi
    E[log Y] = log sqrt(chi/psi) + d/dlam log K_lam(omega)

At ``psi == 0`` (the symmetric-t posterior) the law is inverse gamma with
shape ``-lam`` and scale ``chi / 2`` and the closed forms are used instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .specfun import DomainError, digamma, dlog_bessel_k_dorder, log_bessel_k

__all__ = [
    "GigParams",
    "GigMoments",
    "MomentError",
    "gig_moments",
    "gig_expectations",
    "posterior_y_params",
]

# psi below this fraction of max(1, chi) is treated as exactly zero
BOUNDARY_RTOL = 1e-12


class MomentError(DomainError):
    """The requested moment does not exist for these parameters."""


@dataclass(frozen=True)
class GigParams:
    """GIG parameters in the ``(psi, chi, lam)`` convention."""

    psi: float
    chi: float
    lam: float

    def __post_init__(self):
        if not (np.isfinite(self.psi) and np.isfinite(self.chi) and np.isfinite(self.lam)):
            raise DomainError("GIG parameters must be finite")
        if self.chi <= 0:
            raise DomainError("chi must be > 0")
        if self.psi < 0:
            raise DomainError("psi must be >= 0")
        if self.psi == 0 and self.lam >= 0:
            raise DomainError("psi == 0 requires lam < 0 (inverse-gamma boundary)")

    @classmethod
    def from_omega_eta(cls, omega: float, eta: float, lam: float) -> "GigParams":
        """Build from the concentration/scale pair ``(sqrt(psi chi), sqrt(chi/psi))``."""
        if omega <= 0 or eta <= 0:
            raise DomainError("omega and eta must be > 0")
        return cls(psi=omega / eta, chi=omega * eta, lam=lam)

    @property
    def is_inverse_gamma(self) -> bool:
        return self.psi < BOUNDARY_RTOL * max(1.0, self.chi)


@dataclass(frozen=True)
class GigMoments:
    e_y: float
    e_inv_y: float
    e_log_y: float


def gig_expectations(psi: ArrayLike, chi: ArrayLike, lam: ArrayLike, log_k=None, with_log: bool = True):
    """Vectorized ``(E[Y], E[1/Y], E[log Y])`` for arrays of GIG parameters.

    Inputs broadcast together. Entries with ``psi`` below the boundary
    threshold use the inverse-gamma closed forms.

    `log_k`, if given, is a precomputed ``log K_lam(sqrt(psi chi))`` with
    the broadcast shape (only used when no entry is on the boundary).
    With ``with_log=False`` the third output is NaN and the two extra
    Bessel evaluations behind ``E[log Y]`` are skipped.

    Raises
    ------
    DomainError
        For ``chi <= 0``, negative ``psi`` or a boundary entry with ``lam >= 0``.
    MomentError
        For a boundary entry with ``lam >= -1``, where ``E[Y]`` is infinite.
    """
    psi, chi, lam = np.broadcast_arrays(
        np.asarray(psi, dtype=float), np.asarray(chi, dtype=float), np.asarray(lam, dtype=float)
    )
    if np.any(chi <= 0) or not np.all(np.isfinite(chi)):
        raise DomainError("chi must be finite and > 0")
    if np.any(psi < 0):
        raise DomainError("psi must be >= 0")

    e_y = np.empty(psi.shape)
    e_inv = np.empty(psi.shape)
    e_log = np.empty(psi.shape)

    ig = psi < BOUNDARY_RTOL * np.maximum(1.0, chi)
    if np.any(ig):
        shape = -lam[ig]
        if np.any(shape <= 0):
            raise DomainError("inverse-gamma boundary requires lam < 0")
        if np.any(shape <= 1):
            raise MomentError("E[Y] does not exist for psi == 0 and lam >= -1")
        half_chi = 0.5 * chi[ig]
        e_y[ig] = half_chi / (shape - 1.0)
        e_inv[ig] = shape / half_chi
        e_log[ig] = np.log(half_chi) - digamma(shape)

    gen = ~ig
    if np.any(gen):
        ps, ch, lm = psi[gen], chi[gen], lam[gen]
        omega = np.sqrt(ps * ch)
        if log_k is not None and not np.any(ig):
            lk = np.broadcast_to(np.asarray(log_k, dtype=float), psi.shape)[gen]
        else:
            lk = log_bessel_k(lm, omega)
        ratio = np.exp(log_bessel_k(lm + 1.0, omega) - lk)
        root = np.sqrt(ch / ps)
        e_y[gen] = root * ratio
        inv = ratio / root - 2.0 * lm / ch
        # for lam > 0 the subtraction above cancels when omega is small;
        # E[1/Y] = sqrt(psi/chi) K_{lam-1}/K_lam has no subtraction
        pos = lm > 0
        if np.any(pos):
            inv[pos] = np.exp(log_bessel_k(lm[pos] - 1.0, omega[pos]) - lk[pos]) / root[pos]
        e_inv[gen] = inv
        e_log[gen] = np.log(root) + dlog_bessel_k_dorder(lm, omega) if with_log else np.nan
    return e_y, e_inv, e_log


def gig_moments(params: GigParams) -> GigMoments:
    """Scalar convenience wrapper around `gig_expectations`."""
    e_y, e_inv, e_log = gig_expectations(params.psi, params.chi, params.lam)
    return GigMoments(float(e_y), float(e_inv), float(e_log))


def posterior_y_params(alpha_quad: float, mahalanobis: float, nu: float, p: int) -> GigParams:
    """GIG law of the latent scale ``Y`` given one skew-t observation.

    ``alpha_quad`` is ``alpha' Sigma^{-1} alpha`` and ``mahalanobis`` the
    squared Mahalanobis distance of the observation from the location.
    """
    if alpha_quad < 0 or mahalanobis < 0:
        raise DomainError("alpha_quad and mahalanobis must be >= 0")
    if nu <= 0:
        raise DomainError("nu must be > 0")
    if int(p) != p or p < 1:
        raise DomainError("p must be a positive integer")
    return GigParams(psi=float(alpha_quad), chi=float(nu + mahalanobis), lam=-(nu + p) / 2.0)
