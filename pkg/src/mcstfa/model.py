"""MCStFA parameters, mixture density, responsibilities and parameter counts.

Component ``g`` of the mixture is a skew-t with location ``Lambda xi_g``,
scale ``Lambda Omega_g Lambda' + Psi``, skewness ``Lambda zeta_g`` and
``nu_g`` degrees of freedom. ``Lambda`` (p x q) and the diagonal ``Psi`` are
shared by all components.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .densities import DensityError, LowRankScale, skew_t_terms

__all__ = [
    "DataMatrix",
    "MixtureParams",
    "ComponentView",
    "ComponentStats",
    "as_array",
    "component_stats",
    "component_log_densities",
    "mixture_log_density",
    "posterior_responsibilities",
    "MODEL_IDS",
    "count_free_parameters",
    "parsimony_table",
    "PARSIMONY_PANELS",
]


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An n x p matrix of finite observations with optional column names."""

    values: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"data must be a non-empty 2-D array, got shape {v.shape}")
        bad = np.argwhere(~np.isfinite(v))
        if bad.size:
            i, j = bad[0]
            raise ValueError(f"non-finite value at row {i}, column {j}")
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != v.shape[1]:
                raise ValueError("column_names length does not match number of columns")
            object.__setattr__(self, "column_names", names)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def as_array(data) -> np.ndarray:
    if isinstance(data, DataMatrix):
        return data.values
    return DataMatrix(data).values


class ComponentView(NamedTuple):
    mean: np.ndarray
    scale: LowRankScale
    skew: np.ndarray
    nu: float


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Full MCStFA parameter set.

    Shapes: ``weights (G,)``, ``loadings (p, q)``, ``factor_means (G, q)``,
    ``factor_skews (G, q)``, ``factor_covs (G, q, q)``, ``noise_diag (p,)``,
    ``dof (G,)``.
    """

    weights: np.ndarray
    loadings: np.ndarray
    factor_means: np.ndarray
    factor_skews: np.ndarray
    factor_covs: np.ndarray
    noise_diag: np.ndarray
    dof: np.ndarray
    _scales: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        lam = np.atleast_2d(np.array(self.loadings, dtype=float))
        p, q = lam.shape
        g = w.shape[0]
        xi = np.array(self.factor_means, dtype=float).reshape(g, q)
        zeta = np.array(self.factor_skews, dtype=float).reshape(g, q)
        omega = np.array(self.factor_covs, dtype=float).reshape(g, q, q)
        psi = np.array(self.noise_diag, dtype=float).ravel()
        nu = np.array(self.dof, dtype=float).ravel()
        if psi.shape != (p,) or nu.shape != (g,):
            raise ValueError("noise_diag must have length p and dof length G")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
        if np.any(psi <= 0):
            raise ValueError("noise_diag must be positive")
        if np.any(nu <= 0):
            raise ValueError("dof must be positive")
        for name, arr in (("weights", w), ("loadings", lam), ("factor_means", xi),
                          ("factor_skews", zeta), ("factor_covs", omega),
                          ("noise_diag", psi), ("dof", nu)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def p(self) -> int:
        return self.loadings.shape[0]

    @property
    def q(self) -> int:
        return self.loadings.shape[1]

    @property
    def G(self) -> int:
        return self.weights.shape[0]

    def scale(self, g: int) -> LowRankScale:
        if g not in self._scales:
            self._scales[g] = LowRankScale(self.loadings, self.factor_covs[g], self.noise_diag)
        return self._scales[g]

    def component(self, g: int) -> ComponentView:
        return ComponentView(
            mean=self.loadings @ self.factor_means[g],
            scale=self.scale(g),
            skew=self.loadings @ self.factor_skews[g],
            nu=float(self.dof[g]),
        )

    def replace(self, **changes) -> "MixtureParams":
        return replace(self, **changes)

    def normalized(self) -> "MixtureParams":
        """Equivalent parameters with orthonormal loadings.

        With ``Lambda = Q R`` (signs fixed so the first nonzero entry of each
        column of ``Q`` is positive) the factor space is mapped by ``R``:
        ``xi -> R xi``, ``zeta -> R zeta``, ``Omega -> R Omega R'``. The
        mixture density is unchanged.
        """
        qmat, rmat = linalg.qr(self.loadings, mode="economic")
        signs = np.ones(self.q)
        for j in range(self.q):
            nz = np.flatnonzero(np.abs(qmat[:, j]) > 1e-14)
            if nz.size and qmat[nz[0], j] < 0:
                signs[j] = -1.0
        qmat = qmat * signs
        rmat = signs[:, None] * rmat
        covs = np.einsum("ij,gjk,lk->gil", rmat, self.factor_covs, rmat)
        return self.replace(
            loadings=qmat,
            factor_means=self.factor_means @ rmat.T,
            factor_skews=self.factor_skews @ rmat.T,
            factor_covs=0.5 * (covs + covs.transpose(0, 2, 1)),
        )

    def permuted(self, order: Sequence[int]) -> "MixtureParams":
        order = np.asarray(order)
        return self.replace(
            weights=self.weights[order],
            factor_means=self.factor_means[order],
            factor_skews=self.factor_skews[order],
            factor_covs=self.factor_covs[order],
            dof=self.dof[order],
        )

    def canonical_order(self) -> np.ndarray:
        """Component order by the first coordinate of ``Lambda xi_g``."""
        first = self.factor_means @ self.loadings[0]
        return np.argsort(first, kind="stable")


class ComponentStats(NamedTuple):
    """Per-component quantities shared by the density and the E-step."""

    delta: np.ndarray          # (n,) squared Mahalanobis distances
    alpha_quad: float          # alpha' Sigma^{-1} alpha
    cross: np.ndarray          # (n,) (x - mu)' Sigma^{-1} alpha
    logdet: float
    log_density: np.ndarray    # (n,)
    log_bessel: np.ndarray | None = None   # log K_{-(nu+p)/2}, None on the t branch


def component_stats(x: np.ndarray, params: MixtureParams, g: int, skewed: bool = True) -> ComponentStats:
    scale = params.scale(g)
    xi = params.factor_means[g]
    resid = x - params.loadings @ xi
    with np.errstate(all="ignore"):
        delta = scale.mahalanobis(resid)
    if not np.all(np.isfinite(delta)):
        raise DensityError(f"non-finite distance in component {g}", component=g)
    nu = float(params.dof[g])
    if skewed:
        zeta = params.factor_skews[g]
        alpha_quad = max(float(zeta @ scale.lam_sigma_lam @ zeta), 0.0)
        cross = resid @ (scale.lam_sigma_inv.T @ zeta)
    else:
        alpha_quad = 0.0
        cross = np.zeros(x.shape[0])
    with np.errstate(all="ignore"):
        logd, log_k = skew_t_terms(delta, alpha_quad, cross, scale.logdet, nu, params.p)
    if not np.all(np.isfinite(logd)):
        raise DensityError(f"non-finite log density in component {g}", component=g)
    return ComponentStats(delta, alpha_quad, cross, scale.logdet, logd, log_k)


def component_log_densities(data, params: MixtureParams) -> np.ndarray:
    """``(n, G)`` matrix of ``log zeta_g(x_i)`` (without mixing weights)."""
    x = np.atleast_2d(as_array(data))
    return np.column_stack([component_stats(x, params, g).log_density for g in range(params.G)])


def mixture_log_density(x, params: MixtureParams):
    """Log of the MCStFA mixture density, via log-sum-exp over components."""
    arr = x.values if isinstance(x, DataMatrix) else np.asarray(x, dtype=float)
    single = arr.ndim == 1
    logc = component_log_densities(np.atleast_2d(arr), params) + np.log(params.weights)
    out = logsumexp(logc, axis=1)
    return float(out[0]) if single else out


def _responsibilities_from_log(logc: np.ndarray) -> np.ndarray:
    z = np.exp(logc - logsumexp(logc, axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def posterior_responsibilities(data, params: MixtureParams) -> np.ndarray:
    """``(n, G)`` posterior membership probabilities, computed in log space."""
    logc = component_log_densities(data, params) + np.log(params.weights)
    return _responsibilities_from_log(logc)


# ---------------------------------------------------------------------------
# free parameter counts

MODEL_IDS = ("MCStFA", "CCC", "CCU", "CUC", "CUU", "UCC", "UCU", "UUC", "UUU")
PARSIMONY_PANELS = ((2, 3), (3, 3), (5, 8), (5, 9))


def _canonical_model(model_id: str) -> str:
    for m in MODEL_IDS:
        if m.lower() == str(model_id).lower():
            return m
    raise ValueError(f"unknown model {model_id!r}; expected one of {MODEL_IDS}")


def count_free_parameters(model_id: str, p: int, q: int, G: int) -> int:
    """Number of free parameters of MCStFA or one of the eight PMSTFA models."""
    model = _canonical_model(model_id)
    for name, v in (("p", p), ("q", q), ("G", G)):
        if int(v) != v:
            raise ValueError(f"{name} must be an integer")
    p, q, G = int(p), int(q), int(G)
    if not (1 <= q <= p) or G < 1:
        raise ValueError(f"need 1 <= q <= p and G >= 1, got p={p}, q={q}, G={G}")
    if model == "MCStFA":
        return G * q * (q + 1) // 2 + q * (p + 2 * G - q) + 2 * G + p - 1
    loadings = p * q - q * (q - 1) // 2
    if model[0] == "U":
        loadings *= G
    tail = {
        "CC": 2 * G * p + 2 * G,
        "CU": 2 * G * p + 2 * G + p - 1,
        "UC": 2 * G * p + 3 * G - 1,
        "UU": 3 * G * p + 2 * G - 1,
    }[model[1:]]
    return loadings + tail


def parsimony_table(p_values, q: int, G: int, models=("UUU", "CUU", "CCC", "MCStFA")):
    """Rows ``(model, p, count)`` of free-parameter counts over a range of p."""
    rows = []
    for model in models:
        name = _canonical_model(model)
        for p in p_values:
            rows.append((name, int(p), count_free_parameters(name, p, q, G)))
    return rows
