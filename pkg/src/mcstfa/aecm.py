"""AECM estimation for mixtures of common skew-t factor analyzers.

One cycle is ``E, CM-1, E, CM-2``:

* CM-1 treats the memberships ``z`` and the latent scales ``y`` as missing
  and updates the weights, factor means ``xi_g``, factor skews ``zeta_g``
  and degrees of freedom ``nu_g``.
* CM-2 adds the latent factors ``u`` to the missing data and updates the
  common loadings ``Lambda``, the noise variances ``Psi`` and the factor
  covariances ``Omega_g``.

Conditionally on ``x``, ``y`` and membership of component ``g`` the factor
``u`` is normal with mean ``eta + y K zeta`` and covariance ``y K Omega``,
where ``eta = xi + gamma'(x - Lambda xi)``, ``gamma = Sigma^{-1} Lambda
Omega`` and ``K = I - gamma' Lambda``. The default ``update_rule="exact"``
maximizes the expected complete-data log-likelihood under that law, so
every half-cycle is guaranteed not to decrease the observed likelihood.
``update_rule="printed"`` keeps the CM-2 formulas in the MCtFA-style
form (``a``-weighted loading update, ``S_g`` based ``Psi``/``Omega``) and
the unsolved skew update; it is kept for comparison only.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize, special

from .densities import DensityError
from .gig import gig_expectations
from .initialization import InitConfig, hierarchical_labels, initial_params, perturb_labels
from .metrics import bic
from .model import (
    MixtureParams,
    _responsibilities_from_log,
    as_array,
    component_stats,
    count_free_parameters,
)

__all__ = [
    "FitConfig",
    "EStepQuantities",
    "FitResult",
    "ComponentCollapseError",
    "DofBoundWarning",
    "e_step",
    "cm_step_1",
    "cm_step_2",
    "solve_dof",
    "aitken_update",
    "n_free_parameters",
    "fit",
]

log = logging.getLogger(__name__)

MODELS = ("mcstfa", "mctfa")
UPDATE_RULES = ("exact", "printed")
OMEGA_EIG_FLOOR = 1e-10


class ComponentCollapseError(RuntimeError):
    """A component has fewer effective observations than ``q + 1``."""


class DofBoundWarning(RuntimeWarning):
    """The degrees-of-freedom equation had no root inside the search bounds."""


@dataclass(frozen=True)
class FitConfig:
    """Options for `fit`.

    ``model="mctfa"`` pins every skewness vector at zero (the symmetric
    common t-factor model). ``fixed_dof`` disables the degrees-of-freedom
    update and holds every ``nu_g`` at that value.
    """

    max_iter: int = 2000
    epsilon: float = 1e-5
    min_dof: float = 0.5
    max_dof: float = 400.0
    seed: int = 0
    init_method: str = "hclust-complete"
    model: str = "mcstfa"
    fixed_dof: float | None = None
    nu0: float = 50.0
    skew0: float = 1.0
    restarts: int = 0
    update_rule: str = "exact"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.update_rule not in UPDATE_RULES:
            raise ValueError(f"update_rule must be one of {UPDATE_RULES}")
        if not 0 < self.min_dof < self.max_dof:
            raise ValueError("need 0 < min_dof < max_dof")
        if self.max_iter < 1 or not self.epsilon > 0:
            raise ValueError("max_iter must be >= 1 and epsilon > 0")
        if self.init_method not in ("hclust-complete", "hclust-ward", "hclust-average", "labels"):
            raise ValueError(f"unknown init_method {self.init_method!r}")

    @property
    def skewed(self) -> bool:
        return self.model == "mcstfa"

    @property
    def linkage(self) -> str:
        return self.init_method.split("-", 1)[1] if self.init_method.startswith("hclust") else "complete"


@dataclass
class EStepQuantities:
    z: np.ndarray        # (n, G) responsibilities
    a: np.ndarray        # (n, G) E[Y | x, g]
    b: np.ndarray        # (n, G) E[1/Y | x, g]
    c: np.ndarray        # (n, G) E[log Y | x, g]
    n_g: np.ndarray
    a_bar: np.ndarray
    b_bar: np.ndarray
    m_g: np.ndarray
    loglik: float


@dataclass(frozen=True, eq=False)
class FitResult:
    params: MixtureParams
    loglik_trace: np.ndarray
    converged: bool
    iterations: int
    bic: float
    hard_labels: np.ndarray
    responsibilities: np.ndarray
    n_params: int
    model: str = "mcstfa"
    config: FitConfig | None = None

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])

    @property
    def G(self) -> int:
        return self.params.G

    @property
    def q(self) -> int:
        return self.params.q


# ---------------------------------------------------------------------------
# E-step


def e_step(data, params: MixtureParams, min_component_size: float | None = None,
           with_log: bool = True) -> EStepQuantities:
    """Responsibilities and the GIG expectations ``a``, ``b``, ``c``.

    ``with_log=False`` leaves ``c`` as NaN; CM-2 does not need it.
    Raises `ComponentCollapseError` when some ``n_g`` falls below
    `min_component_size` (default ``q + 1``).
    """
    x = as_array(data)
    n, p = x.shape
    G = params.G
    logc = np.empty((n, G))
    a = np.empty((n, G))
    b = np.empty((n, G))
    c = np.empty((n, G))
    for g in range(G):
        st = component_stats(x, params, g)
        nu = float(params.dof[g])
        logc[:, g] = np.log(params.weights[g]) + st.log_density
        a[:, g], b[:, g], c[:, g] = gig_expectations(
            st.alpha_quad, nu + st.delta, -0.5 * (nu + p), log_k=st.log_bessel, with_log=with_log
        )
    top = logc.max(axis=1, keepdims=True)
    loglik = float(np.sum(top[:, 0] + np.log(np.sum(np.exp(logc - top), axis=1))))
    z = _responsibilities_from_log(logc)
    n_g = z.sum(axis=0)
    floor = params.q + 1 if min_component_size is None else min_component_size
    small = np.flatnonzero(n_g < floor)
    if small.size:
        raise ComponentCollapseError(
            f"component(s) {small.tolist()} collapsed: effective sizes {np.round(n_g[small], 3).tolist()} < {floor}"
        )
    a_bar = np.sum(z * a, axis=0) / n_g
    b_bar = np.sum(z * b, axis=0) / n_g
    m_g = n_g * (a_bar * b_bar - 1.0)
    return EStepQuantities(z, a, b, c, n_g, a_bar, b_bar, m_g, loglik)


# ---------------------------------------------------------------------------
# CM-1


def solve_dof(mean_b_plus_c: float, lower: float = 0.5, upper: float = 400.0) -> float:
    """Root in ``nu`` of ``log(nu/2) + 1 - digamma(nu/2) - mean_b_plus_c = 0``.

    The left side is strictly decreasing in ``nu``; if the root lies
    outside ``[lower, upper]`` the nearer bound is returned with a
    `DofBoundWarning`.
    """

    def f(nu):
        return np.log(0.5 * nu) + 1.0 - special.digamma(0.5 * nu) - mean_b_plus_c

    f_lo, f_hi = f(lower), f(upper)
    if f_lo <= 0:
        warnings.warn(f"dof root below {lower}; clamped", DofBoundWarning, stacklevel=2)
        return lower
    if f_hi >= 0:
        warnings.warn(f"dof root above {upper}; clamped", DofBoundWarning, stacklevel=2)
        return upper
    return float(optimize.brentq(f, lower, upper, xtol=1e-10, rtol=1e-12))


def _solve_small(mat: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > 1e12:
        ridge = 1e-10 * max(1.0, float(np.abs(mat).max()))
        warnings.warn(f"{what} ill-conditioned (cond={cond:.3g}); using ridge {ridge:.1e}", RuntimeWarning, stacklevel=3)
        mat = mat + ridge * np.eye(mat.shape[0])
    return np.linalg.solve(mat, rhs)


def cm_step_1(data, params: MixtureParams, eq: EStepQuantities, config: FitConfig = FitConfig()) -> MixtureParams:
    """Update weights, factor means, factor skews and degrees of freedom."""
    x = as_array(data)
    n = x.shape[0]
    G, q = params.G, params.q
    xi = np.empty((G, q))
    zeta = np.zeros((G, q))
    nu = np.empty(G)
    for g in range(G):
        sc = params.scale(g)
        gx = x @ sc.gamma_t.T                  # rows gamma_g' x_i
        gl = sc.gamma_t @ params.loadings      # gamma_g' Lambda
        zg, bg = eq.z[:, g], eq.b[:, g]
        if config.skewed:
            m = eq.m_g[g]
            if not m > 0:
                raise ComponentCollapseError(f"m_g <= 0 in component {g}")
            xi[g] = _solve_small(gl, gx.T @ (zg * (eq.a_bar[g] * bg - 1.0)) / m, "gamma' Lambda")
            skew_sum = gx.T @ (zg * (eq.b_bar[g] - bg)) / m
            if config.update_rule == "exact":
                zeta[g] = _solve_small(gl, skew_sum, "gamma' Lambda")
            else:
                zeta[g] = skew_sum
        else:
            xi[g] = _solve_small(gl, gx.T @ (zg * bg) / np.sum(zg * bg), "gamma' Lambda")
        if config.fixed_dof is not None:
            nu[g] = config.fixed_dof
        else:
            s = np.sum(zg * (bg + eq.c[:, g])) / eq.n_g[g]
            nu[g] = solve_dof(s, config.min_dof, config.max_dof)
    weights = eq.n_g / n
    return params.replace(weights=weights / weights.sum(), factor_means=xi, factor_skews=zeta, dof=nu)


# ---------------------------------------------------------------------------
# CM-2


def _floor_spd(m: np.ndarray, floor: float = OMEGA_EIG_FLOOR) -> np.ndarray:
    m = 0.5 * (m + m.T)
    vals, vecs = linalg.eigh(m)
    if vals.min() >= floor:
        return m
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def _cm2_exact(x, params, eq, psi_min):
    n, p = x.shape
    G, q = params.G, params.q
    lam = params.loadings
    eye = np.eye(q)
    a_tot = np.zeros((p, q))
    b_tot = np.zeros((q, q))
    parts = []
    for g in range(G):
        sc = params.scale(g)
        gt = sc.gamma_t
        K = eye - gt @ lam
        xi, zeta, omega = params.factor_means[g], params.factor_skews[g], params.factor_covs[g]
        zg, ag, bg = eq.z[:, g], eq.a[:, g], eq.b[:, g]
        n_g = eq.n_g[g]
        sum_za = float(zg @ ag)
        d = (x - lam @ xi) @ gt.T              # gamma'(x - Lambda xi)
        eta = d + xi
        kz = K @ zeta
        zb = zg * bg
        k_omega = K @ omega
        # sum_i z E[x u'/y] and sum_i z E[u u'/y]
        a_g = x.T @ (zb[:, None] * eta) + np.outer(x.T @ zg, kz)
        s_eta = eta.T @ zg
        b_g = (eta.T * zb) @ eta + np.outer(s_eta, kz) + np.outer(kz, s_eta) + sum_za * np.outer(kz, kz) + n_g * k_omega
        a_tot += a_g
        b_tot += b_g
        # factor covariance: E[(u - xi - y zeta)(u - xi - y zeta)'/y]
        s_d = d.T @ zg
        e_ww = (d.T * zb) @ d + np.outer(s_d, kz) + np.outer(kz, s_d) + sum_za * np.outer(kz, kz) + n_g * k_omega
        e_w = s_d + sum_za * kz
        om = (e_ww - np.outer(e_w, zeta) - np.outer(zeta, e_w) + sum_za * np.outer(zeta, zeta)) / n_g
        parts.append((a_g, b_g, zb, _floor_spd(om)))
    b_tot = 0.5 * (b_tot + b_tot.T)
    new_lam = linalg.solve(b_tot, a_tot.T, assume_a="pos").T
    psi = np.zeros(p)
    for a_g, b_g, zb, _ in parts:
        psi += (x**2).T @ zb - 2.0 * np.sum(a_g * new_lam, axis=1) + np.sum((new_lam @ b_g) * new_lam, axis=1)
    psi = np.maximum(psi / n, psi_min)
    covs = np.stack([om for *_, om in parts])
    return new_lam, psi, covs


def _cm2_printed(x, params, eq, psi_min):
    # forms dense p x p S_g matrices; comparison use only
    n, p = x.shape
    G, q = params.G, params.q
    lam = params.loadings
    eye = np.eye(q)
    num = np.zeros((p, q))
    den = np.zeros((q, q))
    gammas = []
    for g in range(G):
        gt = params.scale(g).gamma_t
        xi, omega = params.factor_means[g], params.factor_covs[g]
        zg, ag = eq.z[:, g], eq.a[:, g]
        eta = (x - lam @ xi) @ gt.T + xi
        za = zg * ag
        num += x.T @ (za[:, None] * eta)
        den += (eta.T * za) @ eta + eq.n_g[g] * (eye - gt @ lam) @ omega
        gammas.append(gt)
    new_lam = linalg.solve(den.T, num.T).T
    psi = np.zeros(p)
    covs = np.empty((G, q, q))
    for g in range(G):
        gt = gammas[g]
        xi, zeta, omega = params.factor_means[g], params.factor_skews[g], params.factor_covs[g]
        zg, bg = eq.z[:, g], eq.b[:, g]
        n_g = eq.n_g[g]
        loc = new_lam @ xi
        sk = new_lam @ zeta
        r = x - loc
        xbar = zg @ x / n_g
        s_g = (r.T * (zg * bg)) @ r / n_g - np.outer(sk, xbar - loc) - np.outer(xbar - loc, sk) + eq.a_bar[g] * np.outer(sk, sk)
        lg = new_lam @ gt - np.eye(p)
        rest = eye - new_lam.T @ gt.T
        psi += n_g * np.diag(lg @ s_g @ lg.T + new_lam @ omega @ rest @ new_lam.T)
        covs[g] = _floor_spd(gt @ s_g @ gt.T + omega @ rest)
    psi = np.maximum(psi / eq.n_g.sum(), psi_min)
    return new_lam, psi, covs


def cm_step_2(data, params: MixtureParams, eq: EStepQuantities, config: FitConfig = FitConfig(),
              psi_min: float = 1e-10) -> MixtureParams:
    """Update the common loadings, noise variances and factor covariances.

    The result is re-expressed with orthonormal loadings (see
    `MixtureParams.normalized`); the mixture density is unaffected.
    """
    x = as_array(data)
    if config.update_rule == "exact":
        lam, psi, covs = _cm2_exact(x, params, eq, psi_min)
    else:
        lam, psi, covs = _cm2_printed(x, params, eq, psi_min)
    return params.replace(loadings=lam, noise_diag=psi, factor_covs=covs).normalized()


# ---------------------------------------------------------------------------
# convergence


def aitken_update(history, epsilon: float = 1e-5):
    """Aitken acceleration on the last three log-likelihoods.

    Returns ``(a_t, l_inf, converged)`` where, for ``(l0, l1, l2)`` the last
    three values, ``a_t = (l2 - l1)/(l1 - l0)`` and
    ``l_inf = l1 + (l2 - l1)/(1 - a_t)``. Convergence means
    ``0 <= l_inf - l1 < epsilon``; two successive changes below ``1e-12``
    relative also count as converged.
    """
    if len(history) < 3:
        raise ValueError("need at least three log-likelihood values")
    l0, l1, l2 = (float(v) for v in history[-3:])
    d_prev, d = l1 - l0, l2 - l1
    tiny = 1e-12 * max(1.0, abs(l2))
    if abs(d) <= tiny and abs(d_prev) <= tiny:
        return 0.0, l2, True
    if d_prev == 0:
        return float("nan"), float("nan"), False
    a_t = d / d_prev
    if a_t >= 1 or abs(1.0 - a_t) < 1e-15:
        return a_t, float("inf"), False
    l_inf = l1 + d / (1.0 - a_t)
    gap = l_inf - l1
    return a_t, l_inf, bool(0 <= gap < epsilon)


# ---------------------------------------------------------------------------
# driver


def n_free_parameters(p: int, q: int, G: int, model: str = "mcstfa", fixed_dof: bool = False) -> int:
    """Free parameters of a fitted model (skews dropped for MCtFA, dofs when fixed)."""
    count = count_free_parameters("MCStFA", p, q, G)
    if model == "mctfa":
        count -= G * q
    if fixed_dof:
        count -= G
    return count


def start_min_size(n: int, G: int, q: int) -> int:
    """Smallest starting cluster kept by `hierarchical_labels` inside `fit`."""
    return max(q + 2, int(np.ceil(n / (10 * G))))


def _starting_params(x, G, q, config, labels, init):
    if init is not None:
        params = init
    else:
        if labels is None:
            if config.init_method == "labels":
                raise ValueError("init_method='labels' needs a labels argument")
            labels = hierarchical_labels(x, G, config.linkage, start_min_size(x.shape[0], G, q))
        params = initial_params(x, labels, q, InitConfig(config.linkage, config.nu0, config.skew0))
    if params.G != G or params.q != q or params.p != x.shape[1]:
        raise ValueError("starting parameters do not match (G, q, p)")
    if not config.skewed:
        params = params.replace(factor_skews=np.zeros((G, q)))
    if config.fixed_dof is not None:
        params = params.replace(dof=np.full(G, float(config.fixed_dof)))
    return params


def _run(x, params, config, psi_min, n_cycles=None):
    trace = []
    converged = False
    max_iter = config.max_iter if n_cycles is None else n_cycles
    it = 0
    need_c = config.fixed_dof is None
    while True:
        eq = e_step(x, params, with_log=need_c)
        trace.append(eq.loglik)
        if len(trace) >= 3 and aitken_update(trace, config.epsilon)[2]:
            converged = True
            break
        if it >= max_iter:
            break
        params = cm_step_1(x, params, eq, config)
        eq = e_step(x, params, with_log=False)
        params = cm_step_2(x, params, eq, config, psi_min)
        it += 1
    return params, eq, np.asarray(trace), converged, it


def fit(data, G: int, q: int, config: FitConfig = FitConfig(), labels=None,
        init: MixtureParams | None = None) -> FitResult:
    """Fit an MCStFA (or MCtFA) model with ``G`` components and ``q`` factors.

    Starting values come from `init` if given, else from `labels`, else from
    agglomerative clustering. With ``config.restarts > 0`` additional starts
    are made from randomly perturbed starting labels and the fit with the
    largest final log-likelihood is kept.

    Components of the returned parameters are ordered by the first
    coordinate of ``Lambda xi_g``; responsibilities and labels follow.
    """
    x = as_array(data)
    n, p = x.shape
    if not 1 <= q < p:
        raise ValueError(f"need 1 <= q < p, got q={q}, p={p}")
    if G < 1:
        raise ValueError("G must be >= 1")
    if n <= G * (q + 1):
        raise ValueError(f"need n > G (q + 1); got n={n}, G={G}, q={q}")
    scale = float(np.mean(np.var(x, axis=0)))
    psi_min = 1e-6 * scale if scale > 0 else 1e-12

    params0 = _starting_params(x, G, q, config, labels, init)
    best = None
    starts = [params0]
    if config.restarts and init is None:
        base = labels if labels is not None else hierarchical_labels(x, G, config.linkage, start_min_size(n, G, q))
        rng = np.random.default_rng(config.seed)
        for _ in range(config.restarts):
            pert = perturb_labels(base, 0.1, rng)
            starts.append(_starting_params(x, G, q, config, pert, None))
    errors = []
    for start in starts:
        try:
            with np.errstate(over="ignore", under="ignore"):
                out = _run(x, start, config, psi_min)
        except (ComponentCollapseError, DensityError, np.linalg.LinAlgError) as exc:
            errors.append(exc)
            log.debug("start failed: %s", exc)
            continue
        if best is None or out[2][-1] > best[2][-1]:
            best = out
    if best is None:
        raise errors[0]
    params, eq, trace, converged, iterations = best

    order = params.canonical_order()
    params = params.permuted(order)
    z = eq.z[:, order]
    k = n_free_parameters(p, q, G, config.model, config.fixed_dof is not None)
    return FitResult(
        params=params,
        loglik_trace=trace,
        converged=converged,
        iterations=iterations,
        bic=bic(float(trace[-1]), k, n),
        hard_labels=np.argmax(z, axis=1),
        responsibilities=z,
        n_params=k,
        model=config.model,
        config=config,
    )
