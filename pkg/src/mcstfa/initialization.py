"""Starting values: hierarchical clustering labels and principal-axes starts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.cluster import hierarchy

from .model import MixtureParams, as_array

__all__ = ["InitConfig", "LINKAGES", "hierarchical_labels", "initial_params", "perturb_labels"]

LINKAGES = ("complete", "ward", "average")


@dataclass(frozen=True)
class InitConfig:
    linkage: str = "complete"
    nu0: float = 50.0
    skew0: float = 1.0

    def __post_init__(self):
        if self.linkage not in LINKAGES:
            raise ValueError(f"linkage must be one of {LINKAGES}")
        if not self.nu0 > 0:
            raise ValueError("nu0 must be > 0")


def _relabel_by_first_appearance(labels) -> np.ndarray:
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=int)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inverse.ravel()]


def hierarchical_labels(data, G: int, linkage: str = "complete", min_size: int = 1) -> np.ndarray:
    """Agglomerative clustering on Euclidean distances, cut at `G` groups.

    Labels are ``0..G-1`` numbered in order of first appearance. Equal merge
    heights are resolved by scipy's nearest-neighbour chain order, which
    merges the lowest-indexed pair first.

    With ``min_size > 1``, heavy-tailed outliers that would form their own
    tiny clusters are absorbed instead: the tree is cut at the smallest
    number of clusters ``k >= G`` that yields exactly `G` clusters with at
    least `min_size` members, and points in the remaining small clusters
    join the nearest large cluster (by centroid). If no such cut exists
    the plain ``G``-cut is returned.
    """
    x = as_array(data)
    n = x.shape[0]
    if not 1 <= G <= n:
        raise ValueError(f"need 1 <= G <= n, got G={G}, n={n}")
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}")
    if G == n:
        return np.arange(n)
    if G == 1:
        return np.zeros(n, dtype=int)
    tree = hierarchy.linkage(x, method=linkage, metric="euclidean")
    plain = hierarchy.cut_tree(tree, n_clusters=G).ravel()
    if min_size <= 1 or np.bincount(plain).min() >= min_size:
        return _relabel_by_first_appearance(plain)
    ks = np.arange(G + 1, min(n, 4 * G + 40) + 1)
    cuts = hierarchy.cut_tree(tree, n_clusters=ks)
    for j in range(ks.size):
        cut = cuts[:, j]
        counts = np.bincount(cut)
        big = np.flatnonzero(counts >= min_size)
        if big.size > G:
            break
        if big.size < G:
            continue
        centroids = np.stack([x[cut == k].mean(axis=0) for k in big])
        out = np.searchsorted(big, cut)
        small = ~np.isin(cut, big)
        dist = ((x[small, None, :] - centroids[None]) ** 2).sum(axis=2)
        out[small] = np.argmin(dist, axis=1)
        return _relabel_by_first_appearance(out)
    return _relabel_by_first_appearance(plain)


def perturb_labels(labels, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Reassign a random `fraction` of labels uniformly, keeping every group >= 2."""
    labels = np.asarray(labels).copy()
    G = labels.max() + 1
    n_move = int(round(fraction * labels.size))
    for i in rng.choice(labels.size, size=n_move, replace=False):
        new = rng.integers(G)
        if np.sum(labels == labels[i]) > 2:
            labels[i] = new
    return labels


def _floor_spd(m: np.ndarray, floor: float) -> np.ndarray:
    m = 0.5 * (m + m.T)
    vals, vecs = linalg.eigh(m)
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def initial_params(data, labels, q: int, config: InitConfig = InitConfig()) -> MixtureParams:
    """Starting parameters from a hard partition.

    The loadings are the top-`q` principal axes of the pooled
    within-cluster covariance. Factor means and covariances are the cluster
    means and covariances projected onto those axes; the noise variances
    are what the axes leave unexplained on the diagonal.
    """
    x = as_array(data)
    n, p = x.shape
    if not 1 <= q <= p:
        raise ValueError(f"need 1 <= q <= p, got q={q}, p={p}")
    labels = _relabel_by_first_appearance(np.asarray(labels).ravel())
    if labels.size != n:
        raise ValueError("labels length does not match data")
    G = labels.max() + 1
    counts = np.bincount(labels, minlength=G)
    if np.any(counts < 2):
        raise ValueError(f"every cluster needs >= 2 members, got sizes {counts.tolist()}")

    scale = float(np.mean(np.var(x, axis=0)))
    psi_min = 1e-6 * scale if scale > 0 else 1e-12
    means = np.stack([x[labels == g].mean(axis=0) for g in range(G)])
    centred = x - means[labels]
    # right singular vectors of the within-centred data = eigenvectors of the pooled covariance
    _, sv, vt = linalg.svd(centred, full_matrices=False)
    lam = vt[:q].T
    pooled_diag = np.sum(centred**2, axis=0) / n
    explained = (lam**2) @ (sv[:q] ** 2 / n)
    psi = np.maximum(pooled_diag - explained, psi_min)

    xi = means @ lam
    covs = np.empty((G, q, q))
    for g in range(G):
        proj = centred[labels == g] @ lam
        covs[g] = _floor_spd(proj.T @ proj / counts[g], psi_min)

    return MixtureParams(
        weights=counts / n,
        loadings=lam,
        factor_means=xi,
        factor_skews=np.full((G, q), float(config.skew0)),
        factor_covs=covs,
        noise_diag=psi,
        dof=np.full(G, float(config.nu0)),
    ).normalized()
