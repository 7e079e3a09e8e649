"""MSE lower bound of a clustering and the resulting clustering cost.

For a cluster with ``N`` members whose noise-free covariance has
eigenvalues ``lam_j``, any estimator of a member block has

    E||z - z_hat||^2 >= (sigma^2 / N) * sum_j lam_j / (lam_j + sigma^2 / N)

The clustering cost is the sum of this bound over all clusters.  Clusters
whose eigenvalues all sit below a smoothness cutoff contribute almost
nothing and may be skipped, which gives the non-smooth cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusterSpectrum

__all__ = ["ClusteringCost", "cluster_mse_bound", "clustering_cost"]


def cluster_mse_bound(lambdas, n_members: int, sigma: float, n: int | None = None) -> float:
    """Lower bound on the per-block MSE for one cluster.

    Parameters
    ----------
    lambdas : array-like
        Noise-free eigenvalues of the cluster, ``>= 0``.  Missing slots up
        to ``n**2`` are zero and contribute nothing.
    n_members : int
        Cluster size ``N``.
    sigma : float
        Noise standard deviation, ``> 0``.
    n : int, optional
        Block side; only used to check that at most ``n**2`` eigenvalues
        are given.
    """
    if n_members < 1:
        raise ValueError(f"n_members must be >= 1, got {n_members}")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    lam = np.asarray(lambdas, dtype=np.float64).ravel()
    if n is not None and lam.size > n * n:
        raise ValueError(f"{lam.size} eigenvalues for a {n}x{n} block")
    if np.any(lam < 0):
        raise ValueError("eigenvalues must be nonnegative")
    c = sigma**2 / n_members
    pos = lam > 0
    # lam / (lam + c) written so that lam = inf gives exactly 1
    ratios = np.zeros_like(lam)
    with np.errstate(over="ignore"):
        ratios[pos] = 1.0 / (1.0 + c / lam[pos])
    return float(c * ratios.sum())


@dataclass(frozen=True)
class ClusteringCost:
    total: float
    non_smooth: float
    n_smooth_clusters: int


def clustering_cost(spectrums, sigma: float, smooth_cutoff: float | None = None) -> ClusteringCost:
    """Sum of :func:`cluster_mse_bound` over clusters.

    ``spectrums`` is a :class:`ClusterSpectrum` or an iterable of
    ``(lambdas, n_members)`` pairs.  A cluster counts as smooth when every
    eigenvalue is below ``smooth_cutoff`` (default ``sigma**2``); smooth
    clusters are left out of ``non_smooth``.
    """
    pairs = spectrums.pairs() if isinstance(spectrums, ClusterSpectrum) else list(spectrums)
    if not pairs:
        raise ValueError("need at least one nonempty cluster")
    if smooth_cutoff is None:
        smooth_cutoff = sigma**2
    total = 0.0
    non_smooth = 0.0
    n_smooth = 0
    for lam, n_members in pairs:
        b = cluster_mse_bound(lam, n_members, sigma)
        total += b
        if np.all(np.asarray(lam) < smooth_cutoff):
            n_smooth += 1
        else:
            non_smooth += b
    return ClusteringCost(total, non_smooth, n_smooth)
