"""Exhaustive reference solvers used to check the greedy/iterative code paths.

Nothing here imports the package under test.
"""

import itertools

import numpy as np


def all_assignments(n_points, n_clusters):
    return np.array(list(itertools.product(range(n_clusters), repeat=n_points)), dtype=np.intp)


def brute_kmeans(data, n_clusters):
    """Minimum of sum ||y - mean||^2 over every assignment of points to clusters."""
    data = np.asarray(data, dtype=float)
    assign = all_assignments(data.shape[0], n_clusters)
    sq = np.einsum("ij,ij->i", data, data)
    total = np.zeros(assign.shape[0])
    for k in range(n_clusters):
        member = (assign == k).astype(float)
        count = member.sum(axis=1)
        s = member @ data
        q = member @ sq
        with np.errstate(divide="ignore", invalid="ignore"):
            sse = q - np.einsum("ij,ij->i", s, s) / count
        total += np.where(count > 0, sse, 0.0)
    best = int(np.argmin(total))
    return float(total[best]), assign[best]


def brute_klines(data, n_clusters):
    """Minimum over assignments of sum (||Y_k||_F^2 - sigma_max(Y_k)^2)."""
    data = np.asarray(data, dtype=float)
    d = data.shape[1]
    assign = all_assignments(data.shape[0], n_clusters)
    outer = np.einsum("ij,ik->ijk", data, data).reshape(data.shape[0], d * d)
    sq = np.einsum("ij,ij->i", data, data)
    total = np.zeros(assign.shape[0])
    for k in range(n_clusters):
        member = (assign == k).astype(float)
        scatter = (member @ outer).reshape(-1, d, d)
        top = np.linalg.eigvalsh(scatter)[:, -1]
        total += member @ sq - top
    best = int(np.argmin(total))
    return float(total[best]), assign[best]


def brute_sparse(y, atoms, max_atoms):
    """Best residual energy for every support size 0..max_atoms.

    Returns a list ``best[k]`` of the minimum ``||y - D_S x||^2`` over all
    supports ``S`` with ``|S| = k``.
    """
    y = np.asarray(y, dtype=float)
    best = [float(y @ y)]
    for k in range(1, max_atoms + 1):
        res_k = np.inf
        for support in itertools.combinations(range(atoms.shape[1]), k):
            sub = atoms[:, support]
            x = np.linalg.lstsq(sub, y, rcond=None)[0]
            r = y - sub @ x
            res_k = min(res_k, float(r @ r))
        best.append(res_k)
    return best
