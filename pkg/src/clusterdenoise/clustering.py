"""Flat K-means and gain-shaped K-means (K-lines) on block vectors.

Data matrices follow the scikit-learn convention: one row per block.

K-means minimises ``sum_k sum_{j in k} ||y_j - c_k||^2``.  K-lines drops the
unit-gain restriction, so every cluster is a line through the origin
spanned by a unit direction ``d_k`` and the objective is the residual
``sum_k sum_{j in k} ||y_j - d_k d_k^T y_j||^2``.  Each block joins the line
with the largest ``|d_k^T y|``, which makes the assignment invariant to the
sign of the block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted, validate_data

__all__ = [
    "KMEANS",
    "KLINES",
    "ClusterModel",
    "ClusterSpectrum",
    "kmeans",
    "klines",
    "kmeans_objective",
    "klines_objective",
    "cluster_spectrum",
    "KMeansClustering",
    "KLinesClustering",
]

KMEANS = "kmeans"
KLINES = "klines"


@dataclass
class ClusterModel:
    """Result of a clustering run.

    ``directions`` holds one row per cluster: the centroid for K-means, the
    unit line direction for K-lines.  ``data`` optionally keeps the
    training matrix so the clustering cost can be evaluated after a JSON
    round trip.
    """

    kind: str
    directions: np.ndarray
    assignments: np.ndarray
    sizes: np.ndarray = None
    objective_trace: list = field(default_factory=list)
    data: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (KMEANS, KLINES):
            raise ValueError(f"unknown cluster kind {self.kind!r}")
        self.directions = np.atleast_2d(np.asarray(self.directions, dtype=np.float64))
        self.assignments = np.asarray(self.assignments, dtype=np.intp)
        k = self.n_clusters
        if self.assignments.size and (
            self.assignments.min() < 0 or self.assignments.max() >= k
        ):
            raise ValueError("assignment refers to a nonexistent cluster")
        counts = np.bincount(self.assignments, minlength=k)
        if self.sizes is None:
            self.sizes = counts
        else:
            self.sizes = np.asarray(self.sizes, dtype=np.intp)
            if not np.array_equal(self.sizes, counts):
                raise ValueError("sizes do not match the assignments")
        self.objective_trace = [float(v) for v in self.objective_trace]
        if self.data is not None:
            self.data = np.asarray(self.data, dtype=np.float64)
            if self.data.shape[0] != self.assignments.size:
                raise ValueError("data rows and assignments disagree in length")

    @property
    def n_clusters(self) -> int:
        return self.directions.shape[0]

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else float("nan")

    def members(self, data, k: int) -> np.ndarray:
        return np.asarray(data)[self.assignments == k]

    def to_dict(self, include_data: bool = True) -> dict:
        doc = {
            "kind": self.kind,
            "directions": self.directions.tolist(),
            "assignments": self.assignments.tolist(),
            "sizes": self.sizes.tolist(),
            "objective_trace": list(self.objective_trace),
        }
        if include_data and self.data is not None:
            doc["data"] = self.data.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ClusterModel":
        try:
            return cls(
                kind=doc["kind"],
                directions=doc["directions"],
                assignments=doc["assignments"],
                sizes=doc.get("sizes"),
                objective_trace=doc.get("objective_trace", []),
                data=doc.get("data"),
            )
        except KeyError as exc:
            raise ValueError(f"cluster model document lacks field {exc}") from None

    def to_json(self, include_data: bool = True) -> str:
        return json.dumps(self.to_dict(include_data))

    @classmethod
    def from_json(cls, text: str) -> "ClusterModel":
        return cls.from_dict(json.loads(text))


def _check_data(data, n_clusters):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"data must be 2-D (n_blocks, n_features), got {data.shape}")
    if n_clusters < 1:
        raise ValueError(f"n_clusters must be >= 1, got {n_clusters}")
    if n_clusters > data.shape[0]:
        raise ValueError(
            f"n_clusters={n_clusters} exceeds the number of blocks {data.shape[0]}"
        )
    return data


def kmeans_objective(data, centers, assignments) -> float:
    diff = data - centers[assignments]
    return float(np.einsum("ij,ij->", diff, diff))


def klines_objective(data, directions, assignments) -> float:
    d = directions[assignments]
    proj = np.einsum("ij,ij->i", data, d)
    resid = data - proj[:, None] * d
    return float(np.einsum("ij,ij->", resid, resid))


def _kmeans_assign(data, centers):
    sq = (
        np.einsum("ij,ij->i", data, data)[:, None]
        - 2.0 * data @ centers.T
        + np.einsum("ij,ij->i", centers, centers)[None, :]
    )
    return np.argmin(sq, axis=1)


def _klines_assign(data, directions):
    return np.argmax(np.abs(data @ directions.T), axis=1)


def _plusplus(data, n_clusters, rng, lines):
    """Seeding by D^2 sampling, against points (K-means) or lines (K-lines)."""
    n = data.shape[0]
    energy = np.einsum("ij,ij->i", data, data)

    def residual(c):
        if lines:
            return np.maximum(energy - (data @ c) ** 2, 0.0)
        diff = data - c
        return np.einsum("ij,ij->i", diff, diff)

    def as_center(i):
        c = data[i].copy()
        if lines:
            norm = np.linalg.norm(c)
            if norm > 0:
                return c / norm
            c = np.zeros_like(c)
            c[0] = 1.0
        return c

    if lines and energy.sum() > 0:
        first = rng.choice(n, p=energy / energy.sum())
    else:
        first = rng.integers(n)
    centers = [as_center(first)]
    dist = residual(centers[0])
    for _ in range(1, n_clusters):
        total = dist.sum()
        if total > 0:
            idx = rng.choice(n, p=dist / total)
        else:
            idx = rng.integers(n)
        centers.append(as_center(idx))
        dist = np.minimum(dist, residual(centers[-1]))
    return np.array(centers)


def _reseed_empty(data, centers, assignments, residuals, lines):
    """Move each empty cluster onto a distinct block with the largest residual."""
    sizes = np.bincount(assignments, minlength=centers.shape[0])
    empty = np.flatnonzero(sizes == 0)
    if empty.size == 0:
        return centers
    order = np.argsort(-residuals, kind="stable")
    for k, idx in zip(empty, order):
        c = data[idx]
        if lines:
            norm = np.linalg.norm(c)
            if norm == 0:
                continue
            c = c / norm
        centers[k] = c
    return centers


def _dominant_direction(members, previous):
    """Leading right singular vector of the member matrix, sign-normalised."""
    if not np.any(members):
        return previous
    _, _, vt = np.linalg.svd(members, full_matrices=False)
    d = vt[0]
    if d[np.argmax(np.abs(d))] < 0:
        d = -d
    return d / np.linalg.norm(d)


def _lloyd(data, centers, max_iters, tol, lines):
    n_clusters = centers.shape[0]
    assign_fn = _klines_assign if lines else _kmeans_assign
    objective_fn = klines_objective if lines else kmeans_objective
    trace = []
    assignments = None
    for _ in range(max_iters):
        new_assign = assign_fn(data, centers)
        if assignments is not None and np.array_equal(new_assign, assignments):
            break
        assignments = new_assign
        for k in range(n_clusters):
            members = data[assignments == k]
            if members.shape[0] == 0:
                continue
            if lines:
                centers[k] = _dominant_direction(members, centers[k])
            else:
                centers[k] = members.mean(axis=0)
        if lines:
            proj = np.einsum("ij,ij->i", data, centers[assignments])
            residuals = np.einsum("ij,ij->i", data, data) - proj**2
        else:
            diff = data - centers[assignments]
            residuals = np.einsum("ij,ij->i", diff, diff)
        centers = _reseed_empty(data, centers, assignments, residuals, lines)
        trace.append(objective_fn(data, centers, assignments))
        if len(trace) > 1 and trace[-2] > 0:
            if (trace[-2] - trace[-1]) / trace[-2] < tol:
                break
        if trace[-1] == 0.0:
            break
    return centers, assignments, trace


def _kmeans_transfer_gains(data, assignments, n_clusters):
    """Exact objective change of moving each point to each other cluster."""
    sizes = np.bincount(assignments, minlength=n_clusters).astype(np.float64)
    centers = np.zeros((n_clusters, data.shape[1]))
    np.add.at(centers, assignments, data)
    nonempty = sizes > 0
    centers[nonempty] /= sizes[nonempty, None]
    dist = ((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    own = assignments
    na = sizes[own]
    with np.errstate(divide="ignore", invalid="ignore"):
        removal = na / (na - 1) * dist[np.arange(len(own)), own]
    delta = sizes / (sizes + 1) * dist - removal[:, None]
    # emptying a singleton is never allowed
    delta[na <= 1] = np.inf
    return delta


def _klines_transfer_gains(data, assignments, n_clusters):
    d = data.shape[1]
    sizes = np.bincount(assignments, minlength=n_clusters)
    outer = np.einsum("ij,ik->ijk", data, data)
    scatter = np.zeros((n_clusters, d, d))
    np.add.at(scatter, assignments, outer)
    top = np.linalg.eigvalsh(scatter)[:, -1]
    own = assignments
    removed = np.linalg.eigvalsh(scatter[own] - outer)[:, -1]
    added = np.linalg.eigvalsh(scatter[None, :] + outer[:, None])[..., -1]
    # objective is sum_k (trace S_k - lambda_max S_k); traces cancel on a move
    delta = -(added - top[None, :]) + (top[own] - removed)[:, None]
    delta[sizes[own] <= 1] = np.inf
    return delta


def _transfer_refine(data, assignments, n_clusters, lines, max_moves):
    """Apply the best improving single-point move until none is left."""
    gains = _klines_transfer_gains if lines else _kmeans_transfer_gains
    assignments = assignments.copy()
    scale = np.einsum("ij,ij->", data, data)
    for _ in range(max_moves):
        delta = gains(data, assignments, n_clusters)
        delta[np.arange(len(assignments)), assignments] = np.inf
        i, k = np.unravel_index(np.argmin(delta), delta.shape)
        if not delta[i, k] < -1e-12 * scale:
            break
        assignments[i] = k
    return assignments


def _fit_centers(data, assignments, centers, lines):
    centers = centers.copy()
    for k in range(centers.shape[0]):
        members = data[assignments == k]
        if members.shape[0] == 0:
            continue
        centers[k] = _dominant_direction(members, centers[k]) if lines else members.mean(axis=0)
    return centers


# the swap search re-runs Lloyd n_samples * n_clusters times per accepted swap
_SWAP_BUDGET = 64


def _refine_affordable(data, n_clusters, lines):
    n, d = data.shape
    if not lines:
        return n * n_clusters * d <= 5e7
    return n * n_clusters * d**3 <= 1e6


def _transfer_step(data, run, lines):
    centers, assignments, trace = run
    moved = _transfer_refine(data, assignments, centers.shape[0], lines, 10 * len(assignments))
    if np.array_equal(moved, assignments):
        return run
    centers = _fit_centers(data, moved, centers, lines)
    objective_fn = klines_objective if lines else kmeans_objective
    return centers, moved, trace + [objective_fn(data, centers, moved)]


def _swap_search(data, run, lines, max_iters, tol):
    """Relocate one centre onto a block and re-converge; keep any improvement."""
    energy = np.einsum("ij,ij->i", data, data)
    candidates = np.flatnonzero(energy > 0) if lines else np.arange(data.shape[0])
    improved = True
    while improved:
        improved = False
        centers, _, trace = run
        for k in range(centers.shape[0]):
            for j in candidates:
                start = centers.copy()
                start[k] = data[j] / np.sqrt(energy[j]) if lines else data[j]
                cand = _transfer_step(data, _lloyd(data, start, max_iters, tol, lines), lines)
                if cand[2][-1] < trace[-1] * (1.0 - 1e-12):
                    run = cand[0], cand[1], trace + [cand[2][-1]]
                    improved = True
                    break
            if improved:
                break
    return run


def _cluster(data, n_clusters, max_iters, seed, n_init, tol, lines, refine=None):
    data = _check_data(data, n_clusters)
    if refine is None:
        refine = _refine_affordable(data, n_clusters, lines)
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    if n_init < 1:
        raise ValueError(f"n_init must be >= 1, got {n_init}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        centers = _plusplus(data, n_clusters, rng, lines)
        run = _lloyd(data, centers, max_iters, tol, lines)
        if refine:
            run = _transfer_step(data, run, lines)
        if best is None or run[2][-1] < best[2][-1]:
            best = run
    if refine and data.shape[0] * n_clusters <= _SWAP_BUDGET:
        best = _swap_search(data, best, lines, max_iters, tol)
    centers, assignments, trace = best
    return ClusterModel(
        kind=KLINES if lines else KMEANS,
        directions=centers,
        assignments=assignments,
        objective_trace=trace,
        data=data,
    )


def kmeans(data, n_clusters, max_iters=50, seed=0, n_init=1, tol=1e-6, refine=None) -> ClusterModel:
    """Lloyd's K-means with k-means++ seeding.

    Parameters
    ----------
    data : array-like of shape (n_blocks, n_features)
    n_clusters : int
    max_iters : int, default=50
    seed : int, default=0
    n_init : int, default=1
        Independent restarts; the run with the lowest objective wins.
    tol : float, default=1e-6
        Stop once the relative objective drop falls below ``tol``.  The run
        also stops when assignments no longer change.
    refine : bool or None, default=None
        After Lloyd iterations, keep applying the single-point transfer
        that lowers the objective most (exact, with refitted clusters)
        until no move helps.  This escapes Lloyd fixed points that are not
        local optima.  On tiny problems the best restart is then polished
        by a swap search that relocates one centre onto each block in
        turn.  ``None`` enables refinement when the cost is small.
    """
    return _cluster(data, n_clusters, max_iters, seed, n_init, tol, False, refine)


def klines(data, n_clusters, max_iters=50, seed=0, n_init=1, tol=1e-6, refine=None) -> ClusterModel:
    """Gain-shaped K-means: cluster blocks onto ``n_clusters`` lines through the origin.

    Alternates between assigning each block to the line of largest
    absolute projection and refitting each line as the dominant singular
    direction of its members.  Empty clusters are reseeded on the blocks
    with the largest residual.  Parameters match :func:`kmeans`; the
    transfer refinement needs ``O(n_samples * n_clusters)`` small
    eigen-decompositions per move, so ``refine=None`` turns it on only for
    small problems.
    """
    return _cluster(data, n_clusters, max_iters, seed, n_init, tol, True, refine)


@dataclass
class ClusterSpectrum:
    """Noise-corrected eigen-decomposition of each nonempty cluster.

    ``eigenvalues[i]`` are descending and clamped at zero after subtracting
    the noise variance; ``principal_directions[i]`` holds the matching
    eigenvectors as columns.  Empty clusters are listed in ``empty``.
    """

    cluster_ids: list
    sizes: list
    eigenvalues: list
    principal_directions: list
    empty: list

    def pairs(self):
        return list(zip(self.eigenvalues, self.sizes))


def cluster_spectrum(data, model: ClusterModel, sigma: float) -> ClusterSpectrum:
    """Eigenvalues of each cluster's second moment minus ``sigma**2``, clamped at 0.

    K-lines clusters use the uncentered moment ``Y^T Y / N``; K-means clusters
    are centred on their mean first.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.shape[0] != model.assignments.size:
        raise ValueError("model assignments do not match the data")
    ids, sizes, lams, vecs, empty = [], [], [], [], []
    for k in range(model.n_clusters):
        members = data[model.assignments == k]
        if members.shape[0] == 0:
            empty.append(k)
            continue
        if model.kind == KMEANS:
            members = members - members.mean(axis=0)
        moment = members.T @ members / members.shape[0]
        w, v = np.linalg.eigh(moment)
        order = np.argsort(w)[::-1]
        ids.append(k)
        sizes.append(members.shape[0])
        lams.append(np.maximum(w[order] - sigma**2, 0.0))
        vecs.append(v[:, order])
    return ClusterSpectrum(ids, sizes, lams, vecs, empty)


class _BaseClustering(ClusterMixin, BaseEstimator):
    _lines = False

    def __init__(self, n_clusters=8, max_iter=50, n_init=1, tol=1e-6, random_state=None):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.n_init = n_init
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64)
        seed = check_random_state(self.random_state).randint(np.iinfo(np.int32).max)
        fn = klines if self._lines else kmeans
        self.model_ = fn(X, self.n_clusters, self.max_iter, seed, self.n_init, self.tol)
        self.cluster_centers_ = self.model_.directions
        self.labels_ = self.model_.assignments
        self.inertia_ = self.model_.objective
        self.n_iter_ = len(self.model_.objective_trace)
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        if self._lines:
            return _klines_assign(X, self.cluster_centers_)
        return _kmeans_assign(X, self.cluster_centers_)

    def score(self, X, y=None):
        """Negative objective of ``X`` under the fitted clusters."""
        labels = self.predict(X)
        X = check_array(X, dtype=np.float64)
        fn = klines_objective if self._lines else kmeans_objective
        return -fn(X, self.cluster_centers_, labels)


class KMeansClustering(_BaseClustering):
    """Flat-centroid K-means estimator.

    Parameters
    ----------
    n_clusters : int, default=8
    max_iter : int, default=50
    n_init : int, default=1
    tol : float, default=1e-6
    random_state : int, RandomState instance or None

    Attributes
    ----------
    model_ : ClusterModel
    cluster_centers_ : ndarray of shape (n_clusters, n_features)
    labels_ : ndarray of shape (n_samples,)
    inertia_ : float
    n_iter_ : int
    """


class KLinesClustering(_BaseClustering):
    """Gain-shaped K-means (K-lines) estimator.

    Same parameters and attributes as :class:`KMeansClustering`;
    ``cluster_centers_`` holds unit line directions.
    """

    _lines = True
