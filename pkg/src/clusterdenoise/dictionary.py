"""Global dictionary from per-cluster principal components.

Every nonempty cluster contributes its first principal component plus the
``P`` components whose noise-corrected eigenvalue exceeds the noise
variance.  Components come from the SVD of the uncentered member matrix,
so the atoms of one cluster are orthonormal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterModel

__all__ = ["DC_CLUSTER", "Dictionary", "select_rank", "dc_atom", "build_dictionary"]

# provenance cluster index used for the constant atom
DC_CLUSTER = -1


@dataclass
class Dictionary:
    """Unit-norm atoms stored as columns of ``atoms`` (shape ``(n*n, M)``).

    ``provenance[m]`` is ``(cluster, rank)`` for atom ``m``; the constant
    atom is tagged ``(DC_CLUSTER, 0)``.
    """

    atoms: np.ndarray
    provenance: list = field(default_factory=list)
    includes_dc: bool = False
    block_size: int | None = None

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=np.float64)
        if self.atoms.ndim != 2 or self.atoms.shape[1] < 1:
            raise ValueError(f"atoms must be a non-empty 2-D matrix, got {self.atoms.shape}")
        if self.block_size is None:
            self.block_size = int(round(np.sqrt(self.atoms.shape[0])))
        if self.block_size**2 != self.atoms.shape[0]:
            raise ValueError("atom length is not block_size squared")
        if not self.provenance:
            self.provenance = [(0, m) for m in range(self.n_atoms)]
        self.provenance = [tuple(int(v) for v in p) for p in self.provenance]
        if len(self.provenance) != self.n_atoms:
            raise ValueError("provenance length does not match the atom count")
        norms = np.linalg.norm(self.atoms, axis=0)
        if not np.allclose(norms, 1.0, rtol=0, atol=1e-9):
            raise ValueError("dictionary atoms must have unit norm")

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    @property
    def n_features(self) -> int:
        return self.atoms.shape[0]

    def cluster_atoms(self, cluster: int) -> np.ndarray:
        cols = [m for m, (c, _) in enumerate(self.provenance) if c == cluster]
        return self.atoms[:, cols]

    def to_dict(self) -> dict:
        return {
            "block_size": self.block_size,
            "includes_dc": self.includes_dc,
            "atoms": self.atoms.T.tolist(),
            "provenance": [list(p) for p in self.provenance],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Dictionary":
        try:
            return cls(
                atoms=np.asarray(doc["atoms"], dtype=np.float64).T,
                provenance=doc.get("provenance", []),
                includes_dc=bool(doc.get("includes_dc", False)),
                block_size=doc["block_size"],
            )
        except KeyError as exc:
            raise ValueError(f"dictionary document lacks field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Dictionary":
        return cls.from_dict(json.loads(text))


def select_rank(lambdas, sigma_sq: float, rank_gain: float = 1.0) -> int:
    """Number of eigenvalues strictly above ``rank_gain * sigma_sq``."""
    lam = np.asarray(lambdas, dtype=np.float64)
    return int(np.count_nonzero(lam > rank_gain * sigma_sq))


def dc_atom(n: int) -> np.ndarray:
    return np.full(n * n, 1.0 / n)


def build_dictionary(
    data,
    model: ClusterModel,
    sigma: float,
    include_dc: bool = True,
    rank_gain: float = 1.0,
) -> Dictionary:
    """Assemble atoms from the leading singular vectors of every cluster.

    Parameters
    ----------
    data : array-like of shape (n_blocks, n*n)
        Training blocks the model was fitted on.
    model : ClusterModel
    sigma : float
        Noise standard deviation; eigenvalues are ``s**2 / N - sigma**2``
        clamped at 0, and ``1 + select_rank(...)`` components are kept.
    include_dc : bool, default=True
        Prepend the constant atom.
    rank_gain : float, default=1.0
        Multiplier on the ``sigma**2`` rank threshold.

    Clusters whose members are all zero have no principal direction and
    are skipped.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] != model.assignments.size:
        raise ValueError("model assignments do not match the data")
    if data.shape[0] == 0:
        raise ValueError("all clusters are empty")
    n = int(round(np.sqrt(data.shape[1])))
    if n * n != data.shape[1]:
        raise ValueError(f"feature count {data.shape[1]} is not a square")

    atoms, provenance = [], []
    if include_dc:
        atoms.append(dc_atom(n))
        provenance.append((DC_CLUSTER, 0))
    sigma_sq = float(sigma) ** 2
    for k in range(model.n_clusters):
        members = data[model.assignments == k]
        if members.shape[0] == 0 or not np.any(members):
            continue
        _, s, vt = np.linalg.svd(members, full_matrices=False)
        lam = np.maximum(s**2 / members.shape[0] - sigma_sq, 0.0)
        keep = min(1 + select_rank(lam, sigma_sq, rank_gain), vt.shape[0])
        for r in range(keep):
            if s[r] == 0:
                break
            v = vt[r]
            if v[np.argmax(np.abs(v))] < 0:
                v = -v
            atoms.append(v / np.linalg.norm(v))
            provenance.append((k, r))
    if not atoms:
        raise ValueError("no cluster has a nonzero principal direction")
    return Dictionary(np.column_stack(atoms), provenance, include_dc, n)
