"""Error-constrained orthogonal matching pursuit over a :class:`Dictionary`.

Each block is coded greedily: pick the atom most correlated with the
residual, refit all selected coefficients by least squares, and stop once
the residual energy is within ``epsilon`` or ``max_atoms`` atoms are used.
The denoised block is the orthogonal projection of the noisy block onto
the selected atoms.

:func:`sparse_code` handles one vector and is the reference path;
:func:`sparse_code_batch` runs the same pursuit for many blocks at once
using the Gram matrix of the dictionary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary

__all__ = [
    "DEFAULT_EPSILON_GAIN",
    "CoderConfig",
    "SparseCode",
    "sparse_code",
    "denoise_block",
    "sparse_code_batch",
    "denoise_blocks",
]

DEFAULT_EPSILON_GAIN = 1.15
# an atom must cut the residual energy by at least this relative amount
_MIN_RELATIVE_DECREASE = 1e-12
# residual correlations below this fraction of ||y|| count as zero
_ZERO_CORRELATION = 1e-10


@dataclass(frozen=True)
class CoderConfig:
    """Residual-energy budget ``epsilon`` and support-size cap ``max_atoms``."""

    epsilon: float
    max_atoms: int

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.max_atoms < 1:
            raise ValueError(f"max_atoms must be >= 1, got {self.max_atoms}")

    @classmethod
    def from_noise(cls, sigma, block_size=8, gain=DEFAULT_EPSILON_GAIN, max_atoms=None):
        """Budget ``(gain * n * sigma)**2`` with the cap defaulting to ``n*n // 2``."""
        if max_atoms is None:
            max_atoms = max(1, block_size * block_size // 2)
        return cls((gain * block_size * sigma) ** 2, max_atoms)


@dataclass
class SparseCode:
    support: np.ndarray
    coefficients: np.ndarray
    residual_norm_sq: float

    def to_dense(self, n_atoms: int) -> np.ndarray:
        x = np.zeros(n_atoms)
        x[self.support] = self.coefficients
        return x


def _atoms(dictionary):
    return dictionary.atoms if isinstance(dictionary, Dictionary) else np.asarray(dictionary, dtype=np.float64)


def sparse_code(y, dictionary, cfg: CoderConfig) -> SparseCode:
    """Greedy sparse code of one block vector.

    Ties in correlation go to the lowest atom index.  Coefficients are the
    minimum-norm least-squares fit on the support.  Pursuit also stops when
    the best remaining atom no longer lowers the residual.
    """
    D = _atoms(dictionary)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != D.shape[0]:
        raise ValueError(f"block has {y.shape[0]} samples, atoms have {D.shape[0]}")
    support: list[int] = []
    coef = np.zeros(0)
    residual = y.copy()
    res = float(y @ y)
    floor = _ZERO_CORRELATION * np.sqrt(res)
    while res > cfg.epsilon and len(support) < min(cfg.max_atoms, D.shape[1]):
        corr = np.abs(D.T @ residual)
        corr[support] = -1.0
        k = int(np.argmax(corr))
        if corr[k] <= floor:
            break
        trial = support + [k]
        trial_coef = np.linalg.lstsq(D[:, trial], y, rcond=None)[0]
        trial_resid = y - D[:, trial] @ trial_coef
        trial_res = float(trial_resid @ trial_resid)
        if trial_res >= res * (1.0 - _MIN_RELATIVE_DECREASE):
            break
        support, coef, residual, res = trial, trial_coef, trial_resid, trial_res
    return SparseCode(np.array(support, dtype=np.intp), coef, res)


def denoise_block(y, dictionary, cfg: CoderConfig) -> np.ndarray:
    """Projection of ``y`` onto the atoms chosen by :func:`sparse_code`."""
    D = _atoms(dictionary)
    code = sparse_code(y, D, cfg)
    return D[:, code.support] @ code.coefficients


def _solve(gram, rhs):
    try:
        return np.linalg.solve(gram, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return np.einsum("bij,bj->bi", np.linalg.pinv(gram, hermitian=True), rhs)


def _code_chunk(Y, D, G, cfg):
    b = Y.shape[0]
    m = D.shape[1]
    cap = min(cfg.max_atoms, m)
    alpha = Y @ D
    energy = np.einsum("ij,ij->i", Y, Y)
    floor = _ZERO_CORRELATION * np.sqrt(energy)
    support = np.zeros((b, cap), dtype=np.intp)
    coef = np.zeros((b, cap))
    size = np.zeros(b, dtype=np.intp)
    res = energy.copy()
    corr = alpha.copy()
    chosen = np.zeros((b, m), dtype=bool)
    active = np.flatnonzero(res > cfg.epsilon)
    for step in range(cap):
        if active.size == 0:
            break
        c = np.abs(corr[active])
        c[chosen[active]] = -1.0
        k = np.argmax(c, axis=1)
        ok = c[np.arange(active.size), k] > floor[active]
        active, k = active[ok], k[ok]
        if active.size == 0:
            break
        S = np.concatenate([support[active, :step], k[:, None]], axis=1)
        rhs = np.take_along_axis(alpha[active], S, axis=1)
        x = _solve(G[S[:, :, None], S[:, None, :]], rhs)
        new_res = np.maximum(energy[active] - np.einsum("bi,bi->b", x, rhs), 0.0)
        ok = new_res < res[active] * (1.0 - _MIN_RELATIVE_DECREASE)
        active, S, x, new_res = active[ok], S[ok], x[ok], new_res[ok]
        support[active, : step + 1] = S
        coef[active, : step + 1] = x
        coef[active, step + 1 :] = 0.0
        size[active] = step + 1
        res[active] = new_res
        chosen[active, S[:, -1]] = True
        corr[active] = alpha[active] - np.einsum("bsm,bs->bm", G[S], x)
        active = active[new_res > cfg.epsilon]
    return support, coef, size, res


def sparse_code_batch(Y, dictionary, cfg: CoderConfig, chunk_size: int = 4096):
    """Code every row of ``Y`` with the same pursuit as :func:`sparse_code`.

    Returns
    -------
    support : ndarray of shape (n_blocks, cap)
        Selected atom indices; only the first ``sizes[i]`` entries of row
        ``i`` are meaningful.
    coefficients : ndarray of shape (n_blocks, cap)
    sizes : ndarray of shape (n_blocks,)
    residual_norm_sq : ndarray of shape (n_blocks,)
    """
    D = _atoms(dictionary)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] != D.shape[0]:
        raise ValueError(f"blocks must have shape (n, {D.shape[0]}), got {Y.shape}")
    G = D.T @ D
    parts = [
        _code_chunk(Y[i : i + chunk_size], D, G, cfg)
        for i in range(0, Y.shape[0], chunk_size)
    ]
    if not parts:
        cap = min(cfg.max_atoms, D.shape[1])
        return (np.zeros((0, cap), np.intp), np.zeros((0, cap)), np.zeros(0, np.intp), np.zeros(0))
    return tuple(np.concatenate(p) for p in zip(*parts))


def denoise_blocks(Y, dictionary, cfg: CoderConfig, chunk_size: int = 4096) -> np.ndarray:
    """Row-wise :func:`denoise_block` for a block matrix of shape ``(n_blocks, n*n)``."""
    D = _atoms(dictionary)
    support, coef, _, _ = sparse_code_batch(Y, D, cfg, chunk_size)
    out = np.empty((support.shape[0], D.shape[0]))
    atoms_t = D.T
    for i in range(0, support.shape[0], chunk_size):
        s = support[i : i + chunk_size]
        out[i : i + chunk_size] = np.einsum("bs,bsd->bd", coef[i : i + chunk_size], atoms_t[s])
    return out
