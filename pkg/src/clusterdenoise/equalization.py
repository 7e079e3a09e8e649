"""Block-variance histogram equalization of the training set.

Smooth blocks of a noisy image all have variance close to the noise
variance and pile up in one histogram bin.  Each block is kept with
probability ``T = min(1, th / p)``, where ``p`` is the probability mass of
its variance bin, so that no bin keeps more than ``th`` of the expected
mass while sparsely populated (detailed) bins are kept whole.

The threshold is either given outright or solved per image so that the
expected retained fraction ``sum_b min(p_b, th)`` hits a target; a fixed
``th`` keeps very different fractions of different photographs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .patching import BlockSet

__all__ = [
    "DEFAULT_BINS",
    "DEFAULT_RETENTION",
    "VarianceHistogram",
    "EqualizationPolicy",
    "variance_histogram",
    "keep_probability",
    "threshold_for_retention",
    "selection_uniforms",
    "select_training_blocks",
    "select_uniform_blocks",
]

DEFAULT_BINS = 64
DEFAULT_RETENTION = 0.73


@dataclass(frozen=True)
class VarianceHistogram:
    """Equal-width histogram of block variances, normalised to unit mass."""

    bin_edges: np.ndarray
    density: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.density)

    def bin_index(self, variances) -> np.ndarray:
        """Bin of each variance; out-of-range values go to the nearest edge bin."""
        v = np.asarray(variances, dtype=np.float64)
        idx = np.searchsorted(self.bin_edges, v, side="right") - 1
        return np.clip(idx, 0, self.n_bins - 1)

    def mass(self, variances) -> np.ndarray:
        return self.density[self.bin_index(variances)]


@dataclass(frozen=True)
class EqualizationPolicy:
    """Keep-probability threshold, histogram resolution and selection seed.

    With ``threshold=None`` the threshold is solved from the histogram so
    that the expected kept fraction equals ``target_retention``.
    """

    threshold: float | None = None
    bins: int = DEFAULT_BINS
    seed: int = 0
    target_retention: float = DEFAULT_RETENTION

    def __post_init__(self):
        if self.threshold is not None and not 0 < self.threshold <= 1:
            raise ValueError(f"threshold must lie in (0, 1], got {self.threshold}")
        if not 0 < self.target_retention <= 1:
            raise ValueError(
                f"target_retention must lie in (0, 1], got {self.target_retention}"
            )
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2, got {self.bins}")

    def resolve(self, hist: "VarianceHistogram") -> float:
        if self.threshold is not None:
            return float(self.threshold)
        return threshold_for_retention(hist, self.target_retention)


def variance_histogram(variances, bins: int = DEFAULT_BINS) -> VarianceHistogram:
    """Histogram of block variances over ``[0, max variance]`` in ``bins`` equal bins."""
    v = np.asarray(variances, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot build a histogram of zero blocks")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    top = float(v.max())
    if top <= 0.0:
        top = 1.0
    edges = np.linspace(0.0, top, bins + 1)
    # np.histogram puts the maximum in the last (closed) bin
    counts, _ = np.histogram(v, bins=edges)
    return VarianceHistogram(edges, counts / v.size)


def keep_probability(variance, hist: VarianceHistogram, th: float) -> np.ndarray:
    """Probability of keeping a block of the given variance: ``th / p`` if ``p > th`` else 1."""
    p = hist.mass(variance)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > th, th / np.where(p > 0, p, 1.0), 1.0)
    return t if t.ndim else float(t)


def threshold_for_retention(hist: VarianceHistogram, retention: float) -> float:
    """Smallest ``th`` with ``sum_b min(p_b, th) >= retention`` (water-filling)."""
    if not 0 < retention <= 1:
        raise ValueError(f"retention must lie in (0, 1], got {retention}")
    p = np.sort(hist.density)[::-1]
    if retention >= p.sum() - 1e-12:
        return 1.0
    # with the j largest bins capped at th: j * th + (mass of the rest) = retention
    tail = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
    for j in range(1, p.size + 1):
        th = (retention - tail[j - 1]) / j
        if th >= (p[j] if j < p.size else 0.0):
            return float(min(max(th, np.finfo(float).tiny), 1.0))
    return 1.0


def selection_uniforms(n_blocks: int, seed: int) -> np.ndarray:
    """One uniform draw per block from a counter-based (Philox) stream.

    Draw ``i`` depends only on ``(seed, i)``, so any evaluation order gives
    the same subset.
    """
    return np.random.Generator(np.random.Philox(key=seed)).random(n_blocks)


def select_training_blocks(
    blocks: BlockSet, variances, policy: EqualizationPolicy
) -> BlockSet:
    """Keep each block independently with its equalizing keep probability."""
    variances = np.asarray(variances, dtype=np.float64)
    if variances.shape != (len(blocks),):
        raise ValueError("variances must have one entry per block")
    hist = variance_histogram(variances, policy.bins)
    th = policy.resolve(hist)
    keep = selection_uniforms(len(blocks), policy.seed) < keep_probability(
        variances, hist, th
    )
    return blocks.subset(keep)


def select_uniform_blocks(blocks: BlockSet, count: int, seed: int) -> BlockSet:
    """Uniformly random subset of exactly ``count`` blocks, original order kept."""
    if not 0 <= count <= len(blocks):
        raise ValueError(f"count {count} outside [0, {len(blocks)}]")
    scores = selection_uniforms(len(blocks), seed)
    chosen = np.sort(np.argsort(scores, kind="stable")[:count])
    return blocks.subset(chosen)
