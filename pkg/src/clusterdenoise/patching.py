"""Overlapping block extraction and overlap-averaged reassembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image_io import as_image

__all__ = [
    "BlockSet",
    "block_offsets",
    "extract_blocks",
    "block_variances",
    "assemble_image",
]


@dataclass
class BlockSet:
    """Vectorized ``n x n`` blocks and where they came from.

    Attributes
    ----------
    block_size : int
        Side ``n`` of each square block.
    data : ndarray of shape (n_blocks, n * n)
        One row per block, pixels in row-major order.
    origins : ndarray of shape (n_blocks, 2)
        ``(row, col)`` of each block's top-left pixel.
    image_shape : tuple of int
        ``(height, width)`` of the source image.
    """

    block_size: int
    data: np.ndarray
    origins: np.ndarray
    image_shape: tuple

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.origins = np.asarray(self.origins, dtype=np.intp).reshape(-1, 2)
        n = self.block_size
        if self.data.ndim != 2 or self.data.shape[1] != n * n:
            raise ValueError(
                f"data must have shape (n_blocks, {n * n}), got {self.data.shape}"
            )
        if self.data.shape[0] != self.origins.shape[0]:
            raise ValueError("data rows and origins disagree in length")

    def __len__(self):
        return self.data.shape[0]

    def subset(self, index) -> "BlockSet":
        """Blocks selected by a boolean mask or integer index, order kept."""
        return BlockSet(
            self.block_size, self.data[index], self.origins[index], self.image_shape
        )

    def with_data(self, data) -> "BlockSet":
        return BlockSet(self.block_size, data, self.origins, self.image_shape)


def block_offsets(length: int, n: int, stride: int) -> np.ndarray:
    """Start offsets along one axis; the final offset ``length - n`` is always present."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if not 1 <= n <= length:
        raise ValueError(f"block size {n} does not fit in axis of length {length}")
    offsets = np.arange(0, length - n + 1, stride)
    if offsets[-1] != length - n:
        offsets = np.append(offsets, length - n)
    return offsets


def extract_blocks(img, n: int = 8, stride: int = 1) -> BlockSet:
    """Extract all ``n x n`` blocks on a ``stride`` grid, with boundary completion.

    Blocks are ordered row-major over their origins.  Every pixel is
    covered as long as ``stride <= n``.
    """
    img = as_image(img)
    height, width = img.shape
    if n > min(height, width):
        raise ValueError(f"block size {n} larger than image {height}x{width}")
    rows = block_offsets(height, n, stride)
    cols = block_offsets(width, n, stride)
    windows = np.lib.stride_tricks.sliding_window_view(img, (n, n))
    data = windows[np.ix_(rows, cols)].reshape(-1, n * n)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    origins = np.column_stack([rr.ravel(), cc.ravel()])
    return BlockSet(n, np.ascontiguousarray(data), origins, (height, width))


def block_variances(blocks: BlockSet) -> np.ndarray:
    """Population variance (denominator ``n^2``) of each block's pixels."""
    return blocks.data.var(axis=1)


def assemble_image(denoised: BlockSet, noisy, lambda_avg: float = 0.0) -> np.ndarray:
    """Blend overlapping blocks back into an image.

    Each output pixel is
    ``(lambda_avg * noisy + sum of covering block values) / (lambda_avg + coverage)``.
    Pixels covered by no block keep their noisy value.
    """
    noisy = as_image(noisy)
    if lambda_avg < 0:
        raise ValueError(f"lambda_avg must be >= 0, got {lambda_avg}")
    height, width = noisy.shape
    n = denoised.block_size
    origins = denoised.origins
    if len(origins) and (
        origins.min() < 0
        or origins[:, 0].max() + n > height
        or origins[:, 1].max() + n > width
    ):
        raise ValueError("block origin out of image bounds")

    di, dj = np.divmod(np.arange(n * n), n)
    flat = (origins[:, :1] + di) * width + (origins[:, 1:] + dj)
    # accumulate deviations from the noisy pixel so identity blocks round-trip exactly
    base = noisy.ravel()
    dev = np.bincount(
        flat.ravel(),
        weights=(denoised.data - base[flat]).ravel(),
        minlength=height * width,
    )
    counts = np.bincount(flat.ravel(), minlength=height * width)
    denom = counts + lambda_avg
    out = base.copy()
    covered = counts > 0
    out[covered] += dev[covered] / denom[covered]
    return out.reshape(height, width)
