"""Grayscale image I/O, seeded AWGN synthesis and PSNR.

Images are plain 2-D ``float64`` arrays of shape ``(height, width)``.
Samples are nominally in ``[0, 255]`` but are never clamped internally;
clamping only happens when an image is encoded with :func:`write_pgm`.

Noise is drawn from ``numpy.random.default_rng(seed)`` (PCG64 bit
generator, ziggurat Gaussian transform), so a given ``(image, sigma, seed)``
always yields the same noisy image with the same NumPy release.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PgmError",
    "PgmHeaderError",
    "PgmTruncatedError",
    "PgmMaxvalError",
    "UnsupportedFormatError",
    "NoiseSpec",
    "as_image",
    "read_pgm",
    "write_pgm",
    "load_pgm",
    "save_pgm",
    "add_awgn",
    "psnr",
]

_WHITESPACE = b" \t\n\r\v\f"


class PgmError(ValueError):
    """Base class for PGM decoding failures."""


class PgmHeaderError(PgmError):
    """Header is missing fields or contains non-numeric tokens."""


class PgmTruncatedError(PgmError):
    """Raster holds fewer samples than the header announces."""


class PgmMaxvalError(PgmError):
    """maxval outside 1..255 (16-bit PGM is not supported)."""


class UnsupportedFormatError(PgmError):
    """Magic number is not P2 or P5 (e.g. P6 colour)."""


@dataclass(frozen=True)
class NoiseSpec:
    """Standard deviation and generator seed of additive white Gaussian noise."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def as_image(img) -> np.ndarray:
    """Validate ``img`` as a non-empty 2-D image and return it as float64."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    return arr


def _header_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the last token.
    """
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos] in _WHITESPACE:
            pos += 1
        if pos >= n:
            raise PgmHeaderError(
                f"header ended after {len(tokens)} of {count} fields"
            )
        if data[pos] == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < n and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(data: bytes) -> np.ndarray:
    """Decode a binary (P5) or ASCII (P2) 8-bit PGM into a float64 image.

    Raises
    ------
    UnsupportedFormatError
        For any magic number other than ``P2``/``P5``.
    PgmHeaderError
        For missing or non-integer header fields.
    PgmMaxvalError
        When maxval is not in ``1..255``.
    PgmTruncatedError
        When the raster is shorter than ``width * height`` samples.
    """
    data = bytes(data)
    if len(data) < 2:
        raise PgmHeaderError("file too short to hold a magic number")
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise UnsupportedFormatError(
            f"unsupported magic {magic!r}; only P2/P5 grayscale PGM is read"
        )
    tokens, pos = _header_tokens(data[2:], 3)
    pos += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise PgmHeaderError(f"non-integer header field in {tokens!r}") from None
    if width < 1 or height < 1:
        raise PgmHeaderError(f"invalid dimensions {width}x{height}")
    if not 1 <= maxval <= 255:
        raise PgmMaxvalError(f"maxval {maxval} not in 1..255")
    size = width * height

    if magic == b"P5":
        # exactly one whitespace byte separates header from raster
        if pos >= len(data) or data[pos] not in _WHITESPACE:
            raise PgmTruncatedError("missing raster after header")
        raster = data[pos + 1 : pos + 1 + size]
        if len(raster) < size:
            raise PgmTruncatedError(
                f"raster has {len(raster)} bytes, expected {size}"
            )
        values = np.frombuffer(raster, dtype=np.uint8)
    else:
        body = data[pos:]
        fields = [
            line.split(b"#", 1)[0] for line in body.splitlines()
        ]
        words = b" ".join(fields).split()
        if len(words) < size:
            raise PgmTruncatedError(
                f"raster has {len(words)} samples, expected {size}"
            )
        try:
            values = np.array([int(w) for w in words[:size]], dtype=np.int64)
        except ValueError:
            raise PgmHeaderError("non-integer sample in ASCII raster") from None
        if values.min() < 0:
            raise PgmHeaderError("negative sample in ASCII raster")
    if values.max() > maxval:
        raise PgmHeaderError(f"sample exceeds maxval {maxval}")
    return values.astype(np.float64).reshape(height, width)


def write_pgm(img) -> bytes:
    """Encode an image as binary P5 with maxval 255.

    Samples are rounded to the nearest integer (half to even) and clamped
    to ``[0, 255]``.
    """
    arr = as_image(img)
    height, width = arr.shape
    raster = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    return b"P5\n%d %d\n255\n" % (width, height) + raster.tobytes()


def load_pgm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_pgm(fh.read())


def save_pgm(path: str | os.PathLike, img) -> None:
    with open(path, "wb") as fh:
        fh.write(write_pgm(img))


def add_awgn(img, spec: NoiseSpec) -> np.ndarray:
    """Return ``img`` plus i.i.d. N(0, sigma^2) noise; the result is not clamped."""
    arr = as_image(img)
    if spec.sigma == 0:
        return arr.copy()
    rng = np.random.default_rng(spec.seed)
    return arr + spec.sigma * rng.standard_normal(arr.shape)


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio ``10 log10(255^2 / MSE)`` in dB.

    Returns ``math.inf`` when the images are identical.
    """
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)
