"""End-to-end denoising: equalize, cluster onto lines, build dictionary, code, average."""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .bounds import clustering_cost
from .clustering import ClusterModel, cluster_spectrum, klines
from .coder import DEFAULT_EPSILON_GAIN, CoderConfig, denoise_blocks
from .dictionary import Dictionary, build_dictionary
from .equalization import (
    DEFAULT_BINS,
    DEFAULT_RETENTION,
    EqualizationPolicy,
    select_training_blocks,
    select_uniform_blocks,
)
from .image_io import as_image, psnr
from .patching import BlockSet, assemble_image, block_variances, extract_blocks

__all__ = [
    "EQUALIZED",
    "UNIFORM",
    "ALL",
    "PipelineConfig",
    "DenoiseReport",
    "TrainingResult",
    "train_dictionary",
    "apply_dictionary",
    "denoise_image",
    "compare_selection",
    "ClusterDenoiser",
]

logger = logging.getLogger(__name__)

EQUALIZED = "equalized"
UNIFORM = "uniform"
ALL = "all"


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the denoising pipeline.

    ``max_atoms=None`` means ``block_size**2 // 2``, ``lambda_avg=None``
    means ``30 / sigma`` and ``threshold=None`` solves the equalization
    threshold for ``target_retention``.  ``uniform_count`` only matters for
    ``selection="uniform"``; when unset the uniform subset has the size the
    equalized selection would have produced.
    """

    sigma: float
    block_size: int = 8
    denoise_stride: int = 1
    train_stride: int = 4
    n_clusters: int = 64
    threshold: float | None = None
    target_retention: float = DEFAULT_RETENTION
    bins: int = DEFAULT_BINS
    epsilon_gain: float = DEFAULT_EPSILON_GAIN
    max_atoms: int | None = None
    lambda_avg: float | None = None
    rank_gain: float = 1.0
    include_dc: bool = True
    center_blocks: bool = True
    max_iters: int = 50
    selection: str = EQUALIZED
    uniform_count: int | None = None
    equalization_seed: int = 0
    cluster_seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.n_clusters < 1:
            raise ValueError(f"n_clusters must be >= 1, got {self.n_clusters}")
        if self.denoise_stride < 1 or self.train_stride < 1:
            raise ValueError("strides must be >= 1")
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if self.selection not in (EQUALIZED, UNIFORM, ALL):
            raise ValueError(f"unknown selection {self.selection!r}")
        if self.lambda_avg is not None and self.lambda_avg < 0:
            raise ValueError("lambda_avg must be >= 0")
        # validates threshold and bins
        self.policy

    @property
    def policy(self) -> EqualizationPolicy:
        return EqualizationPolicy(
            self.threshold, self.bins, self.equalization_seed, self.target_retention
        )

    @property
    def coder(self) -> CoderConfig:
        return CoderConfig.from_noise(
            self.sigma, self.block_size, self.epsilon_gain, self.max_atoms
        )

    @property
    def effective_lambda_avg(self) -> float:
        return 30.0 / self.sigma if self.lambda_avg is None else float(self.lambda_avg)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict, **overrides) -> "PipelineConfig":
        """Build a config from a JSON-like mapping; missing fields take defaults."""
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        merged = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
        if "sigma" not in merged:
            raise ValueError("config must define sigma")
        return cls(**merged)

    @classmethod
    def from_json(cls, text: str, **overrides) -> "PipelineConfig":
        return cls.from_dict(json.loads(text), **overrides)


@dataclass
class DenoiseReport:
    config: dict
    retained_fraction: float
    n_training_blocks: int
    J_omega: float
    J_omega_non_smooth: float
    atom_count: int
    psnr_noisy: float | None = None
    psnr_denoised: float | None = None
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class TrainingResult:
    dictionary: Dictionary
    model: ClusterModel
    training_blocks: np.ndarray
    retained_fraction: float
    J_omega: float
    J_omega_non_smooth: float
    timings: dict


def _training_set(noisy, cfg: PipelineConfig) -> tuple[BlockSet, int]:
    blocks = extract_blocks(noisy, cfg.block_size, cfg.train_stride)
    if cfg.selection == ALL:
        return blocks, len(blocks)
    variances = block_variances(blocks)
    selected = select_training_blocks(blocks, variances, cfg.policy)
    if cfg.selection == UNIFORM:
        count = len(selected) if cfg.uniform_count is None else cfg.uniform_count
        selected = select_uniform_blocks(blocks, count, cfg.equalization_seed)
    return selected, len(blocks)


def _centre(data):
    return data - data.mean(axis=1, keepdims=True)


def train_dictionary(noisy, cfg: PipelineConfig) -> TrainingResult:
    """Select training blocks, cluster them onto lines and build the dictionary.

    With ``include_dc`` and ``center_blocks`` the blocks are mean-removed
    before clustering so the lines describe block structure and the
    constant atom carries the mean.
    """
    noisy = as_image(noisy)
    if min(noisy.shape) < cfg.block_size:
        raise ValueError(
            f"image {noisy.shape} smaller than block size {cfg.block_size}"
        )
    timings = {}
    t0 = time.perf_counter()
    selected, total = _training_set(noisy, cfg)
    timings["select"] = time.perf_counter() - t0
    if len(selected) == 0:
        raise ValueError("training selection kept no blocks")
    data = _centre(selected.data) if cfg.include_dc and cfg.center_blocks else selected.data
    n_clusters = min(cfg.n_clusters, data.shape[0])
    if n_clusters < cfg.n_clusters:
        logger.warning("only %d training blocks; using %d clusters", data.shape[0], n_clusters)

    t0 = time.perf_counter()
    model = klines(data, n_clusters, cfg.max_iters, cfg.cluster_seed)
    timings["cluster"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    dictionary = build_dictionary(data, model, cfg.sigma, cfg.include_dc, cfg.rank_gain)
    cost = clustering_cost(cluster_spectrum(data, model, cfg.sigma), cfg.sigma)
    timings["dictionary"] = time.perf_counter() - t0
    logger.info(
        "trained on %d/%d blocks: %d atoms, J=%.4g",
        len(selected), total, dictionary.n_atoms, cost.total,
    )
    return TrainingResult(
        dictionary,
        model,
        data,
        len(selected) / total,
        cost.total,
        cost.non_smooth,
        timings,
    )


def apply_dictionary(noisy, dictionary: Dictionary, cfg: PipelineConfig) -> np.ndarray:
    """Code every block of ``noisy`` over ``dictionary`` and average the projections."""
    noisy = as_image(noisy)
    if dictionary.block_size != cfg.block_size:
        raise ValueError(
            f"dictionary block size {dictionary.block_size} != config {cfg.block_size}"
        )
    blocks = extract_blocks(noisy, cfg.block_size, cfg.denoise_stride)
    estimates = denoise_blocks(blocks.data, dictionary, cfg.coder)
    return assemble_image(blocks.with_data(estimates), noisy, cfg.effective_lambda_avg)


def denoise_image(noisy, cfg: PipelineConfig, clean=None, dictionary: Dictionary | None = None):
    """Denoise ``noisy``; returns ``(image, DenoiseReport)``.

    A pre-trained ``dictionary`` skips training; the report's training
    fields are then NaN/zero.  PSNR fields are filled only when ``clean``
    is given.
    """
    noisy = as_image(noisy)
    if clean is not None:
        clean = as_image(clean)
        if clean.shape != noisy.shape:
            raise ValueError(f"clean {clean.shape} and noisy {noisy.shape} differ")
    if dictionary is None:
        trained = train_dictionary(noisy, cfg)
        dictionary = trained.dictionary
        timings = dict(trained.timings)
        retained, n_train = trained.retained_fraction, trained.training_blocks.shape[0]
        j_total, j_non_smooth = trained.J_omega, trained.J_omega_non_smooth
    else:
        timings = {}
        retained, n_train = float("nan"), 0
        j_total = j_non_smooth = float("nan")

    t0 = time.perf_counter()
    out = apply_dictionary(noisy, dictionary, cfg)
    timings["denoise"] = time.perf_counter() - t0

    report = DenoiseReport(
        config=cfg.to_dict(),
        retained_fraction=retained,
        n_training_blocks=n_train,
        J_omega=j_total,
        J_omega_non_smooth=j_non_smooth,
        atom_count=dictionary.n_atoms,
        timings=timings,
    )
    if clean is not None:
        report.psnr_noisy = psnr(noisy, clean)
        report.psnr_denoised = psnr(out, clean)
    return out, report


def compare_selection(noisy, cfg: PipelineConfig, clean):
    """Run the pipeline with equalized and with uniform training selection.

    Both runs share every seed and use the same number of training blocks.
    Returns ``(equalized_report, uniform_report)``.
    """
    _, equalized = denoise_image(noisy, cfg.replace(selection=EQUALIZED), clean)
    uniform_cfg = cfg.replace(selection=UNIFORM, uniform_count=equalized.n_training_blocks)
    _, uniform = denoise_image(noisy, uniform_cfg, clean)
    return equalized, uniform


class ClusterDenoiser(TransformerMixin, BaseEstimator):
    """Estimator wrapper around the pipeline.

    ``fit`` learns the dictionary from a noisy image and ``transform``
    denoises an image of any size with it.  Constructor parameters mirror
    :class:`PipelineConfig`.

    Attributes
    ----------
    dictionary_ : Dictionary
    cluster_model_ : ClusterModel
    retained_fraction_ : float
    J_omega_ : float
    """

    def __init__(
        self,
        sigma=20.0,
        block_size=8,
        denoise_stride=1,
        train_stride=4,
        n_clusters=64,
        threshold=None,
        target_retention=DEFAULT_RETENTION,
        bins=DEFAULT_BINS,
        epsilon_gain=DEFAULT_EPSILON_GAIN,
        max_atoms=None,
        lambda_avg=None,
        rank_gain=1.0,
        include_dc=True,
        center_blocks=True,
        max_iters=50,
        selection=EQUALIZED,
        equalization_seed=0,
        cluster_seed=0,
    ):
        self.sigma = sigma
        self.block_size = block_size
        self.denoise_stride = denoise_stride
        self.train_stride = train_stride
        self.n_clusters = n_clusters
        self.threshold = threshold
        self.target_retention = target_retention
        self.bins = bins
        self.epsilon_gain = epsilon_gain
        self.max_atoms = max_atoms
        self.lambda_avg = lambda_avg
        self.rank_gain = rank_gain
        self.include_dc = include_dc
        self.center_blocks = center_blocks
        self.max_iters = max_iters
        self.selection = selection
        self.equalization_seed = equalization_seed
        self.cluster_seed = cluster_seed

    def _config(self) -> PipelineConfig:
        return PipelineConfig(**self.get_params())

    def fit(self, X, y=None):
        trained = train_dictionary(X, self._config())
        self.dictionary_ = trained.dictionary
        self.cluster_model_ = trained.model
        self.retained_fraction_ = trained.retained_fraction
        self.J_omega_ = trained.J_omega
        return self

    def transform(self, X):
        check_is_fitted(self, "dictionary_")
        return apply_dictionary(X, self.dictionary_, self._config())

    def score(self, X, y):
        """PSNR of ``transform(X)`` against the clean image ``y``."""
        return psnr(self.transform(X), y)
