"""Clustering-based image denoising with a global, noise-truncated PCA dictionary."""

from .bounds import ClusteringCost, cluster_mse_bound, clustering_cost
from .clustering import (
    ClusterModel,
    ClusterSpectrum,
    KLinesClustering,
    KMeansClustering,
    cluster_spectrum,
    klines,
    kmeans,
)
from .coder import CoderConfig, SparseCode, denoise_block, denoise_blocks, sparse_code
from .dictionary import Dictionary, build_dictionary, select_rank
from .equalization import (
    EqualizationPolicy,
    VarianceHistogram,
    keep_probability,
    select_training_blocks,
    variance_histogram,
)
from .image_io import NoiseSpec, add_awgn, load_pgm, psnr, read_pgm, save_pgm, write_pgm
from .patching import BlockSet, assemble_image, block_variances, extract_blocks
from .pipeline import (
    ClusterDenoiser,
    DenoiseReport,
    PipelineConfig,
    compare_selection,
    denoise_image,
    train_dictionary,
)

__version__ = "0.1.0"
