"""Multi-view deep embedded clustering with a unified target distribution.

Per-view MLP autoencoders embed each view; a shared target distribution,
rebuilt every round from k-means on the concatenated scaled embeddings,
pulls all views toward one consistent clustering.  See the README for the
training loop and the CLI.
"""

from .backend import get_backend, set_backend
from .clustering import (
    ClusteringLayer,
    grad_centroids,
    grad_embeddings,
    hard_predict,
    kl_clustering_loss,
    soft_assign,
)
from .dataio import (
    MultiViewDataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    preset_spec,
    save_dataset,
)
from .metrics import acc, ari, nmi
from .nn import AutoencoderModel, build_autoencoder, decode, encode
from .target import kmeans, pseudo_assign, scale_and_concat, sharpen
from .trainer import (
    TrainingConfig,
    TrainingError,
    TrainingResult,
    consensus_predict,
    run_training,
    train_baseline,
    train_sdmvc,
)

__version__ = "0.1.0"

__all__ = [
    "AutoencoderModel",
    "ClusteringLayer",
    "MultiViewDataset",
    "SyntheticSpec",
    "TrainingConfig",
    "TrainingError",
    "TrainingResult",
    "acc",
    "ari",
    "build_autoencoder",
    "consensus_predict",
    "decode",
    "encode",
    "generate_synthetic",
    "get_backend",
    "grad_centroids",
    "grad_embeddings",
    "hard_predict",
    "kl_clustering_loss",
    "kmeans",
    "load_dataset",
    "nmi",
    "preset_spec",
    "pseudo_assign",
    "run_training",
    "save_dataset",
    "scale_and_concat",
    "set_backend",
    "sharpen",
    "soft_assign",
    "train_baseline",
    "train_sdmvc",
    "__version__",
]
