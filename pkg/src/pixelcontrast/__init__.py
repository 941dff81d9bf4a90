"""Class-guided pixel contrast for domain-adaptive segmentation, desk scale.

Streaming per-class feature statistics, three contrastive objectives
(prototype, centroid bank, closed-form distribution bound), a one-stage
self-training loop with an EMA teacher on a synthetic two-domain benchmark,
and the verification oracles that certify the math.
"""

from .backend import BACKEND, HAVE_COMPILED
from .bank import CentroidBank
from .config import ExperimentConfig, TrainConfig, load_config
from .contrast import (
    LossValue,
    QuerySet,
    aggregate_cl,
    bank_loss,
    dist_loss,
    mc_infinite_loss,
    proto_loss,
    reg_loss,
)
from .metrics import PddReport, confusion, export_embeddings, miou, pdd, pixel_accuracy
from .stats import IGNORE_LABEL, ClassStats, downsample_labels, local_centroids, local_moments
from .toymodel import (
    DomainSpec,
    ModelParams,
    SyntheticScene,
    TrainResult,
    backward,
    forward,
    generate_scene,
    run_training,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "HAVE_COMPILED",
    "CentroidBank",
    "ClassStats",
    "DomainSpec",
    "ExperimentConfig",
    "IGNORE_LABEL",
    "LossValue",
    "ModelParams",
    "PddReport",
    "QuerySet",
    "SyntheticScene",
    "TrainConfig",
    "TrainResult",
    "aggregate_cl",
    "backward",
    "bank_loss",
    "confusion",
    "dist_loss",
    "downsample_labels",
    "export_embeddings",
    "forward",
    "generate_scene",
    "load_config",
    "local_centroids",
    "local_moments",
    "mc_infinite_loss",
    "miou",
    "pdd",
    "pixel_accuracy",
    "proto_loss",
    "reg_loss",
    "run_training",
    "train",
]
