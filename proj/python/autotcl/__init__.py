"""AutoTCL: contrastive time series representation learning with a learned,
factorized and invertible augmentation network.

The heavy lifting lives in the C++ core; this package re-exports it.

>>> import autotcl
>>> manifest = autotcl.train({"epochs": 2, "data": {"path": "data/ETTh1.csv"}}, "runs/demo")
>>> run = autotcl.Run("runs/demo")
>>> print(run.evaluate(horizons=[24]))
"""

from ._core import (
    CheckpointError,
    ConfigError,
    DomainError,
    FormatError,
    InvariantError,
    IoError,
    NumericalError,
    Run,
    ValidationError,
    compose_view,
    concrete_sample,
    config_hash,
    expected_l0,
    global_contrast_loss,
    local_contrast_loss,
    normalize_config,
    pri_loss,
    prob_one,
    prob_zero,
    temporal_triplet_loss,
    train,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DomainError",
    "FormatError",
    "InvariantError",
    "IoError",
    "NumericalError",
    "Run",
    "ValidationError",
    "compose_view",
    "concrete_sample",
    "config_hash",
    "expected_l0",
    "global_contrast_loss",
    "local_contrast_loss",
    "normalize_config",
    "pri_loss",
    "prob_one",
    "prob_zero",
    "temporal_triplet_loss",
    "train",
]
