# SPDX-License-Identifier: Apache-2.0
"""Knowledge graph embedding with attention-based propagation and attribute encoders."""

from ._core import (
    ConfigError,
    ContractError,
    Dataset,
    EpochRecord,
    IoError,
    KaneError,
    Model,
    NumericError,
    ParseError,
    ShapeError,
    default_settings,
    run_cli,
    train,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "Dataset",
    "EpochRecord",
    "IoError",
    "KaneError",
    "Model",
    "NumericError",
    "ParseError",
    "ShapeError",
    "default_settings",
    "run_cli",
    "train",
]
__version__ = "0.1.0"
