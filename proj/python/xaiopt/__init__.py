"""Selects and tunes attribution methods for text-pair similarity models."""

from ._core import (
    CapabilityError,
    ConfigError,
    Error,
    InputError,
    StudyError,
    TransportError,
    attribute,
    auprc,
    average_precision,
    config_summary,
    methods,
    run_cli,
    similarity,
    token_f1,
    token_iou,
    tokenize,
    weighted_overall,
)

__all__ = [
    "CapabilityError",
    "ConfigError",
    "Error",
    "InputError",
    "StudyError",
    "TransportError",
    "attribute",
    "auprc",
    "average_precision",
    "config_summary",
    "methods",
    "run_cli",
    "similarity",
    "token_f1",
    "token_iou",
    "tokenize",
    "weighted_overall",
]
