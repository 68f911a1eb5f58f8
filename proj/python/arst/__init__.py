"""Banded-mask auto-regressive transformer for online surgical phase recognition."""

from ._arst import (
    ConfigError,
    DimensionError,
    FormatError,
    IoError,
    LengthMismatchError,
    Model,
    TrainingNumericError,
    default_config,
    eval_video,
    evaluate,
    generate,
    parameter_count,
    parse_config,
    read_features,
    read_labels,
    read_phase_sequence,
    render_ribbon_svg,
    run_cli,
    train,
    write_features,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "FormatError",
    "IoError",
    "LengthMismatchError",
    "Model",
    "TrainingNumericError",
    "default_config",
    "eval_video",
    "evaluate",
    "generate",
    "parameter_count",
    "parse_config",
    "read_features",
    "read_labels",
    "read_phase_sequence",
    "render_ribbon_svg",
    "run_cli",
    "train",
    "write_features",
]
