"""Experiment harness: config parsing, orchestration, CLI."""

from .config import (
    ExperimentConfig,
    GainConfig,
    IntegrationConfig,
    ModelConfig,
    ParseError,
    ProbeConfig,
    ValidationError,
    load_config,
    parse_config,
    serialize_config,
)
from .runner import (
    MissingArtifact,
    RunSummary,
    analyze_dir,
    checkpoint_indices,
    run_experiment,
)

__all__ = [
    "ExperimentConfig",
    "GainConfig",
    "IntegrationConfig",
    "MissingArtifact",
    "ModelConfig",
    "ParseError",
    "ProbeConfig",
    "RunSummary",
    "ValidationError",
    "analyze_dir",
    "checkpoint_indices",
    "load_config",
    "parse_config",
    "run_experiment",
    "serialize_config",
]
