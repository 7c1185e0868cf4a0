"""Readers for the experiment directory layout.

Everything a figure shows is taken from these files; no statistic is
recomputed from model code. The layout is fixed by the producing package:

    <dir>/config.echo        sectioned key = value text
    <dir>/run_<k>.csv        t, raw_1..raw_d, pr_1..pr_d [, fb_1..fb_d]
    <dir>/run_<k>_<name>.csv the same schema for a comparator estimator
    <dir>/aggregate.csv      run_id, estimator, rho, T, error, scaled_error
    <dir>/summary.json       config, channels, ybar, covariance_trace, runs
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MissingArtifact, SchemaMismatch

AGGREGATE_HEADER = ("run_id", "estimator", "rho", "T", "error", "scaled_error")
SUMMARY_KEYS = ("config", "channels", "covariance_trace", "runs", "ybar")

_RUN_FILE = re.compile(r"run_(\d+)\.csv$")


@dataclass(frozen=True)
class ConfigEcho:
    """Parsed config.echo: section -> key -> raw string value."""

    sections: dict[str, dict[str, str]]

    def get(self, section: str, key: str) -> str | None:
        return self.sections.get(section, {}).get(key)

    def require(self, section: str, key: str) -> str:
        value = self.get(section, key)
        if value is None:
            raise SchemaMismatch(
                f"config.echo lacks '{key}' in section [{section}]"
            )
        return value

    def require_float(self, section: str, key: str) -> float:
        raw = self.require(section, key)
        try:
            return float(raw)
        except ValueError as exc:
            raise SchemaMismatch(
                f"config.echo [{section}] {key} = {raw!r} is not a number"
            ) from exc


@dataclass(frozen=True)
class RunSeries:
    """One stored trajectory: times plus named channel blocks."""

    times: np.ndarray
    channels: dict[str, np.ndarray]


@dataclass(frozen=True)
class Aggregate:
    """aggregate.csv as parallel columns."""

    run_id: np.ndarray
    estimator: list[str]
    rho: np.ndarray
    T: np.ndarray
    error: np.ndarray
    scaled_error: np.ndarray

    def estimators(self) -> list[str]:
        """Estimator names, 'pr' first, the rest in sorted order."""
        names = sorted(set(self.estimator))
        if "pr" in names:
            names.remove("pr")
            names.insert(0, "pr")
        return names

    def scaled_for(self, name: str) -> np.ndarray:
        mask = np.array([e == name for e in self.estimator])
        return self.scaled_error[mask]


def _require_file(directory: Path, name: str) -> Path:
    path = Path(directory) / name
    if not path.is_file():
        raise MissingArtifact(f"{path} not found")
    return path


def load_config_echo(directory: Path) -> ConfigEcho:
    path = _require_file(directory, "config.echo")
    sections: dict[str, dict[str, str]] = {}
    current: dict[str, str] | None = None
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if text.startswith("[") and text.endswith("]"):
            current = sections.setdefault(text[1:-1].strip(), {})
            continue
        if "=" not in text or current is None:
            raise SchemaMismatch(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = text.partition("=")
        current[key.strip()] = value.strip()
    if not sections:
        raise MissingArtifact(f"{path} has no sections")
    return ConfigEcho(sections)


def list_run_ids(directory: Path) -> list[int]:
    """Run ids with a primary trajectory file, ascending."""
    ids = []
    for path in Path(directory).iterdir():
        m = _RUN_FILE.fullmatch(path.name)
        if m:
            ids.append(int(m.group(1)))
    return sorted(ids)


def load_run_series(
    directory: Path, run_id: int = 0, comparator: str | None = None
) -> RunSeries:
    name = (f"run_{run_id}.csv" if comparator is None
            else f"run_{run_id}_{comparator}.csv")
    path = _require_file(directory, name)
    with open(path, "r", newline="") as fh:
        header = fh.readline().strip().split(",")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise SchemaMismatch(f"{path}: non-numeric data rows") from exc
    if header[:1] != ["t"]:
        raise SchemaMismatch(f"{path}: first column must be 't', got {header[:1]}")
    if data.size == 0:
        raise MissingArtifact(f"{path} has no data rows")
    if data.shape[1] != len(header):
        raise SchemaMismatch(
            f"{path}: {len(header)} header columns, {data.shape[1]} data columns"
        )

    channels: dict[str, list[int]] = {}
    order: list[str] = []
    for col, label in enumerate(header[1:], start=1):
        base, _, index = label.rpartition("_")
        if not base or not index.isdigit():
            raise SchemaMismatch(f"{path}: malformed column label {label!r}")
        if base not in channels:
            channels[base] = []
            order.append(base)
        if int(index) != len(channels[base]) + 1:
            raise SchemaMismatch(
                f"{path}: column {label!r} out of order within its block"
            )
        channels[base].append(col)

    widths = {len(cols) for cols in channels.values()}
    if len(widths) != 1:
        raise SchemaMismatch(f"{path}: channel blocks have unequal widths")
    return RunSeries(
        times=data[:, 0],
        channels={name: data[:, cols] for name, cols in channels.items()},
    )


def load_aggregate(directory: Path) -> Aggregate:
    path = _require_file(directory, "aggregate.csv")
    lines = path.read_text().splitlines()
    if not lines:
        raise MissingArtifact(f"{path} is empty")
    header = tuple(lines[0].strip().split(","))
    if header != AGGREGATE_HEADER:
        raise SchemaMismatch(
            f"{path}: header {header} != {AGGREGATE_HEADER}"
        )
    rows = [line.split(",") for line in lines[1:] if line.strip()]
    if not rows:
        raise MissingArtifact(f"{path} has no data rows")
    if any(len(row) != len(AGGREGATE_HEADER) for row in rows):
        raise SchemaMismatch(f"{path}: ragged rows")
    try:
        return Aggregate(
            run_id=np.array([int(r[0]) for r in rows]),
            estimator=[r[1] for r in rows],
            rho=np.array([float(r[2]) for r in rows]),
            T=np.array([float(r[3]) for r in rows]),
            error=np.array([float(r[4]) for r in rows]),
            scaled_error=np.array([float(r[5]) for r in rows]),
        )
    except ValueError as exc:
        raise SchemaMismatch(f"{path}: non-numeric field: {exc}") from exc


def load_summary(directory: Path) -> dict:
    path = _require_file(directory, "summary.json")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaMismatch(f"{path}: expected a JSON object")
    missing = [key for key in SUMMARY_KEYS if key not in doc]
    if missing:
        raise SchemaMismatch(f"{path}: missing keys {missing}")
    return doc
