"""Error taxonomy for the figure renderer."""

from __future__ import annotations


class PlotsError(Exception):
    """Base class for every error raised by this package."""


class MissingArtifact(PlotsError):
    """A required file under the experiment directory is absent or empty."""


class SchemaMismatch(PlotsError):
    """An artifact exists but does not have the expected shape or keys."""
