"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ABNFlowError(Exception):
    """Base class for every error raised by abnflow."""


class ConfigError(ABNFlowError):
    """Invalid or incomplete pipeline configuration."""
