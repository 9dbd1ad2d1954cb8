"""Shared exception types."""


class ForgeError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ForgeError):
    """Bad configuration or arguments; maps to CLI exit code 1."""
