"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, NumericsError -> 2,
verify-mode invariant violations -> 3.
"""


class NvarlabError(Exception):
    """Base class for all package errors."""


class ConfigError(NvarlabError, ValueError):
    """Invalid parameters, configuration text, or file formats."""


class NumericsError(NvarlabError, RuntimeError):
    """A numerical routine failed (non-convergence, divergence, bad data)."""


class ResolutionError(NumericsError):
    """An operation would push all spectral content out of band."""
