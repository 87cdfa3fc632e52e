"""Error types shared across the package.

The CLI maps ConfigError to exit code 2 and CapacityError to exit code 3;
everything else is an ordinary ValueError/RuntimeError.
"""


class CapacityError(Exception):
    """Problem size exceeds the dense-representation cap."""


class ConfigError(Exception):
    """Experiment configuration is malformed or inconsistent."""


class DegenerateSpectrumError(ValueError):
    """Constant cost function: rescaling is undefined (s + t = 0)."""


class ZeroBranchError(ValueError):
    """Conditioning on a measurement outcome of (near-)zero probability."""


class DegenerateCountsError(ValueError):
    """Aggregated measurement weights vanish on the entire state support."""
