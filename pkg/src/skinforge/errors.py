"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, GeometryError -> 3,
ChainDesignError -> 4. Anything else is an internal failure.
"""


class SkinforgeError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SkinforgeError):
    """Bad configuration, missing inputs, or mismatched checksums."""


class GeometryError(SkinforgeError):
    """Mesh, cutout, sampling, or shell construction failure."""


class ChainDesignError(SkinforgeError):
    """Sensing-chain ordering, resistance, or trace-routing failure."""
