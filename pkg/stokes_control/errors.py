"""Exceptions raised by the stokes_control library."""


class StokesControlError(Exception):
    """Base class for all library errors."""


class MeshError(StokesControlError, ValueError):
    """Invalid mesh input or a mesh query that cannot be answered."""


class QuadratureError(StokesControlError, ValueError):
    """Unsupported quadrature request."""


class SpaceError(StokesControlError, ValueError):
    """Finite element space cannot be built on the given mesh."""


class ReconstructionError(StokesControlError, ValueError):
    """Reconstruction operator requested for incompatible spaces."""


class AssemblyError(StokesControlError, ValueError):
    """Bilinear form or load requested with inconsistent arguments."""


class ConfigError(StokesControlError, ValueError):
    """Malformed run or scheme configuration."""


class SolverError(StokesControlError, RuntimeError):
    """Linear solve failed (singular factorization or bad residual)."""


class ReferenceCacheError(StokesControlError, RuntimeError):
    """Reference solution missing from the cache or unreadable."""
