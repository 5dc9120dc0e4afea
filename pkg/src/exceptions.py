"""
Exceptions Module
Error types raised by the fovsafe library
"""


class FovSafeError(Exception):
    """Base class for all library errors"""


class DegenerateGeometry(FovSafeError, ValueError):
    """Leader center and follower front point (nearly) coincide"""


class IllConditioned(FovSafeError, ValueError):
    """QP cost matrix is not symmetric positive definite"""


class OutOfFovLabel(FovSafeError, ValueError):
    """The not-visible label has no bearing value"""


class AllClipped(FovSafeError, RuntimeError):
    """Sigma clipping removed every depth pixel"""


class ConfigError(FovSafeError, ValueError):
    """Scenario configuration is malformed or violates an invariant"""
