"""Exception types shared across the package."""


class ShearlabError(Exception):
    """Base class for all package-specific failures."""


class GridError(ShearlabError):
    """Inconsistent grid parameters or mismatched field shapes."""


class ResolutionError(ShearlabError):
    """Critical-layer support is about to leave the resolved frequency band."""


class EllipticError(ShearlabError):
    """The variable-coefficient Poisson iteration failed to contract."""


class InversionError(ShearlabError):
    """The coordinate-map fixed point did not contract (shear too large)."""


class BlowupError(ShearlabError):
    """NaN or Inf detected in the state during time stepping."""


class ConfigError(ShearlabError):
    """Malformed or out-of-range configuration input."""
