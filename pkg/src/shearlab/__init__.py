"""shearlab: spectral experiments for perturbations of nearly-Couette shear.

Modules
-------
spectral     grids, transforms, moving-frame operators, norms
kelvin       closed-form single-mode solutions and decay-rate fits
multiplier   ghost-weight energy multiplier and its admissibility checks
shear        background shear profiles, coordinate map, heat-norm budget
solver       integrating-factor Runge-Kutta time stepper with energy trace
diagnostics  budget closure, bootstrap classification, rate fits
checkpoint   bit-exact binary state snapshots
config       INI schema with provenance echo
runner       single-run orchestration and artifacts
sweep        stability sweeps with boundary bisection
plots        headless figures
cli          command line front end
"""

from .errors import (
    BlowupError,
    ConfigError,
    EllipticError,
    GridError,
    InversionError,
    ResolutionError,
    ShearlabError,
)
from .spectral import FrequencyGrid, SpectralField

__version__ = "0.1.0"

__all__ = [
    "BlowupError",
    "ConfigError",
    "EllipticError",
    "FrequencyGrid",
    "GridError",
    "InversionError",
    "ResolutionError",
    "ShearlabError",
    "SpectralField",
    "__version__",
]
