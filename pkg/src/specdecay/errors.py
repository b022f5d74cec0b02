"""Exception types shared across the package."""


class SpecDecayError(Exception):
    """Base class for all package errors."""


class QuadratureDivergence(SpecDecayError):
    """Radial integral failed its convergence check (divergent or tail above tolerance)."""


class InfiniteEnergy(SpecDecayError):
    """Requested profile has non-integrable spectral energy density."""


class MassUnresolvable(SpecDecayError):
    """Low-frequency ball radius below what the grid can resolve."""


class WindowUnresolvable(SpecDecayError):
    """Dyadic window extends below the grid's resolvable frequencies."""


class HorizonExceeded(SpecDecayError):
    """Grid backend asked for times beyond its validity horizon."""


class CFLViolation(SpecDecayError):
    """Timestep exceeds the advective CFL bound."""


class BlowupDetected(SpecDecayError):
    """Solution norm grew beyond the blow-up tripwire (solver bug guard)."""


class WindowTooShort(SpecDecayError):
    """Fitting window does not span enough decades for a slope estimate."""


class ConfigInvalid(SpecDecayError):
    """Experiment config failed schema validation."""


class ExecutionError(SpecDecayError):
    """An analysis step failed; carries context about the failing step."""
