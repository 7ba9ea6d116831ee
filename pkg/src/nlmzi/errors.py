"""Exception types shared across the package."""


class SpaceMismatchError(ValueError):
    """Operands live on different Hilbert spaces (fingerprint mismatch)."""


class HermiticityError(ValueError):
    """An operator tagged Hermitian failed a Hermiticity check."""


class TailBoundError(ValueError):
    """A truncated coherent state drops more probability than allowed."""


class ToleranceError(RuntimeError):
    """The propagator could not meet its local error bound."""


class MemoryBudgetError(RuntimeError):
    """Estimated working-set size exceeds the configured budget."""


class ConfigError(ValueError):
    """A scenario config file is malformed or inconsistent."""
