"""Exception types shared across the package."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but has no meaningful answer (e.g. all-zero matrix)."""


class SingularBranchError(ValueError):
    """A branch impedance is zero, so the admittance of that branch is undefined."""


class SingularNetworkError(ValueError):
    """A network matrix is singular or too ill-conditioned to invert reliably."""


class OpenCircuitError(SingularNetworkError):
    """(I - Theta) is singular, so no finite impedance matrix realizes this reflection."""


class DegenerateChannelError(RuntimeError):
    """A fading draw produced a rank-deficient channel matrix; the trial must be redrawn."""


class ConfigError(ValueError):
    """An experiment configuration violates a documented invariant."""
