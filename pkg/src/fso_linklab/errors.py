"""Exception types raised across the package."""


class InvalidMatrixError(ValueError):
    """Matrix is not symmetric positive semi-definite within tolerance."""


class IntegrationError(RuntimeError):
    """Adaptive integration failed to converge."""


class ComplexityLimitError(ValueError):
    """A nested quadrature would exceed the configured term budget."""


class ScenarioError(ValueError):
    """Scenario configuration failed validation."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class TargetUnreachableError(ValueError):
    """A BER curve never crosses the requested target inside its grid."""

    def __init__(self, curve, target):
        super().__init__(f"curve {curve!r} does not reach target BER {target:g} within its SNR grid")
        self.curve = curve
        self.target = target
