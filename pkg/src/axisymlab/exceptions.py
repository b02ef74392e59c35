"""Exception types shared across the package.

CLI exit-code mapping: ConfigError -> 1 (validation), the numerical
failures -> 2.
"""


class ConfigError(ValueError):
    """Invalid configuration, schema violation, or inadmissible parameters."""


class NumericalBlowupError(RuntimeError):
    """A field stopped being finite.  Carries the step index when known."""

    def __init__(self, message, step_index=None, records=None):
        super().__init__(message)
        self.step_index = step_index
        self.records = records


class EllipticConvergenceError(RuntimeError):
    """Iterative elliptic solve failed to reach tolerance.

    The attached report holds the iteration count and final residual.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
