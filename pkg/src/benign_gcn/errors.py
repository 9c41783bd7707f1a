"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value violates one of its constraints."""


class ShapeError(ValueError):
    """Array arguments have incompatible shapes."""


class DegenerateBasisError(ArithmeticError):
    """The signal/noise basis is (numerically) rank deficient."""


class TrainingDiverged(RuntimeError):
    """Gradient descent produced a non-finite or exploding state."""

    def __init__(self, epoch: int, reason: str):
        super().__init__(f"training diverged at epoch {epoch}: {reason}")
        self.epoch = epoch
        self.reason = reason
