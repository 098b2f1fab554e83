"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain on which an operation is defined."""


class SingularityError(ArithmeticError):
    """A closed-form expression hit a vanishing denominator."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class ConfigError(ValueError):
    """A run configuration failed schema validation."""
