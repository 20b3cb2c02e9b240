"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConditionError(ValueError):
    """Barrier parameters violate a structural validity condition."""
