"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates a precondition (non-hermitian H, Q**2 != 1, bad norm, ...)."""


class UndefinedMappingError(ValueError):
    """A construction has no meaning for this input, e.g. <D^2> = 0 in pm_basis."""


class NotDecoherentError(ValueError):
    """Record projectors were requested for a history set that does not decohere."""


class ConfigError(ValueError):
    """Scenario configuration failed validation. ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
