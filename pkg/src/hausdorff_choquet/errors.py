"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """An input violates the domain of the operation it was passed to."""


class CapacityError(MemoryError):
    """A grid or dense materialisation exceeds the configured memory budget."""


class BracketInversionError(RuntimeError):
    """A certified lower bound exceeded a certified upper bound.

    This can only happen through a bug, so both certificates are attached
    for diagnosis instead of silently clamping.
    """

    def __init__(self, message, lower_certificate=None, upper_certificate=None):
        super().__init__(message)
        self.lower_certificate = lower_certificate
        self.upper_certificate = upper_certificate
