"""Exception types shared across the solver modules."""


class NumericsError(RuntimeError):
    """A computation produced non-finite or otherwise unusable values."""


class StiffnessError(NumericsError):
    """Explicit time stepping collapsed below the configured step floor."""
