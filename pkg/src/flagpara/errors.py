"""Exception types shared across the package."""


class FlagparaError(Exception):
    """Base class for all package errors."""


class InputError(FlagparaError, ValueError):
    """Rejected input: malformed spec, bad exponent, mismatched grid, ..."""


class AliasingError(InputError):
    """A direct frequency sum would wrap around the grid's Nyquist band."""

    def __init__(self, modes):
        self.modes = tuple(int(j) for j in modes)
        super().__init__(
            f"mode tuple {self.modes} sums to {sum(self.modes)}, outside the "
            "alias-free band"
        )


class ConsistencyError(FlagparaError, RuntimeError):
    """Two computations that must agree did not (indexing or quadrature bug)."""
