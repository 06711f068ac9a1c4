"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """A precondition on an argument was violated."""


class ResourceBudgetError(RuntimeError):
    """A quadrature grid would exceed the configured node budget."""

    def __init__(self, needed: int, budget: int):
        self.needed = needed
        self.budget = budget
        super().__init__(
            f"quadrature grid needs ~{needed} nodes, exceeding node_budget={budget}"
        )


class BoundaryMinimumError(RuntimeError):
    """The derivative minimum sits on the first or last grid point.

    ``side`` is ``"lower"`` or ``"upper"``; ``result`` carries the (unreliable)
    selection so callers can still report it.  ``n`` is attached by the
    experiment layer when the failure happens inside a multi-N run.
    """

    def __init__(self, side: str, result=None, n: int | None = None):
        self.side = side
        self.result = result
        self.n = n
        where = f" at N={n}" if n is not None else ""
        super().__init__(
            f"derivative minimum on the {side} grid boundary{where}; widen the grid"
        )


class DataFormatError(InvalidArgumentError):
    """An input file does not follow the expected layout."""
