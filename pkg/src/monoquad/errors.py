"""Exception types shared across the package.

The CLI maps these onto process exit codes: ParseError -> 2,
InvariantError -> 3, BudgetExceededError -> 4.
"""


class ParseError(ValueError):
    """Malformed or structurally invalid input (JSON, unknown kind, bad field type)."""


class InvariantError(ValueError):
    """Structurally valid input whose values violate a documented constraint."""


class BudgetExceededError(RuntimeError):
    """A resource cap (e.g. the brute-force candidate cap) would be exceeded."""
