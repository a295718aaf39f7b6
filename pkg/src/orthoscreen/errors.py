"""Shared error hierarchy.

Every domain error raised by this package derives from :class:`DomainError`
so callers (notably the CLI) can distinguish expected failures from bugs.
Modules define their specific subclasses next to the code that raises them.
"""


class DomainError(Exception):
    """Base class for all expected, user-facing failures."""
