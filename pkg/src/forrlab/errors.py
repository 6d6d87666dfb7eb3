"""Shared exception types."""


class CapacityError(ValueError):
    """An operation was asked to enumerate or allocate beyond its guard.

    Raised instead of attempting work that is exponentially large in the
    problem size (exhaustive restriction scans, dense state vectors).
    """
