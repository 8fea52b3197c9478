"""Exception types shared across the package."""


class NumericalFailure(RuntimeError):
    """A solver or time stepper produced an unusable result.

    Raised for non-finite states, eigensolver breakdown, failed
    factorizations and non-convergent fixed-point iterations.  Carries a
    human-readable diagnostic; callers that can recover (e.g. a
    convergence study observing an explicit scheme blow up) catch it and
    record the event instead of masking it.
    """
