"""Exception types shared across the package.

Input problems (bad shapes, non-finite values, invalid parameters) raise
plain ``ValueError``; the classes here mark conditions that need to be
distinguishable from input errors by callers and by the CLI exit-code
mapping.
"""


class ConfigError(ValueError):
    """A configuration file or override failed schema or invariant checks.

    The message carries the dotted path of the offending key where one
    exists, e.g. ``"problem.kernel.alpha: entries must be positive"``.
    """


class NumericalError(RuntimeError):
    """A numerical operation failed (factorization breakdown, non-finite
    intermediate) in a way that indicates conditioning trouble rather than
    bad user input."""


class DegenerateStateError(RuntimeError):
    """Every alternative's acquisition value collapsed, so the policy
    cannot rank alternatives."""
