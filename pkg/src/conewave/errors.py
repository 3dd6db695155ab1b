"""Exception types shared across the package.

The command line tool maps these onto exit codes: configuration problems
exit with 2, numerical failures with 3, and contract violations detected
in a run exit with 1.
"""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


class NumericalError(RuntimeError):
    """A solver or quadrature failed to meet its accuracy contract."""


class BandResolutionError(NumericalError):
    """A frequency band was requested beyond the resolution of a grid."""


class CoordinateSingularityError(NumericalError):
    """A trajectory entered the polar coordinate singularity with no
    regular interior chart available for the active cap profile."""
