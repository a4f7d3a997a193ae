"""Exception hierarchy.

Domain errors (the requested point or configuration is outside the region
where the problem is solvable) are separated from solver failures so the CLI
can map them to distinct exit codes.
"""


class SaturableError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SaturableError):
    """The input lies outside the admissible set."""


class SolverError(SaturableError):
    """A numerical procedure failed to produce an accepted result."""


class NotInOmega(DomainError):
    """The frozen problem at ``y`` has no ground state since V(y)s(y) >= 1."""

    def __init__(self, y, vy, sy):
        self.y = y
        self.vy = vy
        self.sy = sy
        super().__init__(
            f"point {list(map(float, y)) if y is not None else '?'} is outside "
            f"Omega = {{V s < 1}}: V(y)*s(y) = {vy * sy:.6g} >= 1, the frozen "
            "problem has no nontrivial solution"
        )


class LeftOmega(DomainError):
    """A descent iterate left Omega."""


class NoProjection(DomainError):
    """The Nehari gap is nonnegative, so no multiple of u lies on N_y."""


class BracketNotFound(SolverError):
    """No overshoot/undershoot change was found in the amplitude scan."""


class TruncationTooSmall(SolverError):
    """The profile tail at the truncation radius exceeds the tolerance."""


class MaxIterations(SolverError):
    """An iterative scalar solve hit its iteration cap."""


class NoDescent(SolverError):
    """Backtracking line search could not decrease the objective."""


class ConvergedToZero(SolverError):
    """Newton collapsed onto the trivial critical point u = 0."""


class NoConvergence(SolverError):
    """The penalized solver hit its iteration cap without meeting tol."""


class TrivialSolution(SolverError):
    """The grid solution is numerically zero."""


class FitRangeEmpty(SolverError):
    """The decay-fit annulus holds no usable samples."""


class ConfigError(SaturableError):
    """Malformed or invalid run configuration."""
