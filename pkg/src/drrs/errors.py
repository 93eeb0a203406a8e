"""Exception types shared across the package."""


class DrrsError(Exception):
    """Base class for all package-specific errors."""


class SingularityError(DrrsError):
    """State reached the orientation singularity guard (|phi_v| too close to pi/2)."""


class SingularControlAuthority(DrrsError):
    """The estimated input map G(xi1) @ Theta2_hat is numerically singular."""


class NotHurwitz(DrrsError):
    """A matrix required to be Hurwitz has spectral abscissa >= 0."""


class NoStabilizingGain(DrrsError):
    """No stabilizing initial feedback gain could be constructed."""


class NonConvergence(DrrsError):
    """Iterative solver failed to converge to a valid solution."""


class ParseError(DrrsError):
    """Config document is not well-formed."""


class ValidationError(DrrsError):
    """Config document violates one or more invariants.

    `problems` carries every violation found, not just the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
