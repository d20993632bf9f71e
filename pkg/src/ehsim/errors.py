"""Exception hierarchy shared across the simulator."""


class EhsimError(Exception):
    """Base class for all simulator errors."""


class DomainError(EhsimError, ValueError):
    """A mechanism coordinate lies outside the configurations it can assume."""


class SingularityError(DomainError):
    """The scissor Jacobian is unbounded at the requested configuration."""


class CalibrationError(EhsimError, ValueError):
    """Link geometry cannot be solved from the requested envelope."""


class ScenarioError(EhsimError, ValueError):
    """Scenario file is malformed or violates an invariant."""


class SimulationFault(EhsimError, ArithmeticError):
    """Non-finite state encountered while stepping."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
