"""Exception and warning types raised across the package."""


class DarkbeamError(Exception):
    """Base class for all package errors."""


class InvariantError(DarkbeamError, ValueError):
    """A domain-type invariant was violated at construction time."""


class SchemaError(DarkbeamError, ValueError):
    """A configuration document failed schema validation.

    ``pointer`` holds the JSON pointer of the offending node.
    """

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class PhysicsError(DarkbeamError):
    """Base class for errors raised by the physics modules."""


class NonPositiveVelocity(PhysicsError):
    pass


class NonTransportingChannel(PhysicsError):
    pass


class DegenerateProfile(PhysicsError):
    pass


class OutOfRecord(PhysicsError):
    pass


class WindowTooShort(PhysicsError):
    pass


class CFLViolation(PhysicsError):
    pass


class NumericalBlowup(PhysicsError):
    pass


class NonConvergent(PhysicsError):
    pass


class UnphysicalCovariance(PhysicsError):
    pass


class IncompleteTransferWarning(UserWarning):
    pass


class BoundInapplicableWarning(UserWarning):
    pass
