"""Exception types shared across the simulator."""


class CoilPilotError(Exception):
    """Base class for all simulator errors."""


class InvalidSpecError(CoilPilotError, ValueError):
    """A spec/config object violates one of its invariants."""


class OutOfRangeError(CoilPilotError, ValueError):
    """An input falls outside the physically meaningful range."""


class BelowFloorError(CoilPilotError, ValueError):
    """Pressure below the derivative floor where dl/dp is unbounded."""


class InvalidLengthsError(CoilPilotError, ValueError):
    """Nonpositive chamber length passed to the arc mapping."""


class DoubleLoadError(CoilPilotError, RuntimeError):
    """Attempted to load an anchor into a driver that already holds one."""


class PhaseError(CoilPilotError, RuntimeError):
    """Deployment operation attempted in an illegal phase."""


class SaturatedError(CoilPilotError, ValueError):
    """Torque sensor magnet gap closed below its minimum."""


class NonMonotoneDataError(CoilPilotError, ValueError):
    """Calibration samples are too few or not strictly increasing."""


class DuplicatePointError(CoilPilotError, ValueError):
    """Consecutive path targets coincide, leaving the spline undefined."""


class SchemaMismatchError(CoilPilotError, ValueError):
    """Telemetry file does not match the expected scenario schema."""


class UnknownScenarioError(CoilPilotError, ValueError):
    """Scenario name not in the known set."""
