"""Exception types raised across the toolkit.

Every error that callers are expected to catch derives from WattbenchError,
so service and CLI layers can map the whole family to one failure path.
"""


class WattbenchError(Exception):
    """Base class for all toolkit errors."""


# --- telemetry ---------------------------------------------------------


class CounterRegression(WattbenchError):
    """A cumulative tick counter decreased (counter wrap or reboot)."""


class ParseError(WattbenchError):
    """A recorded stream line could not be parsed."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class NonMonotonicTimestamp(ParseError):
    """Timestamps in a sample stream went backwards or repeated."""


class InsufficientSamples(WattbenchError):
    """Too few samples survive trimming to compute slot statistics."""


# --- workloads ---------------------------------------------------------


class EmptyGrid(WattbenchError):
    """A sweep plan was requested over an empty parameter grid."""


class RateUnachievable(WattbenchError):
    """Requested transfer rate exceeds the achievable cap for the packet size."""


# --- hostsim -----------------------------------------------------------


class DomainViolation(WattbenchError):
    """Simulator asked to operate outside its configured domain."""


# --- fitting -----------------------------------------------------------


class InsufficientData(WattbenchError):
    """Not enough distinct points for the requested model order."""


class IllConditioned(WattbenchError):
    """Fit design matrix is numerically degenerate; lower the degree."""


class DegeneratePower(WattbenchError):
    """Fitted power at this load does not exceed the baseline coefficient."""


class NonPositivePower(WattbenchError):
    """Component power is not positive, so an efficiency cannot be formed."""


# --- estimator ---------------------------------------------------------


class UncalibratedOperatingPoint(WattbenchError):
    """Profile has no CPU curve for the requested (cores, frequency)."""


class LoadOutOfDomain(WattbenchError):
    """Requested load lies outside the calibrated curve domain."""


class UncalibratedBlockSize(WattbenchError):
    """Block size outside the calibrated disk grid hull."""


class UncalibratedPacketSize(WattbenchError):
    """(frequency, packet size) not resolvable against the network model."""


class RateOutOfDomain(WattbenchError):
    """Transfer rate outside the fitted network model's rate domain."""


# --- persistence / reporting -------------------------------------------


class FormatError(WattbenchError):
    """A persisted document is malformed or has the wrong kind."""


class SchemaVersionError(FormatError):
    """Document schema major version is not supported by this build."""


class MissingArtifact(WattbenchError):
    """Profile does not contain the artifact a report asked for."""
