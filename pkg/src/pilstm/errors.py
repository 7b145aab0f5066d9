"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class PilstmError(Exception):
    """Base class for all errors raised by this package."""


# core data
class MissingColumn(PilstmError, KeyError):
    pass


class NonUniformSampling(PilstmError, ValueError):
    pass


class EmptyFile(PilstmError, ValueError):
    pass


class LeadingMissing(PilstmError, ValueError):
    pass


class EmptyInput(PilstmError, ValueError):
    pass


class ChannelMismatch(PilstmError, ValueError):
    pass


class TooShort(PilstmError, ValueError):
    pass


class InsufficientGroups(PilstmError, ValueError):
    pass


# phenomenological laws
class NonPositiveSpeed(PilstmError, ValueError):
    pass


class UnsortedDisplacement(PilstmError, ValueError):
    pass


class NonPhysicalTime(PilstmError, ValueError):
    pass


class NonPositiveSOC(PilstmError, ValueError):
    pass


class SingularSystem(PilstmError, ValueError):
    pass


class DomainViolation(PilstmError, ValueError):
    pass


# neural engine
class ShapeMismatch(PilstmError, ValueError):
    pass


class NonFiniteActivation(PilstmError, FloatingPointError):
    pass


class TapeMismatch(PilstmError, ValueError):
    pass


class CheckpointError(PilstmError, ValueError):
    pass


# losses / training
class LengthMismatch(PilstmError, ValueError):
    pass


class Diverged(PilstmError, FloatingPointError):
    pass


class EmptySplit(PilstmError, ValueError):
    pass


class ScenarioLeakage(PilstmError, ValueError):
    pass


# safety
class ZeroCollapseTime(PilstmError, ValueError):
    pass


# cli
class BadCatalog(PilstmError, ValueError):
    pass


class BadConfig(PilstmError, ValueError):
    pass


class MissingArtifacts(PilstmError, FileNotFoundError):
    pass
