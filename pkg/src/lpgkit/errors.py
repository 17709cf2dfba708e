"""Exception hierarchy shared by every lpgkit module."""

from __future__ import annotations


class LpgError(Exception):
    """Base class for all lpgkit errors."""


class DuplicateId(LpgError, ValueError):
    pass


class InvalidProperty(LpgError, ValueError):
    pass


class DanglingEndpoint(LpgError, ValueError):
    pass


class UnknownVertex(LpgError, KeyError):
    pass


class FrozenGraph(LpgError, RuntimeError):
    pass


class ParseError(LpgError, ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ManifestMismatch(LpgError, ValueError):
    pass


class InvalidRatios(LpgError, ValueError):
    pass


class EmptyClass(LpgError, ValueError):
    pass


class MixedKinds(LpgError, ValueError):
    pass


class RaggedVector(LpgError, ValueError):
    pass


class EmptyGraph(LpgError, ValueError):
    pass


class UnknownName(LpgError, KeyError):
    pass


class SchemaMismatch(LpgError, ValueError):
    pass


class RowMismatch(LpgError, ValueError):
    pass


class DimMismatch(LpgError, ValueError):
    pass


class NoForwardCache(LpgError, RuntimeError):
    pass


class ShapeMismatch(LpgError, ValueError):
    pass


class EmptyMask(LpgError, ValueError):
    pass


class UnknownTarget(LpgError, KeyError):
    pass


class DegenerateTarget(LpgError, ValueError):
    pass


class InvalidSpec(LpgError, ValueError):
    pass


class InvalidConfig(LpgError, ValueError):
    pass


class DigestMismatch(LpgError, ValueError):
    pass
