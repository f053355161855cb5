"""
Exception types raised by the Surface Flattening Analyzer
"""


class FlatteningError(Exception):
    """Base class for every error raised by the toolkit"""


class ParseError(FlatteningError, ValueError):
    """A mesh or image file could not be parsed"""


class InvalidMesh(FlatteningError):
    """A mesh violates one of the TriMesh3 invariants"""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotADisk(FlatteningError):
    """The operation needs a mesh with exactly one boundary loop"""


class SolverFailure(FlatteningError):
    """A flattening solver did not produce a parameterization"""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class Diverged(FlatteningError):
    """The mass-spring simulation produced non-finite state"""

    def __init__(self, message, step_count=0):
        super().__init__(message)
        self.step_count = step_count


class DegenerateParameterization(FlatteningError):
    """Zero-area 2D faces make a metric undefined"""

    def __init__(self, message, face_ids=()):
        super().__init__(message)
        self.face_ids = list(face_ids)


class MissingTexture(FlatteningError):
    """Rasterization was asked for a mesh without intensity or texture"""


class EmptyParameterization(FlatteningError):
    """The UV layout has no extent to rasterize"""


class LengthMismatch(FlatteningError, ValueError):
    """Per-face values do not match the face count"""


class ConfigError(FlatteningError, ValueError):
    """Invalid run or simulation configuration"""
