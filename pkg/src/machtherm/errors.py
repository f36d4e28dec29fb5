"""Exception hierarchy.

The CLI maps these onto its exit codes: configuration problems exit with 1,
numerical failures with 2 and optimizer non-convergence with 3.
"""


class MachthermError(Exception):
    """Base class for all package errors."""


class ConfigError(MachthermError, ValueError):
    pass


class MeshError(MachthermError, ValueError):
    pass


class MeshFormatError(MeshError):
    """Raised for malformed or unsupported MSH input."""


class GeometryError(MeshError):
    """Raised when a machine geometry cannot be meshed."""


class ProbeOutsideError(MeshError):
    def __init__(self, point, distance):
        self.point = tuple(point)
        self.distance = float(distance)
        super().__init__(
            f"point {self.point} lies outside the mesh; "
            f"distance to nearest boundary edge is {self.distance:.3e} m"
        )


class MaterialError(MachthermError, ValueError):
    pass


class AssemblyError(MachthermError, ValueError):
    pass


class SolverError(MachthermError, RuntimeError):
    pass


class SingularSystemError(SolverError):
    pass


class ScheduleError(MachthermError, ValueError):
    pass


class AnalysisError(MachthermError, ValueError):
    pass


class ThresholdNotCrossedError(AnalysisError):
    pass


class CalibrationError(MachthermError, ValueError):
    pass
