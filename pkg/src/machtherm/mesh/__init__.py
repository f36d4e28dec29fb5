"""Triangular meshes: data model, MSH 2.2 I/O and generators."""

from machtherm.mesh.core import Mesh, ProbeLocation, interpolate, locate_probe
from machtherm.mesh.msh import parse_msh, read_msh, serialize_msh, write_msh

__all__ = [
    "Mesh", "ProbeLocation", "interpolate", "locate_probe",
    "parse_msh", "read_msh", "serialize_msh", "write_msh",
]
