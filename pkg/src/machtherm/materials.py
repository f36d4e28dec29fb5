"""Thermal material data per mesh region.

Conductivities are in W/(m K) (numerically the same as W/°C/m), heat
capacities per unit volume in J/(m^3 K).  In-plane conductivity is either an
isotropic scalar or a polar pair (radial, tangential) that is rotated into
Cartesian axes about the machine centre.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from machtherm.errors import MaterialError

LITERATURE = "literature"
FITTED = "fitted"
USER = "user"

# Robin coefficient of the shaft surface obtained by the cooldown fit.
FITTED_ROBIN_H = 0.235


@dataclass(frozen=True)
class MaterialRegion:
    """Heat capacity and conductivity of one region.

    ``conductivity`` is a scalar (isotropic) or a ``(radial, tangential)``
    pair.  ``conductivity_eff`` replaces it in assembly when set.
    ``conductivity_z`` is the axial value, kept for reference only.
    """

    heat_capacity: float
    conductivity: float | tuple[float, float]
    conductivity_z: float | None = None
    conductivity_eff: float | None = None

    def __post_init__(self):
        if not (self.heat_capacity > 0 and math.isfinite(self.heat_capacity)):
            raise MaterialError(f"heat capacity must be positive, got {self.heat_capacity}")
        values = np.atleast_1d(np.asarray(self.conductivity, dtype=float))
        if values.size not in (1, 2):
            raise MaterialError("conductivity must be a scalar or a (radial, tangential) pair")
        extra = [v for v in (self.conductivity_z, self.conductivity_eff) if v is not None]
        if not np.all(np.concatenate([values, extra]) > 0) or not np.all(np.isfinite(values)):
            raise MaterialError(f"conductivities must be positive and finite, got {self.conductivity}")
        if values.size == 2:
            object.__setattr__(self, "conductivity", (float(values[0]), float(values[1])))
        else:
            object.__setattr__(self, "conductivity", float(values[0]))

    @property
    def anisotropic(self) -> bool:
        return self.conductivity_eff is None and isinstance(self.conductivity, tuple)


@dataclass(frozen=True)
class MaterialTable:
    entries: dict[str, MaterialRegion]
    provenance: dict[str, str] = field(default_factory=dict)
    robin_h: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))
        prov = {name: self.provenance.get(name, USER) for name in self.entries}
        object.__setattr__(self, "provenance", prov)

    def __getitem__(self, region: str) -> MaterialRegion:
        try:
            return self.entries[region]
        except KeyError:
            raise MaterialError(f"no material for region {region!r}") from None

    def __contains__(self, region):
        return region in self.entries

    def with_region(self, region: str, material: MaterialRegion, provenance: str = USER):
        entries = {**self.entries, region: material}
        return MaterialTable(entries, {**self.provenance, region: provenance}, self.robin_h)

    def with_effective(self, region: str, value: float, provenance: str = FITTED):
        return self.with_region(region, replace(self[region], conductivity_eff=value), provenance)

    def check_mesh(self, mesh) -> None:
        """Every region in the mesh needs an entry; unused entries only warn."""
        present = mesh.region_names()
        missing = [r for r in present if r not in self.entries]
        if missing:
            raise MaterialError(f"no material for mesh regions {missing}")
        orphans = [r for r in self.entries if r not in mesh.regions]
        if orphans:
            warnings.warn(f"material entries for unknown regions {orphans}", stacklevel=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([
            "region", "provenance", "heat_capacity_J_m3C", "conductivity_W_mC",
            "conductivity_radial_W_mC", "conductivity_tangential_W_mC",
            "conductivity_z_W_mC", "conductivity_eff_W_mC",
        ])
        for name, m in self.entries.items():
            iso = "" if isinstance(m.conductivity, tuple) else m.conductivity
            rad, tan = m.conductivity if isinstance(m.conductivity, tuple) else ("", "")
            w.writerow([name, self.provenance[name], m.heat_capacity, iso, rad, tan,
                        "" if m.conductivity_z is None else m.conductivity_z,
                        "" if m.conductivity_eff is None else m.conductivity_eff])
        if self.robin_h is not None:
            w.writerow(["shaft_surface(h)", FITTED, "", self.robin_h, "", "", "", ""])
        return buf.getvalue()


STATOR_YOKE = MaterialRegion(3.925e6, 40.0, conductivity_z=2.5)
ROTOR_YOKE = MaterialRegion(3.925e6, 40.0, conductivity_z=2.5)
CONDUCTOR = MaterialRegion(3.435e6, 398.0)
INSULATION = MaterialRegion(7.905e6, 0.7)
AIR_GAP = MaterialRegion(1.210e3, 0.026)
SHAFT = MaterialRegion(3.777e6, 59.6)
# Handbook aluminium (237 W/m/K, 2700 kg/m^3 * 897 J/kg/K); the cage has no
# row in the measured data so this entry is a user-level assumption.
ALUMINIUM_CAGE = MaterialRegion(2700.0 * 897.0, 237.0)


def literature_defaults() -> MaterialTable:
    entries = {
        "shaft": SHAFT,
        "rotor_yoke": ROTOR_YOKE,
        "air_gap": AIR_GAP,
        "stator_yoke": STATOR_YOKE,
        "slot_insulation": INSULATION,
        "conductor_upper": CONDUCTOR,
        "conductor_lower": CONDUCTOR,
        "cage": ALUMINIUM_CAGE,
    }
    provenance = {name: LITERATURE for name in entries}
    provenance["cage"] = USER
    return MaterialTable(entries, provenance)


def fitted_defaults() -> MaterialTable:
    table = literature_defaults()
    for region, value in (
        ("stator_yoke", 24.0),
        ("rotor_yoke", 16.0),
        ("air_gap", 0.052),
        ("shaft", 59.6),
    ):
        table = table.with_effective(region, value)
    return replace(table, robin_h=FITTED_ROBIN_H)


def polar_to_cartesian(radial: float, tangential: float, point) -> np.ndarray:
    """Rotate ``diag(radial, tangential)`` to Cartesian axes at ``point``."""
    phi = math.atan2(point[1], point[0])
    c, s = math.cos(phi), math.sin(phi)
    rot = np.array([[c, -s], [s, c]])
    return rot @ np.diag([radial, tangential]) @ rot.T


def resolve(table: MaterialTable, region: str, point=(1.0, 0.0)) -> tuple[float, np.ndarray]:
    """Heat capacity and 2x2 conductivity tensor of ``region`` at ``point``.

    The effective conductivity wins over the nominal one; a scalar becomes
    an isotropic tensor.
    """
    m = table[region]
    if m.conductivity_eff is not None:
        lam = np.eye(2) * m.conductivity_eff
    elif isinstance(m.conductivity, tuple):
        lam = polar_to_cartesian(*m.conductivity, point)
    else:
        lam = np.eye(2) * m.conductivity
    return m.heat_capacity, lam


def element_properties(table: MaterialTable, mesh) -> tuple[np.ndarray, np.ndarray]:
    """Per-element heat capacity ``(E,)`` and conductivity tensor ``(E, 2, 2)``."""
    table.check_mesh(mesh)
    cv = np.empty(mesh.n_elements)
    lam = np.empty((mesh.n_elements, 2, 2))
    centroids = mesh.centroids()
    for region in mesh.region_names():
        mask = mesh.region_mask(region)
        m = table[region]
        c, iso = resolve(table, region)
        cv[mask] = c
        if m.anisotropic:
            rad, tan = m.conductivity
            phi = np.arctan2(centroids[mask, 1], centroids[mask, 0])
            co, si = np.cos(phi), np.sin(phi)
            lam[mask, 0, 0] = rad * co**2 + tan * si**2
            lam[mask, 1, 1] = rad * si**2 + tan * co**2
            lam[mask, 0, 1] = lam[mask, 1, 0] = (rad - tan) * co * si
        else:
            lam[mask] = iso
    eig = np.linalg.eigvalsh(lam)
    if np.any(eig <= 0):
        raise MaterialError("conductivity tensor is not positive definite")
    return cv, lam
