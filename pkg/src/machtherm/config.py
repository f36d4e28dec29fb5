"""Run configuration: a YAML document validated before any computation.

Every physical value carries its unit in the key name (``_m``, ``_s``,
``_W``, ``_C`` and so on).  Unknown keys are rejected.  A schedule is
either a number or a list of ``[time_s, value]`` pairs interpolated
linearly and held constant after the last pair.

Top-level sections: ``geometry``, ``materials``, ``boundaries``,
``scenario``, ``probes``, ``calibration``, ``output``.  All of them are
optional.  See ``configs/`` in the repository for worked examples.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from machtherm.errors import ConfigError

ScheduleValue = Union[float, list[tuple[float, float]]]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeometryConfig(_Section):
    shaft_radius_m: float = Field(0.016, gt=0)
    rotor_yoke_outer_radius_m: float = Field(0.042, gt=0)
    air_gap_thickness_m: float = Field(0.0003, gt=0)
    stator_inner_radius_m: float = Field(0.050, gt=0)
    stator_outer_radius_m: float = Field(0.085, gt=0)
    slot_count: int = Field(36, ge=4)
    conductors_per_slot: int = Field(18, ge=1)
    conductor_radius_m: float = Field(0.00075, gt=0)
    slot_width_m: float = Field(0.0058, gt=0)
    slot_depth_m: float = Field(0.013, gt=0)
    slot_offset_m: float = Field(0.001, ge=0)
    mesh_size_m: float = Field(0.0025, gt=0)
    slot_mesh_size_m: float = Field(0.0006, gt=0)
    resolution_level: int = Field(1, ge=1, le=8)
    # an existing MSH file replaces the generated mesh
    mesh_file: Optional[str] = None

    def machine(self):
        from machtherm.mesh.machine import MachineGeometry
        return MachineGeometry(
            shaft_radius=self.shaft_radius_m,
            rotor_yoke_outer_radius=self.rotor_yoke_outer_radius_m,
            air_gap_thickness=self.air_gap_thickness_m,
            stator_inner_radius=self.stator_inner_radius_m,
            stator_outer_radius=self.stator_outer_radius_m,
            slot_count=self.slot_count,
            conductors_per_slot=self.conductors_per_slot,
            conductor_radius=self.conductor_radius_m,
            slot_width=self.slot_width_m,
            slot_depth=self.slot_depth_m,
            slot_offset=self.slot_offset_m,
            mesh_size=self.mesh_size_m,
            slot_mesh_size=self.slot_mesh_size_m,
        )


class MaterialOverride(_Section):
    heat_capacity_J_m3C: Optional[float] = Field(None, gt=0)
    conductivity_W_mC: Optional[float] = Field(None, gt=0)
    conductivity_radial_W_mC: Optional[float] = Field(None, gt=0)
    conductivity_tangential_W_mC: Optional[float] = Field(None, gt=0)
    conductivity_eff_W_mC: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_conductivity(self):
        polar = (self.conductivity_radial_W_mC, self.conductivity_tangential_W_mC)
        if (polar[0] is None) != (polar[1] is None):
            raise ValueError("radial and tangential conductivity must be given together")
        if polar[0] is not None and self.conductivity_W_mC is not None:
            raise ValueError("give either an isotropic or a radial/tangential conductivity")
        return self


class MaterialsConfig(_Section):
    preset: Literal["literature", "fitted"] = "fitted"
    regions: dict[str, MaterialOverride] = Field(default_factory=dict)


class RobinConfig(_Section):
    tag: str = "shaft_surface"
    # total conductance per axial metre; the preset value is used when omitted
    conductance_W_Cm: Optional[float] = Field(None, gt=0)
    # defaults to the jacket schedule
    reference_C: Optional[ScheduleValue] = None
    mode: Literal["edge", "volume"] = "edge"
    volume_region: str = "shaft"


class BoundariesConfig(_Section):
    jacket_C: ScheduleValue = 26.0
    jacket_tag: str = "jacket"
    adiabatic_tags: list[str] = Field(default_factory=lambda: ["symmetry_cut"])
    robin: Optional[RobinConfig] = RobinConfig()


class PowerCycleConfig(_Section):
    levels_W: list[float]
    ramp_W_per_s: float = Field(1.0, gt=0)
    hold_s: float = Field(7200.0, gt=0)
    off_s: float = Field(7200.0, ge=0)
    fall_s: float = Field(1.0, gt=0)

    @field_validator("levels_W")
    @classmethod
    def _non_negative(cls, v):
        if not v or any(x < 0 for x in v):
            raise ValueError("levels_W needs at least one non-negative power level")
        return v


class ScenarioConfig(_Section):
    initial_C: float = 26.0
    t_end_s: float = Field(3600.0, gt=0)
    dt_s: float = Field(1.0, gt=0)
    theta: float = Field(1.0, ge=0.5, le=1.0)
    power_W: ScheduleValue = 0.0
    power_cycle: Optional[PowerCycleConfig] = None
    axial_length_m: float = Field(0.1, gt=0)
    model_fraction: float = Field(0.25, gt=0, le=1)
    snapshot_every_steps: int = Field(0, ge=0)
    solver: Literal["direct", "cg"] = "direct"

    @model_validator(mode="after")
    def _grid(self):
        if self.t_end_s < self.dt_s:
            raise ValueError("t_end_s must be at least one time step dt_s")
        if self.power_cycle is not None and self.power_W != 0.0:
            raise ValueError("give either power_W or power_cycle, not both")
        return self


class ProbeConfig(_Section):
    x_m: float
    y_m: float
    group: str = "user"


class ProbesConfig(_Section):
    use_defaults: bool = True
    points: dict[str, ProbeConfig] = Field(default_factory=dict)


class ParameterConfig(_Section):
    kind: Literal["conductivity", "robin"]
    target: str
    initial: Optional[float] = Field(None, gt=0)
    lower: Optional[float] = Field(None, gt=0)
    upper: Optional[float] = Field(None, gt=0)


class CalibrationConfig(_Section):
    measured_traces: Optional[str] = None
    parameters: list[ParameterConfig] = Field(default_factory=list)
    weights: dict[str, float] = Field(default_factory=dict)
    max_evals: int = Field(500, ge=1)
    xtol: float = Field(1e-3, gt=0)
    ftol_C2: float = Field(1e-6, gt=0)
    initial_step: float = Field(0.5, gt=0)
    restart_shrink: float = Field(30.0, gt=1)
    seed: int = 0


class OutputConfig(_Section):
    directory: str = "out"
    write_vtk: bool = True
    write_field_csv: bool = True


class RunConfig(_Section):
    geometry: GeometryConfig = GeometryConfig()
    materials: MaterialsConfig = MaterialsConfig()
    boundaries: BoundariesConfig = BoundariesConfig()
    scenario: ScenarioConfig = ScenarioConfig()
    probes: ProbesConfig = ProbesConfig()
    calibration: CalibrationConfig = CalibrationConfig()
    output: OutputConfig = OutputConfig()


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{where}: {err['msg']}")
    return "; ".join(lines)


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_format_errors(exc)}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the normalised config.

    Defaults are filled in before hashing, so spelling out a default value
    does not change the hash.  The output directory is excluded because it
    does not affect results.
    """
    data = config.model_dump(mode="json")
    data["output"].pop("directory", None)
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
