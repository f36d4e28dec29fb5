"""Turn a validated run configuration into model objects."""

from __future__ import annotations

from pathlib import Path

from machtherm.calibrate import (
    CONDUCTIVITY, CalibrationProblem, Parameter, default_bounds,
)
from machtherm.config import RunConfig
from machtherm.errors import ConfigError
from machtherm.fem import BoundarySpec, robin_from_conductance
from machtherm.materials import MaterialRegion, MaterialTable, USER, fitted_defaults, literature_defaults
from machtherm.mesh.core import Mesh
from machtherm.mesh.machine import build_machine_mesh, default_probes
from machtherm.mesh.msh import read_msh
from machtherm.transient import ScenarioSpec, Schedule, TemperatureTrace, power_cycle


def schedule(value):
    """A constant stays a float; a list of ``[t, v]`` pairs becomes a Schedule."""
    if isinstance(value, (int, float)):
        return float(value)
    return Schedule.from_pairs(value)


def resolve_path(path: str, base: Path | None) -> Path:
    p = Path(path)
    return p if p.is_absolute() or base is None else base / p


def build_mesh(cfg: RunConfig, base: Path | None = None) -> Mesh:
    g = cfg.geometry
    if g.mesh_file:
        return read_msh(resolve_path(g.mesh_file, base))
    return build_machine_mesh(g.machine(), g.resolution_level)


def build_materials(cfg: RunConfig) -> MaterialTable:
    table = literature_defaults() if cfg.materials.preset == "literature" else fitted_defaults()
    for region, o in cfg.materials.regions.items():
        current = table.entries.get(region)
        if current is None and (o.heat_capacity_J_m3C is None or (
                o.conductivity_W_mC is None and o.conductivity_radial_W_mC is None
                and o.conductivity_eff_W_mC is None)):
            raise ConfigError(f"materials.regions.{region}: a new region needs a heat capacity "
                              "and a conductivity")
        cv = o.heat_capacity_J_m3C or current.heat_capacity
        if o.conductivity_W_mC is not None:
            lam = o.conductivity_W_mC
        elif o.conductivity_radial_W_mC is not None:
            lam = (o.conductivity_radial_W_mC, o.conductivity_tangential_W_mC)
        elif current is not None:
            lam = current.conductivity
        else:
            lam = o.conductivity_eff_W_mC
        lam_z = current.conductivity_z if current is not None else None
        eff = o.conductivity_eff_W_mC
        if eff is None and current is not None and o.conductivity_W_mC is None \
                and o.conductivity_radial_W_mC is None:
            eff = current.conductivity_eff
        table = table.with_region(region, MaterialRegion(cv, lam, lam_z, eff), USER)
    return table


def robin_conductance(cfg: RunConfig, materials: MaterialTable) -> float | None:
    robin = cfg.boundaries.robin
    if robin is None:
        return None
    value = robin.conductance_W_Cm if robin.conductance_W_Cm is not None else materials.robin_h
    if value is None:
        raise ConfigError("boundaries.robin.conductance_W_Cm is required with the literature preset")
    return value


def build_boundary(cfg: RunConfig, mesh: Mesh, materials: MaterialTable,
                   conductance: float | None = None) -> BoundarySpec:
    b = cfg.boundaries
    jacket = schedule(b.jacket_C)
    robin = {}
    mode, region = "edge", "shaft"
    if b.robin is not None:
        ref = jacket if b.robin.reference_C is None else schedule(b.robin.reference_C)
        if b.robin.tag not in mesh.boundaries:
            raise ConfigError(f"boundaries.robin.tag {b.robin.tag!r} is not a tag of the mesh")
        robin[b.robin.tag] = robin_from_conductance(
            mesh, b.robin.tag, conductance or robin_conductance(cfg, materials), ref)
        mode, region = b.robin.mode, b.robin.volume_region
    return BoundarySpec(
        dirichlet={b.jacket_tag: jacket},
        adiabatic=frozenset(b.adiabatic_tags),
        robin=robin,
        robin_mode=mode,
        robin_volume_region=region,
    )


def build_probes(cfg: RunConfig) -> dict[str, tuple[tuple[float, float], str]]:
    probes = default_probes(cfg.geometry.machine()) if cfg.probes.use_defaults else {}
    for pid, p in cfg.probes.points.items():
        probes[pid] = ((p.x_m, p.y_m), p.group)
    if not probes:
        raise ConfigError("no probes: enable probes.use_defaults or list probes.points")
    return probes


def build_scenario(cfg: RunConfig, probes) -> ScenarioSpec:
    s = cfg.scenario
    if s.power_cycle is not None:
        c = s.power_cycle
        power = power_cycle(c.levels_W, c.ramp_W_per_s, c.hold_s, c.off_s, c.fall_s)
    else:
        power = schedule(s.power_W)
    return ScenarioSpec(
        t_end=s.t_end_s,
        dt=s.dt_s,
        initial=s.initial_C,
        power=power,
        axial_length=s.axial_length_m,
        fraction=s.model_fraction,
        theta=s.theta,
        probes={pid: p for pid, (p, _) in probes.items()},
        snapshot_every=s.snapshot_every_steps,
        backend=s.solver,
    )


def ambient_temperature(cfg: RunConfig) -> float:
    """Jacket temperature at the end of the run."""
    jacket = schedule(cfg.boundaries.jacket_C)
    return float(jacket) if isinstance(jacket, float) else jacket(cfg.scenario.t_end_s)


def build_parameters(cfg: RunConfig) -> tuple[list[Parameter], list[float]]:
    """Fitted parameters and start values.

    Conductivities default to bounds of 0.1x to 10x their literature value
    and start there; the Robin conductance starts at the geometric middle
    of its bounds because it has no literature value.
    """
    literature = literature_defaults()
    params, start = [], []
    for pc in cfg.calibration.parameters:
        if pc.kind == CONDUCTIVITY:
            if pc.target in literature:
                lam = literature[pc.target].conductivity
                ref = lam[0] if isinstance(lam, tuple) else lam
            else:
                ref = pc.initial
            base = default_bounds(pc.kind, pc.target, ref)
        else:
            ref = None
            base = default_bounds(pc.kind, pc.target)
        p = Parameter(pc.kind, pc.target, pc.lower or base.lower, pc.upper or base.upper)
        x0 = pc.initial or ref or (p.lower * p.upper) ** 0.5
        if not p.contains(x0):
            raise ConfigError(f"calibration: start value {x0} of {p.name} is outside its bounds")
        params.append(p)
        start.append(x0)
    if not params:
        raise ConfigError("calibration: nothing to fit (calibration.parameters is empty)")
    return params, start


def build_calibration(cfg: RunConfig, mesh: Mesh, measured: dict[str, TemperatureTrace]):
    params, start = build_parameters(cfg)
    materials = build_materials(cfg)
    fitted_robin = [x for p, x in zip(params, start) if p.kind != CONDUCTIVITY]
    boundary = build_boundary(cfg, mesh, materials, fitted_robin[0] if fitted_robin else None)
    probes = build_probes(cfg)
    scenario = build_scenario(cfg, probes)
    unknown = sorted(set(measured) - set(probes))
    if unknown:
        raise ConfigError(f"measured traces {unknown} match no configured probe")
    groups = {pid: probes[pid][1] for pid in measured}
    problem = CalibrationProblem(mesh, materials, boundary, scenario, params,
                                 measured, groups, cfg.calibration.weights or None)
    return problem, start
