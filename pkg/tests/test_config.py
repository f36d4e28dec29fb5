from pathlib import Path

import pytest

from machtherm.config import RunConfig, config_hash, load_config, parse_config
from machtherm.errors import ConfigError
from machtherm.pipeline import (
    ambient_temperature, build_boundary, build_materials, build_parameters, build_scenario, schedule,
)
from machtherm.transient import Schedule

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_empty_config_gives_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.materials.preset == "fitted"
    assert cfg.scenario.dt_s == 1.0 and cfg.scenario.theta == 1.0


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_load(path):
    load_config(path)


@pytest.mark.parametrize("text,msg", [
    ("scenario: {dt: 1}", "scenario.dt: Extra inputs"),
    ("scenario: {dt_s: -1}", "scenario.dt_s"),
    ("scenario: {t_end_s: 1, dt_s: 5}", "at least one time step"),
    ("scenario: {power_W: 10, power_cycle: {levels_W: [1]}}", "not both"),
    ("scenario: {power_cycle: {levels_W: [-1]}}", "non-negative"),
    ("materials: {preset: measured}", "materials.preset"),
    ("materials: {regions: {shaft: {conductivity_radial_W_mC: 3}}}", "given together"),
    ("[1, 2]", "mapping of sections"),
    ("a: [", "not valid YAML"),
    ("boundaries: {jacket_C: [[0, 1, 2]]}", "boundaries.jacket_C"),
])
def test_invalid_configs(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config("/nonexistent/run.yaml")


def test_hash_ignores_output_directory_and_spelled_defaults():
    a = parse_config("scenario: {t_end_s: 100}")
    b = parse_config("scenario: {t_end_s: 100, dt_s: 1.0}\noutput: {directory: elsewhere}")
    c = parse_config("scenario: {t_end_s: 101}")
    assert config_hash(a) == config_hash(b) != config_hash(c)
    assert len(config_hash(a)) == 64


def test_schedules():
    assert schedule(26) == 26.0
    s = schedule([[0, 26], [600, 40]])
    assert isinstance(s, Schedule) and s(300) == 33.0


def test_ambient_follows_jacket_schedule():
    cfg = parse_config("boundaries: {jacket_C: [[0, 60], [100, 30]]}\nscenario: {t_end_s: 500}")
    assert ambient_temperature(cfg) == 30.0


def test_material_overrides():
    cfg = parse_config("""
materials:
  preset: literature
  regions:
    stator_yoke: {conductivity_eff_W_mC: 20}
    shaft: {heat_capacity_J_m3C: 4.0e6}
    rotor_yoke: {conductivity_radial_W_mC: 30, conductivity_tangential_W_mC: 5}
""")
    table = build_materials(cfg)
    assert table["stator_yoke"].conductivity_eff == 20.0
    assert table["shaft"].heat_capacity == 4.0e6 and table["shaft"].conductivity == 59.6
    assert table["rotor_yoke"].conductivity == (30.0, 5.0)
    assert table.provenance["stator_yoke"] == "user"
    with pytest.raises(ConfigError, match="new region needs"):
        build_materials(parse_config("materials: {regions: {extra: {conductivity_W_mC: 1}}}"))


def test_robin_reference_defaults_to_jacket(machine_mesh):
    cfg = parse_config("boundaries: {jacket_C: 30}")
    bc = build_boundary(cfg, machine_mesh, build_materials(cfg))
    entry = bc.robin["shaft_surface"]
    assert entry.reference == 30.0
    from machtherm.fem import edge_length
    assert entry.h * edge_length(machine_mesh, "shaft_surface") == pytest.approx(0.235)
    lit = parse_config("materials: {preset: literature}")
    with pytest.raises(ConfigError, match="conductance_W_Cm is required"):
        build_boundary(lit, machine_mesh, build_materials(lit))


def test_power_cycle_scenario():
    cfg = load_config(CONFIGS / "load_cycle.yaml")
    sc = build_scenario(cfg, {"p": ((0.06, 0.01), "slot")})
    assert sc.power(200.0) == 200.0 and sc.power(7400.0) == 200.0 and sc.power(7402.0) == 0.0
    assert sc.power.extrema() == (0.0, 300.0)


def test_parameters_defaults():
    cfg = load_config(CONFIGS / "calibration.yaml")
    params, start = build_parameters(cfg)
    assert [p.name for p in params] == ["conductivity:stator_yoke", "conductivity:rotor_yoke",
                                        "conductivity:air_gap", "robin:shaft_surface"]
    assert start == pytest.approx([40.0, 40.0, 0.026, 0.1])
    assert params[2].lower == pytest.approx(0.0026) and params[3].upper == 10.0
    with pytest.raises(ConfigError, match="nothing to fit"):
        build_parameters(parse_config(""))
    bad = parse_config("calibration: {parameters: [{kind: robin, target: shaft_surface, initial: 50}]}")
    with pytest.raises(ConfigError, match="outside its bounds"):
        build_parameters(bad)
