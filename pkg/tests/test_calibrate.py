import csv
import io

import numpy as np
import pytest

from machtherm.calibrate import (
    CONDUCTIVITY, ROBIN, CalibrationProblem, Parameter, convergence_log_csv, default_bounds, fit,
    fitted_table, misfit, result_csv,
)
from machtherm.errors import CalibrationError
from machtherm.fem import BoundarySpec, RobinEntry
from machtherm.materials import MaterialRegion, MaterialTable
from machtherm.mesh.core import Mesh
from machtherm.mesh.generate import rectangle_mesh
from machtherm.transient import ScenarioSpec, TemperatureTrace

TRUTH = {"conductivity:left": 2.0, "conductivity:right": 0.5, "robin:top": 0.8}


@pytest.fixture(scope="module")
def plate():
    base = rectangle_mesh(1.0, 0.5, 12, 6)
    left = base.centroids()[:, 0] < 0.5
    return Mesh(nodes=base.nodes, elements=base.elements, element_region=np.where(left, 1, 2),
                regions={"left": 1, "right": 2}, boundary_edges=base.boundary_edges,
                boundary_tags=base.boundary_tags, boundaries=base.boundaries)


@pytest.fixture(scope="module")
def setup(plate):
    materials = MaterialTable({"left": MaterialRegion(1.0, 1.0), "right": MaterialRegion(1.5, 1.0)})
    boundary = BoundarySpec(dirichlet={"bottom": 0.0}, robin={"top": RobinEntry(1.0, 0.0)},
                            adiabatic={"left", "right"})
    probes = {"a": (0.2, 0.4), "b": (0.8, 0.4), "c": (0.5, 0.25)}
    scenario = ScenarioSpec(t_end=0.3, dt=0.01, initial=1.0, probes=probes)
    params = [Parameter(CONDUCTIVITY, "left", 0.1, 10.0), Parameter(CONDUCTIVITY, "right", 0.1, 10.0),
              Parameter(ROBIN, "top", 0.01, 10.0)]
    groups = {"a": "g1", "b": "g1", "c": "g2"}
    dummy = {pid: TemperatureTrace(pid, [0.0, 1.0], [0.0, 0.0]) for pid in probes}
    draft = CalibrationProblem(plate, materials, boundary, scenario, params, dummy, groups)
    measured = draft.simulate(TRUTH)
    return plate, materials, boundary, scenario, params, measured, groups


def problem(setup, **over):
    plate, materials, boundary, scenario, params, measured, groups = setup
    kw = dict(parameters=params, measured=measured, groups=groups)
    kw.update(over)
    return CalibrationProblem(plate, materials, boundary, scenario, kw["parameters"], kw["measured"],
                              kw["groups"], kw.get("weights"))


def test_misfit_is_zero_at_truth(setup):
    assert misfit(TRUTH, problem(setup)) == pytest.approx(0.0, abs=1e-24)


@pytest.mark.parametrize("name", list(TRUTH))
def test_misfit_positive_off_truth(setup, name):
    p = problem(setup)
    off = dict(TRUTH, **{name: TRUTH[name] * 1.1})
    assert misfit(off, p) > 0


def test_fast_operators_match_full_assembly(setup):
    # the cached unit operators must give the same traces as a fresh assembly
    plate, materials, boundary, scenario, *_ = setup
    from machtherm.fem import robin_from_conductance
    from machtherm.transient import run_scenario
    mat = materials.with_effective("left", 2.0).with_effective("right", 0.5)
    bc = BoundarySpec(dirichlet={"bottom": 0.0}, robin={"top": robin_from_conductance(plate, "top", 0.8, 0.0)},
                      adiabatic={"left", "right"})
    full = run_scenario(plate, mat, bc, scenario).traces
    fast = problem(setup).simulate(TRUTH)
    for pid in fast:
        assert np.allclose(fast[pid].temperatures, full[pid].temperatures, rtol=1e-12, atol=1e-14)


def test_group_errors_and_weights(setup):
    p = problem(setup)
    off = dict(TRUTH, **{"robin:top": 1.0})
    errs = p.group_errors(off)
    assert set(errs) == {"g1", "g2"}
    weighted = problem(setup, weights={"g1": 0.0})
    assert misfit(off, weighted) == pytest.approx(errs["g2"])


def test_zero_weights_warn(setup):
    with pytest.warns(UserWarning, match="all misfit weights are zero"):
        problem(setup, weights={"g1": 0.0, "g2": 0.0})


@pytest.mark.parametrize("over,msg", [
    ({"parameters": []}, "nothing to fit"),
    ({"measured": {}}, "no measured traces"),
    ({"weights": {"nope": 1.0}}, "unknown group"),
    ({"weights": {"g1": -1.0}}, "negative"),
    ({"groups": {"a": "g1"}}, "belong to no group"),
])
def test_problem_validation(setup, over, msg):
    with pytest.raises(CalibrationError, match=msg):
        problem(setup, **over)


def test_parameter_validation(setup):
    with pytest.raises(CalibrationError, match="ordered"):
        Parameter(CONDUCTIVITY, "left", 2.0, 1.0)
    with pytest.raises(CalibrationError, match="unknown parameter kind"):
        Parameter("density", "left", 1.0, 2.0)
    dup = [Parameter(CONDUCTIVITY, "left", 0.1, 1.0)] * 2
    with pytest.raises(CalibrationError, match="duplicate"):
        problem(setup, parameters=dup)
    with pytest.raises(CalibrationError, match="not in the mesh"):
        problem(setup, parameters=[Parameter(CONDUCTIVITY, "shaft", 0.1, 1.0)])
    with pytest.raises(CalibrationError, match="outside"):
        misfit({**TRUTH, "conductivity:left": 20.0}, problem(setup))


def test_default_bounds():
    p = default_bounds(CONDUCTIVITY, "air_gap", 0.026)
    assert (p.lower, p.upper) == pytest.approx((0.0026, 0.26))
    assert (default_bounds(ROBIN, "shaft_surface").lower, default_bounds(ROBIN, "shaft_surface").upper) == (1e-3, 10.0)
    with pytest.raises(CalibrationError):
        default_bounds(CONDUCTIVITY, "air_gap")


def test_fit_recovers_truth(setup):
    p = problem(setup)
    res = fit(p, [1.0, 1.0, 0.1], max_evals=400)
    assert res.converged
    for name, value in res.params.items():
        assert value == pytest.approx(TRUTH[name], rel=1e-3)
    assert res.misfit < 1e-8 < res.initial_misfit
    assert res.evaluations == len(res.history) <= 400
    # bounds hold for every evaluated point
    for _, _, x in res.history:
        assert all(q.lower <= v <= q.upper for q, v in zip(p.parameters, x))


def test_fit_is_deterministic(setup):
    p = problem(setup)
    a = fit(p, [1.0, 1.0, 0.1], max_evals=60, seed=3)
    b = fit(p, [1.0, 1.0, 0.1], max_evals=60, seed=3)
    assert np.array_equal(a.values, b.values) and a.history == b.history


def test_budget_exhaustion_returns_best(setup):
    res = fit(problem(setup), [1.0, 1.0, 0.1], max_evals=15)
    assert not res.converged
    assert res.evaluations == 15
    assert res.misfit == min(v for _, v, _ in res.history)


def test_start_outside_bounds(setup):
    with pytest.raises(CalibrationError, match="outside"):
        fit(problem(setup), [100.0, 1.0, 0.1])


def test_reports(setup):
    p = problem(setup)
    res = fit(p, [1.0, 1.0, 0.1], max_evals=20)
    rows = list(csv.reader(io.StringIO(result_csv(res, p))))
    assert rows[0] == ["domain", "parameter", "value", "unit"]
    assert [r[:2] for r in rows[1:]] == [["left", "lambda_eff"], ["right", "lambda_eff"], ["top", "h"]]
    log = list(csv.reader(io.StringIO(convergence_log_csv(res))))
    assert len(log) == res.evaluations + 1
    best = [float(r[2]) for r in log[1:]]
    assert best == sorted(best, reverse=True)
    table = fitted_table(res, p)
    assert table["left"].conductivity_eff == res.values[0]
    assert table.robin_h == res.values[2]
