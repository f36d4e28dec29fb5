import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from machtherm.errors import AssemblyError, SingularSystemError, SolverError
from machtherm.fem import (
    BoundarySpec, LinearSystem, RobinEntry, SPDSolver, TemperatureField, assemble_mass, assemble_robin,
    assemble_robin_volume, assemble_stiffness, assemble_system, edge_length, field_to_csv,
    field_to_vtk, heat_balance, l2_error, robin_from_conductance, solve_steady,
)
from machtherm.materials import MaterialRegion, MaterialTable, fitted_defaults
from machtherm.mesh.generate import annulus_mesh, rectangle_mesh
from machtherm.transient import joule_source_from_power

from meshgen import random_mesh


def uniform(mesh, cv=1.0, lam=1.0):
    return MaterialTable({name: MaterialRegion(cv, lam) for name in mesh.regions})


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 100.0))
def test_stiffness_properties(seed, lam):
    m = random_mesh(np.random.default_rng(seed))
    K = assemble_stiffness(m, uniform(m, lam=lam))
    assert abs(K - K.T).max() <= 1e-12 * abs(K).max()
    assert np.abs(K @ np.ones(m.n_nodes)).max() <= 1e-10 * abs(K).max()
    # energy of a linear field is lambda |grad|^2 * area
    u = 2.0 * m.nodes[:, 0] - 3.0 * m.nodes[:, 1]
    assert u @ K @ u == pytest.approx(lam * 13.0 * m.total_area(), rel=1e-9)
    assert np.linalg.eigvalsh(K.toarray()).min() > -1e-9 * abs(K).max()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 1e7))
def test_mass_total_is_capacity(seed, cv):
    m = random_mesh(np.random.default_rng(seed))
    M = assemble_mass(m, uniform(m, cv=cv))
    assert M.sum() == pytest.approx(cv * m.total_area(), rel=1e-12)
    x = m.nodes[:, 0]
    # exact for linear functions: integral of x
    centroid_x = (m.nodes[m.elements][:, :, 0].mean(axis=1) * m.areas).sum()
    assert np.ones(m.n_nodes) @ M @ x == pytest.approx(cv * centroid_x, rel=1e-9, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_linear_patch_test(seed, a, b):
    m = random_mesh(np.random.default_rng(seed))
    exact = lambda x, y: 1.0 + a * x + b * y
    system = assemble_system(m, uniform(m), BoundarySpec(adiabatic=set(m.boundaries)))
    nodes = np.unique(m.boundary_edges)
    s = LinearSystem(m, system.K, system.M, system.f, nodes, exact(*m.nodes[nodes].T))
    T = solve_steady(s).values
    scale = 1.0 + np.abs(exact(*m.nodes.T)).max()
    assert np.allclose(T, exact(*m.nodes.T), rtol=0, atol=1e-9 * scale)


def test_polar_conductivity_radial_flow():
    # a radial solution only sees the radial conductivity
    m = annulus_mesh(1.0, 2.0, level=2)
    table = MaterialTable({"domain": MaterialRegion(1.0, (3.0, 0.2))})
    bc = BoundarySpec(dirichlet={"inner": 10.0, "outer": 0.0})
    T = solve_steady(assemble_system(m, table, bc)).values
    r = np.hypot(*m.nodes.T)
    exact = 10.0 * np.log(2.0 / r) / math.log(2.0)
    assert np.abs(T - exact).max() < 0.05


def test_robin_matrix_totals():
    m = rectangle_mesh(2.0, 1.0, 4, 3)
    K, f = assemble_robin(m, "top", 5.0, 30.0)
    assert K.sum() == pytest.approx(5.0 * 2.0)
    assert f.sum() == pytest.approx(5.0 * 2.0 * 30.0)
    Kv, fv = assemble_robin_volume(m, "top", "domain", 5.0, 30.0)
    assert Kv.sum() == pytest.approx(10.0) and fv.sum() == pytest.approx(300.0)
    with pytest.raises(AssemblyError):
        assemble_robin(m, "top", 0.0)


def test_robin_from_conductance():
    m = annulus_mesh(0.5, 1.0, n_theta=24, n_radial=2)
    entry = robin_from_conductance(m, "inner", 0.7, 20.0)
    assert entry.h * edge_length(m, "inner") == pytest.approx(0.7)
    assert entry.reference == 20.0


def test_robin_only_steady_state_is_reference():
    m = rectangle_mesh(1.0, 1.0, 4, 4)
    bc = BoundarySpec(robin={"left": RobinEntry(3.0, 42.0)}, adiabatic={"right", "top", "bottom"})
    T = solve_steady(assemble_system(m, uniform(m), bc)).values
    assert np.allclose(T, 42.0)


def test_one_dimensional_robin_slab():
    # -T'' = 0, T(0) = 0 (left), T'(1) + h (T - Tr) = 0 (right): T = a x
    h, tr = 2.0, 9.0
    m = rectangle_mesh(1.0, 0.2, 6, 2)
    bc = BoundarySpec(dirichlet={"left": 0.0}, robin={"right": RobinEntry(h, tr)},
                      adiabatic={"top", "bottom"})
    system = assemble_system(m, uniform(m), bc)
    T = solve_steady(system).values
    a = h * tr / (1.0 + h)
    assert np.allclose(T, a * m.nodes[:, 0], atol=1e-10)
    bal = heat_balance(system, T)
    assert bal["robin_in"] == pytest.approx(a * 0.2)
    assert bal["residual"] < 1e-12


def test_heat_balance_with_source(machine_mesh):
    mat = fitted_defaults()
    bc = BoundarySpec(dirichlet={"jacket": 26.0}, adiabatic={"symmetry_cut"},
                      robin={"shaft_surface": robin_from_conductance(machine_mesh, "shaft_surface", 0.235, 20.0)})
    q = joule_source_from_power(200.0, machine_mesh, 0.1)
    system = assemble_system(machine_mesh, mat, bc, q)
    T = solve_steady(system).values
    bal = heat_balance(system, T)
    assert bal["source"] == pytest.approx(200.0 * 0.25 / 0.1, rel=1e-12)
    assert bal["residual"] < 1e-10
    # maximum principle: heating only raises temperatures above the coldest reference
    assert T.min() >= 20.0 - 1e-9


def test_cg_matches_direct(machine_mesh):
    K = assemble_stiffness(machine_mesh, fitted_defaults())
    A = (K + sp.identity(machine_mesh.n_nodes) * 1e-3).tocsc()
    b = np.random.default_rng(0).normal(size=machine_mesh.n_nodes)
    x_direct = SPDSolver(A, "direct").solve(b)
    x_cg = SPDSolver(A, "cg").solve(b)
    assert np.linalg.norm(x_cg - x_direct) <= 1e-6 * np.linalg.norm(x_direct)
    with pytest.raises(SolverError, match="unknown solver backend"):
        SPDSolver(A, "lu")


def test_singular_steady_problem():
    m = rectangle_mesh()
    with pytest.raises(SingularSystemError):
        solve_steady(assemble_system(m, uniform(m), BoundarySpec(adiabatic={"left", "right", "top", "bottom"})))


def test_boundary_spec_checks():
    m = rectangle_mesh()
    with pytest.raises(AssemblyError, match="both dirichlet and robin"):
        BoundarySpec(dirichlet={"left": 0.0}, robin={"left": RobinEntry(1.0)})
    with pytest.raises(AssemblyError, match="not in the mesh"):
        BoundarySpec(dirichlet={"nowhere": 0.0}).check_mesh(m)
    with pytest.warns(UserWarning, match="default to adiabatic"):
        BoundarySpec(dirichlet={"left": 0.0}).check_mesh(m)
    with pytest.raises(AssemblyError, match="robin_mode"):
        BoundarySpec(robin_mode="surface")


def test_conflicting_dirichlet_values():
    m = rectangle_mesh()
    with pytest.raises(AssemblyError, match="prescribed both"):
        assemble_system(m, uniform(m), BoundarySpec(dirichlet={"left": 0.0, "bottom": 1.0},
                                                     adiabatic={"right", "top"}))


def test_l2_error_of_interpolant():
    m = rectangle_mesh(1.0, 1.0, 8, 8)
    f = lambda x, y: 3.0 * x - y + 2.0
    assert l2_error(m, f(*m.nodes.T), f) < 1e-13
    assert l2_error(m, f(*m.nodes.T) + 1.0, f) == pytest.approx(1.0)


def test_exports(tmp_path):
    m = rectangle_mesh(1.0, 1.0, 2, 1)
    field = TemperatureField(m, np.arange(m.n_nodes, dtype=float))
    vtk = field_to_vtk(field).splitlines()
    assert vtk[0] == "# vtk DataFile Version 3.0"
    assert f"POINTS {m.n_nodes} double" in vtk
    assert f"CELLS {m.n_elements} {4 * m.n_elements}" in vtk
    assert vtk[-m.n_nodes:] == [repr(float(v)) for v in range(m.n_nodes)]
    rows = field_to_csv(field).splitlines()
    assert rows[0] == "node_id,x,y,T" and len(rows) == m.n_nodes + 1
    with pytest.raises(SolverError):
        TemperatureField(m, np.full(m.n_nodes, np.nan))
