import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from machtherm.errors import MaterialError
from machtherm.materials import (
    FITTED, LITERATURE, USER, MaterialRegion, MaterialTable, element_properties, fitted_defaults,
    literature_defaults, polar_to_cartesian, resolve,
)
from machtherm.mesh.generate import rectangle_mesh


def test_literature_values():
    lit = literature_defaults()
    assert lit["stator_yoke"].conductivity == 40.0
    assert lit["stator_yoke"].conductivity_z == 2.5
    assert lit["stator_yoke"].heat_capacity == 3.925e6
    assert lit["conductor_upper"].conductivity == 398.0
    assert lit["conductor_lower"].heat_capacity == 3.435e6
    assert lit["slot_insulation"].conductivity == 0.7
    assert lit["slot_insulation"].heat_capacity == 7.905e6
    assert lit["air_gap"].conductivity == 0.026
    assert lit["air_gap"].heat_capacity == 1.210e3
    assert lit["shaft"].conductivity == 59.6
    assert lit["shaft"].heat_capacity == 3.777e6
    assert lit.provenance["shaft"] == LITERATURE
    assert lit.provenance["cage"] == USER
    assert lit.robin_h is None


def test_fitted_values():
    fit = fitted_defaults()
    assert fit["stator_yoke"].conductivity_eff == 24.0
    assert fit["rotor_yoke"].conductivity_eff == 16.0
    assert fit["air_gap"].conductivity_eff == 0.052
    assert fit["shaft"].conductivity_eff == 59.6
    assert fit.robin_h == 0.235
    assert fit.provenance["stator_yoke"] == FITTED
    # capacities are not fitted
    assert fit["stator_yoke"].heat_capacity == literature_defaults()["stator_yoke"].heat_capacity


@pytest.mark.parametrize("kwargs", [
    {"heat_capacity": 0.0, "conductivity": 1.0},
    {"heat_capacity": 1.0, "conductivity": -1.0},
    {"heat_capacity": 1.0, "conductivity": (1.0, 0.0)},
    {"heat_capacity": 1.0, "conductivity": (1.0, 2.0, 3.0)},
    {"heat_capacity": 1.0, "conductivity": math.inf},
    {"heat_capacity": 1.0, "conductivity": 1.0, "conductivity_eff": 0.0},
])
def test_invalid_regions(kwargs):
    with pytest.raises(MaterialError):
        MaterialRegion(**kwargs)


@given(st.floats(0.1, 100), st.floats(0.1, 100), st.floats(-math.pi, math.pi))
def test_polar_tensor_eigenvectors(rad, tan, phi):
    p = (math.cos(phi), math.sin(phi))
    lam = polar_to_cartesian(rad, tan, p)
    assert np.allclose(lam, lam.T)
    assert np.allclose(lam @ p, rad * np.array(p))
    assert np.allclose(lam @ (-p[1], p[0]), tan * np.array((-p[1], p[0])))


def test_effective_conductivity_wins():
    table = MaterialTable({"d": MaterialRegion(1.0, (5.0, 1.0), conductivity_eff=3.0)})
    _, lam = resolve(table, "d", (0.0, 1.0))
    assert np.array_equal(lam, 3.0 * np.eye(2))
    assert not table["d"].anisotropic


def test_element_properties_and_missing_region():
    m = rectangle_mesh()
    cv, lam = element_properties(MaterialTable({"domain": MaterialRegion(2.0, 7.0)}), m)
    assert np.all(cv == 2.0) and np.allclose(lam, 7.0 * np.eye(2))
    with pytest.raises(MaterialError, match="no material for mesh regions"):
        element_properties(MaterialTable({"other": MaterialRegion(1.0, 1.0)}), m)


def test_orphan_entry_warns():
    m = rectangle_mesh()
    table = MaterialTable({"domain": MaterialRegion(1.0, 1.0), "ghost": MaterialRegion(1.0, 1.0)})
    with pytest.warns(UserWarning, match="ghost"):
        table.check_mesh(m)


def test_csv_dump():
    rows = list(csv.DictReader(io.StringIO(fitted_defaults().to_csv())))
    by_region = {r["region"]: r for r in rows}
    assert float(by_region["rotor_yoke"]["conductivity_eff_W_mC"]) == 16.0
    assert float(by_region["rotor_yoke"]["conductivity_W_mC"]) == 40.0
    assert float(by_region["shaft_surface(h)"]["conductivity_W_mC"]) == 0.235
    assert by_region["cage"]["provenance"] == USER
