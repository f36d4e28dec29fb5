import pytest

from machtherm.mesh.machine import MachineGeometry, build_machine_mesh, default_probes


@pytest.fixture(scope="session")
def geometry():
    return MachineGeometry()


@pytest.fixture(scope="session")
def machine_mesh(geometry):
    return build_machine_mesh(geometry, 1)


@pytest.fixture(scope="session")
def probes(geometry):
    return default_probes(geometry)
