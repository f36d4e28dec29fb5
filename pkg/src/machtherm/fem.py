"""Linear-triangle discretisation of the heat equation.

    c_v dT/dt - div(lambda grad T) = q     in the domain
    T = T_iso                             on Dirichlet edges
    -lambda dT/dn = 0                     on adiabatic edges
    lambda dT/dn + h (T - T_ref) = 0      on Robin edges

All quantities are per metre of axial length: W/m, J/(m K) and so on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from machtherm.errors import AssemblyError, SingularSystemError, SolverError
from machtherm.materials import MaterialTable, element_properties
from machtherm.mesh.core import Mesh

Value = Union[float, Callable[[float], float]]

RTOL = 1e-10


def value_at(value: Value, t: float = 0.0) -> float:
    return float(value(t)) if callable(value) else float(value)


@dataclass(frozen=True)
class RobinEntry:
    h: float
    reference: Value = 26.0

    def __post_init__(self):
        if not self.h > 0:
            raise AssemblyError(f"Robin coefficient must be positive, got {self.h}")


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary conditions by tag.

    ``robin_mode`` chooses where a Robin entry acts: ``"edge"`` integrates
    over the tagged edge set, ``"volume"`` spreads the same total
    conductance ``h * length`` uniformly over ``robin_volume_region``.
    """

    dirichlet: dict[str, Value] = field(default_factory=dict)
    adiabatic: frozenset[str] = frozenset()
    robin: dict[str, RobinEntry] = field(default_factory=dict)
    robin_mode: str = "edge"
    robin_volume_region: str = "shaft"

    def __post_init__(self):
        object.__setattr__(self, "adiabatic", frozenset(self.adiabatic))
        seen = {}
        for category, tags in (("dirichlet", self.dirichlet), ("adiabatic", self.adiabatic),
                               ("robin", self.robin)):
            for tag in tags:
                if tag in seen:
                    raise AssemblyError(f"boundary tag {tag!r} is both {seen[tag]} and {category}")
                seen[tag] = category
        if self.robin_mode not in ("edge", "volume"):
            raise AssemblyError(f"robin_mode must be 'edge' or 'volume', not {self.robin_mode!r}")

    def check_mesh(self, mesh: Mesh) -> None:
        listed = set(self.dirichlet) | set(self.adiabatic) | set(self.robin)
        unknown = listed - set(mesh.boundaries)
        if unknown:
            raise AssemblyError(f"boundary tags {sorted(unknown)} are not in the mesh")
        used = set(np.unique(mesh.boundary_tags).tolist())
        unlisted = [n for n, t in mesh.boundaries.items() if t in used and n not in listed]
        if unlisted:
            warnings.warn(f"boundary tags {unlisted} default to adiabatic", stacklevel=2)


def edge_length(mesh: Mesh, tag: str) -> float:
    edges = mesh.edges(tag)
    return float(np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1).sum())


def robin_from_conductance(mesh: Mesh, tag: str, conductance: float,
                           reference: Value = 26.0) -> RobinEntry:
    """Robin entry whose total conductance per axial metre is ``conductance``.

    The conductance (W/K per metre of machine length) is spread evenly over
    the tagged edges, so the surface coefficient is ``conductance / length``.
    """
    length = edge_length(mesh, tag)
    if length <= 0:
        raise AssemblyError(f"boundary tag {tag!r} has no edges")
    return RobinEntry(conductance / length, reference)


# -- element-level pieces ----------------------------------------------------


def gradients(mesh: Mesh) -> NDArray:
    """Gradients of the three hat functions per element, shape ``(E, 2, 3)``."""
    p = mesh.nodes[mesh.elements]
    x, y = p[:, :, 0], p[:, :, 1]
    two_a = 2.0 * mesh.areas
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    return np.stack([gx, gy], axis=1) / two_a[:, None, None]


def _scatter(mesh: Mesh, blocks: NDArray, conn: NDArray | None = None) -> sp.csr_matrix:
    conn = mesh.elements if conn is None else conn
    k = conn.shape[1]
    rows = np.repeat(conn, k, axis=1).ravel()
    cols = np.tile(conn, (1, k)).ravel()
    n = mesh.n_nodes
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def stiffness_blocks(mesh: Mesh, conductivity: NDArray) -> NDArray:
    g = gradients(mesh)
    return mesh.areas[:, None, None] * np.einsum("eki,ekl,elj->eij", g, conductivity, g)


def assemble_stiffness(mesh: Mesh, materials: MaterialTable) -> sp.csr_matrix:
    _, lam = element_properties(materials, mesh)
    return _scatter(mesh, stiffness_blocks(mesh, lam))


_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def mass_blocks(mesh: Mesh, heat_capacity: NDArray) -> NDArray:
    return (heat_capacity * mesh.areas)[:, None, None] * _MASS_REF


def assemble_mass(mesh: Mesh, materials: MaterialTable) -> sp.csr_matrix:
    cv, _ = element_properties(materials, mesh)
    return _scatter(mesh, mass_blocks(mesh, cv))


def assemble_robin(mesh: Mesh, tag: str, h: float, reference: float = 0.0):
    """Edge integrals of ``h T v`` and ``h T_ref v`` over the tagged edges."""
    if not h > 0:
        raise AssemblyError(f"Robin coefficient must be positive, got {h}")
    edges = mesh.edges(tag)
    length = np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1)
    ref = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    K = _scatter(mesh, (h * length)[:, None, None] * ref, edges)
    f = np.zeros(mesh.n_nodes)
    np.add.at(f, edges.ravel(), np.repeat(0.5 * h * reference * length, 2))
    return K, f


def assemble_robin_volume(mesh: Mesh, tag: str, region: str, h: float, reference: float = 0.0):
    """Robin conductance ``h * |edges|`` spread uniformly over ``region``."""
    if not h > 0:
        raise AssemblyError(f"Robin coefficient must be positive, got {h}")
    edges = mesh.edges(tag)
    length = np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1).sum()
    mask = mesh.region_mask(region)
    area = mesh.areas[mask].sum()
    if area <= 0:
        raise AssemblyError(f"region {region!r} is empty")
    rate = h * length / area
    weight = np.where(mask, rate, 0.0)
    K = _scatter(mesh, mass_blocks(mesh, weight))
    f = np.zeros(mesh.n_nodes)
    np.add.at(f, mesh.elements.ravel(), np.repeat(weight * reference * mesh.areas / 3.0, 3))
    return K, f


def assemble_load(mesh: Mesh, sources: dict[str, float]) -> NDArray:
    """Nodal load of piecewise-constant volumetric sources (W/m^3)."""
    q = np.zeros(mesh.n_elements)
    for region, value in sources.items():
        if region not in mesh.regions:
            raise AssemblyError(f"source references unknown region {region!r}")
        if not math.isfinite(value):
            raise AssemblyError(f"source in {region!r} is not finite")
        q[mesh.region_mask(region)] = value
    f = np.zeros(mesh.n_nodes)
    np.add.at(f, mesh.elements.ravel(), np.repeat(q * mesh.areas / 3.0, 3))
    return f


def assemble_load_function(mesh: Mesh, source: Callable) -> NDArray:
    """Load of a spatially varying source ``source(x, y)``; edge-midpoint rule."""
    p = mesh.nodes[mesh.elements]
    mids = 0.5 * (p + np.roll(p, -1, axis=1))  # midpoints of edges (0,1), (1,2), (2,0)
    q = source(mids[..., 0], mids[..., 1])
    # node i touches the midpoints of edges i and i-1 with value 1/2
    contrib = 0.5 * (q + np.roll(q, 1, axis=1)) * (mesh.areas / 3.0)[:, None]
    f = np.zeros(mesh.n_nodes)
    np.add.at(f, mesh.elements.ravel(), contrib.ravel())
    return f


# -- systems -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearSystem:
    mesh: Mesh
    K: sp.csr_matrix
    M: sp.csr_matrix
    f: NDArray
    fixed_nodes: NDArray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fixed_values: NDArray = field(default_factory=lambda: np.zeros(0))
    robin_K: sp.csr_matrix | None = None
    robin_f: NDArray | None = None

    @property
    def free_nodes(self) -> NDArray:
        mask = np.ones(self.mesh.n_nodes, dtype=bool)
        mask[self.fixed_nodes] = False
        return np.flatnonzero(mask)

    def constrained(self) -> bool:
        if len(self.fixed_nodes):
            return True
        scale = abs(self.K).max() if self.K.nnz else 0.0
        return bool(np.abs(self.K @ np.ones(self.mesh.n_nodes)).max() > 1e-12 * max(scale, 1e-300))


def apply_dirichlet(system: LinearSystem, tag: str, value: float) -> LinearSystem:
    """Fix the nodes of ``tag`` to ``value``; eliminated symmetrically at solve time."""
    nodes = system.mesh.edge_nodes(tag)
    fixed = dict(zip(system.fixed_nodes.tolist(), system.fixed_values.tolist()))
    for n in nodes.tolist():
        if n in fixed and fixed[n] != value:
            raise AssemblyError(
                f"node {n} is prescribed both {fixed[n]} and {value} (tag {tag!r})"
            )
        fixed[n] = float(value)
    order = np.array(sorted(fixed), dtype=np.int64)
    return LinearSystem(
        system.mesh, system.K, system.M, system.f,
        order, np.array([fixed[n] for n in order.tolist()]),
        system.robin_K, system.robin_f,
    )


def assemble_system(mesh: Mesh, materials: MaterialTable, boundary: BoundarySpec,
                    sources: dict[str, float] | None = None, t: float = 0.0) -> LinearSystem:
    """Stiffness, mass, load and constraints for the state at time ``t``."""
    boundary.check_mesh(mesh)
    K = assemble_stiffness(mesh, materials)
    M = assemble_mass(mesh, materials)
    f = assemble_load(mesh, sources or {})
    rK, rf = robin_terms(mesh, boundary, t)
    system = LinearSystem(mesh, K + rK, M, f + rf, robin_K=rK, robin_f=rf)
    for tag, value in boundary.dirichlet.items():
        system = apply_dirichlet(system, tag, value_at(value, t))
    return system


def robin_terms(mesh: Mesh, boundary: BoundarySpec, t: float = 0.0):
    K = sp.csr_matrix((mesh.n_nodes, mesh.n_nodes))
    f = np.zeros(mesh.n_nodes)
    for tag, entry in boundary.robin.items():
        ref = value_at(entry.reference, t)
        if boundary.robin_mode == "edge":
            k, g = assemble_robin(mesh, tag, entry.h, ref)
        else:
            k, g = assemble_robin_volume(mesh, tag, boundary.robin_volume_region, entry.h, ref)
        K, f = K + k, f + g
    return K, f


class SPDSolver:
    """Solve ``A x = b`` for one fixed SPD matrix, many right-hand sides.

    ``backend="direct"`` factorises once with SuperLU; ``"cg"`` runs
    Jacobi-preconditioned conjugate gradients to relative residual ``rtol``.
    """

    def __init__(self, A: sp.spmatrix, backend: str = "direct", rtol: float = RTOL):
        self.A = sp.csc_matrix(A)
        self.backend = backend
        self.rtol = rtol
        if backend == "direct":
            try:
                self._lu = spla.splu(self.A)
            except RuntimeError as exc:
                raise SingularSystemError(f"factorisation failed: {exc}") from None
        elif backend == "cg":
            d = self.A.diagonal()
            if np.any(d <= 0):
                raise SingularSystemError("matrix has a non-positive diagonal entry")
            self._precond = sp.diags(1.0 / d)
        else:
            raise SolverError(f"unknown solver backend {backend!r}")

    def solve(self, b: NDArray, x0: NDArray | None = None) -> NDArray:
        if self.backend == "direct":
            x = self._lu.solve(b)
        else:
            x, info = spla.cg(self.A, b, x0=x0, rtol=self.rtol, atol=0.0,
                              M=self._precond, maxiter=10 * self.A.shape[0])
            if info != 0:
                raise SolverError(f"conjugate gradients did not converge (info={info})")
        if not np.all(np.isfinite(x)):
            raise SolverError("solution contains non-finite values")
        return x


@dataclass(frozen=True, eq=False)
class TemperatureField:
    mesh: Mesh
    values: NDArray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.n_nodes,):
            raise SolverError(f"field has {v.shape} values for {self.mesh.n_nodes} nodes")
        if not np.all(np.isfinite(v)):
            raise SolverError("temperature field has non-finite values")
        object.__setattr__(self, "values", v)


def solve_steady(system: LinearSystem, backend: str = "direct") -> TemperatureField:
    """Solve ``K T = f`` with the Dirichlet nodes eliminated."""
    if not system.constrained():
        raise SingularSystemError(
            "system has neither Dirichlet nodes nor Robin terms; steady state is undetermined"
        )
    n = system.mesh.n_nodes
    T = np.zeros(n)
    T[system.fixed_nodes] = system.fixed_values
    free = system.free_nodes
    if len(free):
        K = system.K.tocsr()
        Kff = K[free][:, free]
        b = system.f[free] - K[free][:, system.fixed_nodes] @ system.fixed_values
        T[free] = SPDSolver(Kff, backend).solve(b)
        res = Kff @ T[free] - b
        scale = max(np.linalg.norm(b), np.linalg.norm(Kff @ T[free]), 1e-300)
        if np.linalg.norm(res) > 1e-8 * scale:
            raise SolverError(f"steady solve residual {np.linalg.norm(res) / scale:.2e} too large")
    return TemperatureField(system.mesh, T)


def heat_balance(system: LinearSystem, T: NDArray) -> dict[str, float]:
    """Steady heat flows in W/m: source, Robin influx, Dirichlet outflow.

    ``residual`` is ``source + robin_in - dirichlet_out`` relative to the
    largest flow.
    """
    reaction = system.K @ T - system.f
    robin_in = 0.0
    if system.robin_K is not None:
        robin_in = float(system.robin_f.sum() - (system.robin_K @ T).sum())
    source = float(system.f.sum()) - (float(system.robin_f.sum()) if system.robin_f is not None else 0.0)
    out = -float(reaction[system.fixed_nodes].sum())
    # inflow and outflow through Dirichlet nodes can cancel; scale by both
    scale = max(abs(source), abs(robin_in), float(np.abs(reaction[system.fixed_nodes]).sum()), 1e-300)
    return {
        "source": source,
        "robin_in": robin_in,
        "dirichlet_out": out,
        "residual": abs(source + robin_in - out) / scale,
    }


# -- error norms -------------------------------------------------------------

# degree-4 rule on the reference triangle (barycentric points, weights sum to 1)
_Q_A, _Q_B = 0.445948490915965, 0.091576213509771
_Q_W1, _Q_W2 = 0.223381589678011, 0.109951743655322
_QUAD = np.array([
    [_Q_A, _Q_A, 1 - 2 * _Q_A], [_Q_A, 1 - 2 * _Q_A, _Q_A], [1 - 2 * _Q_A, _Q_A, _Q_A],
    [_Q_B, _Q_B, 1 - 2 * _Q_B], [_Q_B, 1 - 2 * _Q_B, _Q_B], [1 - 2 * _Q_B, _Q_B, _Q_B],
])
_QUAD_W = np.array([_Q_W1] * 3 + [_Q_W2] * 3)


def l2_error(mesh: Mesh, values: NDArray, exact: Callable) -> float:
    """L2 norm of ``u_h - exact`` with a degree-4 quadrature."""
    p = mesh.nodes[mesh.elements]
    pts = np.einsum("qk,ekd->eqd", _QUAD, p)
    uh = np.einsum("qk,ek->eq", _QUAD, np.asarray(values)[mesh.elements])
    err = (uh - exact(pts[..., 0], pts[..., 1])) ** 2
    return float(math.sqrt(np.sum(err @ _QUAD_W * mesh.areas)))


# -- export ------------------------------------------------------------------


def field_to_vtk(field: TemperatureField, title: str = "temperature") -> str:
    """Legacy VTK ASCII unstructured grid with nodal temperatures."""
    mesh = field.mesh
    out = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {mesh.n_nodes} double"]
    out += [f"{x!r} {y!r} 0" for x, y in mesh.nodes.tolist()]
    out.append(f"CELLS {mesh.n_elements} {4 * mesh.n_elements}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.elements.tolist()]
    out.append(f"CELL_TYPES {mesh.n_elements}")
    out += ["5"] * mesh.n_elements
    out += [f"CELL_DATA {mesh.n_elements}", "SCALARS region int 1", "LOOKUP_TABLE default"]
    out += [str(r) for r in mesh.element_region.tolist()]
    out += [f"POINT_DATA {mesh.n_nodes}", "SCALARS temperature_C double 1", "LOOKUP_TABLE default"]
    out += [repr(v) for v in field.values.tolist()]
    return "\n".join(out) + "\n"


def field_to_csv(field: TemperatureField) -> str:
    rows = ["node_id,x,y,T"]
    rows += [f"{i},{x!r},{y!r},{t!r}" for i, ((x, y), t)
             in enumerate(zip(field.mesh.nodes.tolist(), field.values.tolist()))]
    return "\n".join(rows) + "\n"
