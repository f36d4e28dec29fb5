"""Tagged linear-triangle mesh and point location."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from machtherm.errors import MeshError, ProbeOutsideError

# Region and boundary names used by the machine mesher.  Parsed meshes may
# declare any names; these are just the ones the rest of the package knows.
MACHINE_REGIONS = (
    "shaft",
    "rotor_yoke",
    "cage",
    "air_gap",
    "stator_yoke",
    "slot_insulation",
    "conductor_upper",
    "conductor_lower",
)
MACHINE_BOUNDARIES = ("jacket", "symmetry_cut", "shaft_surface")
CONDUCTOR_REGIONS = ("conductor_upper", "conductor_lower")


def signed_areas(nodes: NDArray, elements: NDArray) -> NDArray:
    p0, p1, p2 = (nodes[elements[:, k]] for k in range(3))
    return 0.5 * (
        (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
        - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    )


def _frozen(a, dtype, shape_tail):
    arr = np.array(a, dtype=dtype, copy=True).reshape((-1, *shape_tail))
    arr.setflags(write=False)
    return arr


def _edge_key(edges: NDArray, n_nodes: int) -> NDArray:
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    return lo.astype(np.int64) * n_nodes + hi


@dataclass(frozen=True, eq=False)
class Mesh:
    """Linear triangle mesh with region and boundary tags.

    Tags are integers; ``regions`` and ``boundaries`` map names to them and
    act as the tag registry.  ``boundary_edges`` lie on the outer boundary
    (one adjacent triangle each).  ``interface_edges`` are tagged interior
    edge sets such as the shaft surface, with triangles on both sides.

    Instances are immutable: the arrays are flagged read-only.
    """

    nodes: NDArray
    elements: NDArray
    element_region: NDArray
    regions: dict[str, int]
    boundary_edges: NDArray = field(default_factory=lambda: np.zeros((0, 2), int))
    boundary_tags: NDArray = field(default_factory=lambda: np.zeros(0, int))
    boundaries: dict[str, int] = field(default_factory=dict)
    interface_edges: NDArray = field(default_factory=lambda: np.zeros((0, 2), int))
    interface_tags: NDArray = field(default_factory=lambda: np.zeros(0, int))

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "nodes", _frozen(self.nodes, np.float64, (2,)))
        set_(self, "elements", _frozen(self.elements, np.int64, (3,)))
        set_(self, "element_region", _frozen(self.element_region, np.int64, ()))
        set_(self, "boundary_edges", _frozen(self.boundary_edges, np.int64, (2,)))
        set_(self, "boundary_tags", _frozen(self.boundary_tags, np.int64, ()))
        set_(self, "interface_edges", _frozen(self.interface_edges, np.int64, (2,)))
        set_(self, "interface_tags", _frozen(self.interface_tags, np.int64, ()))
        set_(self, "regions", dict(self.regions))
        set_(self, "boundaries", dict(self.boundaries))
        self._check()
        set_(self, "areas", signed_areas(self.nodes, self.elements))
        if np.any(self.areas <= 0.0):
            bad = int(np.argmin(self.areas))
            raise MeshError(f"element {bad} has non-positive signed area {self.areas[bad]:.3e}")
        self.areas.setflags(write=False)
        self._check_edges()
        set_(self, "edge_normals", self._outward_normals())

    # -- validation ---------------------------------------------------------

    def _check(self):
        n = len(self.nodes)
        if len(self.element_region) != len(self.elements):
            raise MeshError("element_region length differs from element count")
        if len(self.boundary_tags) != len(self.boundary_edges):
            raise MeshError("boundary_tags length differs from boundary edge count")
        if len(self.interface_tags) != len(self.interface_edges):
            raise MeshError("interface_tags length differs from interface edge count")
        for name, arr in (
            ("element", self.elements),
            ("boundary edge", self.boundary_edges),
            ("interface edge", self.interface_edges),
        ):
            if arr.size and (arr.min() < 0 or arr.max() >= n):
                raise MeshError(f"{name} references a node outside 0..{n - 1}")
        if not np.all(np.isfinite(self.nodes)):
            raise MeshError("non-finite node coordinate")
        known = set(self.regions.values())
        unknown = set(np.unique(self.element_region).tolist()) - known
        if unknown:
            raise MeshError(f"region tags {sorted(unknown)} missing from the registry")
        known = set(self.boundaries.values())
        used = set(np.unique(self.boundary_tags).tolist()) | set(
            np.unique(self.interface_tags).tolist()
        )
        if used - known:
            raise MeshError(f"boundary tags {sorted(used - known)} missing from the registry")

    def _check_edges(self):
        counts = self._adjacency()
        key_b = _edge_key(self.boundary_edges, len(self.nodes))
        key_i = _edge_key(self.interface_edges, len(self.nodes))
        for label, keys, want in (("boundary", key_b, 1), ("interface", key_i, 2)):
            got = np.array([counts.get(int(k), 0) for k in keys], dtype=int)
            if np.any(got != want):
                j = int(np.flatnonzero(got != want)[0])
                raise MeshError(
                    f"{label} edge {j} is adjacent to {got[j]} elements, expected {want}"
                )
        if len(self.boundary_edges):
            degree = np.bincount(self.boundary_edges.ravel(), minlength=len(self.nodes))
            if degree.max() > 2:
                raise MeshError("boundary edges branch: a node has more than two boundary edges")

    def _adjacency(self) -> dict[int, int]:
        keys = self._element_edge_keys()
        uniq, counts = np.unique(keys, return_counts=True)
        return dict(zip(uniq.tolist(), counts.tolist()))

    def _element_edge_keys(self) -> NDArray:
        e = self.elements
        edges = np.concatenate([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 0]]])
        return _edge_key(edges, len(self.nodes))

    def _outward_normals(self) -> NDArray:
        if not len(self.boundary_edges):
            out = np.zeros((0, 2))
            out.setflags(write=False)
            return out
        keys = self._element_edge_keys()
        owner = np.tile(np.arange(len(self.elements)), 3)
        lookup = dict(zip(keys.tolist(), owner.tolist()))
        bkeys = _edge_key(self.boundary_edges, len(self.nodes))
        elem = np.array([lookup[int(k)] for k in bkeys])
        a = self.nodes[self.boundary_edges[:, 0]]
        b = self.nodes[self.boundary_edges[:, 1]]
        d = b - a
        normal = np.column_stack([d[:, 1], -d[:, 0]])
        normal /= np.linalg.norm(normal, axis=1)[:, None]
        away = 0.5 * (a + b) - self.centroids()[elem]
        flip = np.einsum("ij,ij->i", normal, away) < 0
        normal[flip] *= -1
        normal.setflags(write=False)
        return normal

    # -- queries ------------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def centroids(self) -> NDArray:
        return self.nodes[self.elements].mean(axis=1)

    def total_area(self) -> float:
        return float(self.areas.sum())

    def region_names(self) -> list[str]:
        present = set(np.unique(self.element_region).tolist())
        return [name for name, tag in self.regions.items() if tag in present]

    def region_mask(self, name: str) -> NDArray:
        if name not in self.regions:
            raise MeshError(f"unknown region {name!r}")
        return self.element_region == self.regions[name]

    def region_area(self, name: str) -> float:
        return float(self.areas[self.region_mask(name)].sum())

    def edges(self, name: str) -> NDArray:
        """Boundary or interface edges carrying the tag ``name``."""
        if name not in self.boundaries:
            raise MeshError(f"unknown boundary tag {name!r}")
        tag = self.boundaries[name]
        return np.concatenate(
            [self.boundary_edges[self.boundary_tags == tag],
             self.interface_edges[self.interface_tags == tag]]
        )

    def edge_nodes(self, name: str) -> NDArray:
        return np.unique(self.edges(name))

    def free_edges(self) -> NDArray:
        """Edges adjacent to exactly one element, tagged or not."""
        e = self.elements
        edges = np.concatenate([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 0]]])
        keys = _edge_key(edges, len(self.nodes))
        uniq, first, counts = np.unique(keys, return_index=True, return_counts=True)
        return edges[first[counts == 1]]

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            self.regions == other.regions
            and self.boundaries == other.boundaries
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in (
                    "nodes", "elements", "element_region", "boundary_edges",
                    "boundary_tags", "interface_edges", "interface_tags",
                )
            )
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"Mesh(nodes={self.n_nodes}, elements={self.n_elements}, "
            f"boundary_edges={len(self.boundary_edges)}, "
            f"interface_edges={len(self.interface_edges)})"
        )


def reorient(nodes, elements):
    """Return ``elements`` with clockwise triangles flipped, and the flip mask."""
    elements = np.array(elements, dtype=np.int64).reshape(-1, 3)
    cw = signed_areas(np.asarray(nodes, float), elements) < 0
    if np.any(cw):
        elements[cw] = elements[cw][:, [0, 2, 1]]
        warnings.warn(f"reoriented {int(cw.sum())} clockwise triangle(s)", stacklevel=3)
    return elements, cw


@dataclass(frozen=True)
class ProbeLocation:
    point: tuple[float, float]
    element: int
    barycentric: tuple[float, float, float]

    def weights(self, mesh: Mesh) -> tuple[NDArray, NDArray]:
        """Node indices and interpolation weights."""
        return mesh.elements[self.element].copy(), np.asarray(self.barycentric)


def barycentric(mesh: Mesh, point) -> NDArray:
    """Barycentric coordinates of ``point`` with respect to every element."""
    x, y = float(point[0]), float(point[1])
    p = mesh.nodes[mesh.elements]
    x1, y1 = p[:, 0, 0], p[:, 0, 1]
    x2, y2 = p[:, 1, 0], p[:, 1, 1]
    x3, y3 = p[:, 2, 0], p[:, 2, 1]
    det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
    l1 = ((y2 - y3) * (x - x3) + (x3 - x2) * (y - y3)) / det
    l2 = ((y3 - y1) * (x - x3) + (x1 - x3) * (y - y3)) / det
    return np.column_stack([l1, l2, 1.0 - l1 - l2])


def _segment_distance(point, a, b):
    p = np.asarray(point, float)
    d = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    return np.linalg.norm(a + t[:, None] * d - p, axis=1)


def locate_probe(mesh: Mesh, point, tol: float = 1e-10) -> ProbeLocation:
    """Find the element containing ``point`` and its barycentric coordinates.

    Points within ``tol`` metres outside the mesh are accepted and snapped
    onto the nearest element.  Otherwise :class:`ProbeOutsideError` is raised
    carrying the distance to the nearest boundary edge.
    """
    lam = barycentric(mesh, point)
    worst = lam.min(axis=1)
    k = int(np.argmax(worst))
    if worst[k] < 0:
        free = mesh.free_edges()
        dist = _segment_distance(point, mesh.nodes[free[:, 0]], mesh.nodes[free[:, 1]]).min()
        if dist > tol:
            raise ProbeOutsideError(point, dist)
    coords = np.clip(lam[k], 0.0, None)
    coords /= coords.sum()
    return ProbeLocation(
        point=(float(point[0]), float(point[1])),
        element=k,
        barycentric=tuple(float(c) for c in coords),
    )


def interpolate(mesh: Mesh, probe: ProbeLocation, values: NDArray) -> float:
    idx, w = probe.weights(mesh)
    return float(np.dot(w, np.asarray(values)[idx]))
