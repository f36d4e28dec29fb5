"""Parametric quarter cross-section of a slotted induction machine.

The rotor side (shaft, rotor yoke, cage band, air gap) is a stack of
concentric rings, triangulated ring to ring.  The stator is meshed as a
conforming Delaunay triangulation: slot walls, conductor circles, the bore
arc, the cut lines and the jacket arc are inserted as constraint chains, the
remaining space is filled with graded lattice points kept clear of every
constraint segment, and any constraint edge missing from the triangulation
is split at its midpoint until all of them appear.

The default dimensions below are plausible values for a 3.7 kW four-pole
machine.  Only the slot count, conductors per slot and conductor radius are
measured data; the radii, slot size and axial length are invented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from machtherm.errors import GeometryError
from machtherm.mesh.core import MACHINE_BOUNDARIES, MACHINE_REGIONS, Mesh
from machtherm.mesh.generate import RingStack

REGION_IDS = {name: k for k, name in enumerate(MACHINE_REGIONS, start=1)}
BOUNDARY_IDS = {name: k for k, name in enumerate(MACHINE_BOUNDARIES, start=1)}

QUARTER = math.pi / 2
# arcs get at least this many segments per quarter turn at level 1; keeps the
# chord sagitta below radius/103
ARC_SEGMENTS = 6
CONDUCTOR_SEGMENTS = 8
GRADING = 0.4


@dataclass(frozen=True)
class MachineGeometry:
    """Cross-section dimensions in metres.

    The cage is modelled as the annular band between
    ``rotor_yoke_outer_radius`` and the rotor surface at
    ``stator_inner_radius - air_gap_thickness``.  Slots are closed
    rectangles starting ``slot_offset`` behind the bore, one per
    ``2*pi/slot_count``, centred half a pitch away from the symmetry cuts.
    ``mesh_size`` and ``slot_mesh_size`` are the level-1 element sizes in
    the iron and inside the slots.
    """

    shaft_radius: float = 0.016
    rotor_yoke_outer_radius: float = 0.042
    air_gap_thickness: float = 0.0003
    stator_inner_radius: float = 0.050
    stator_outer_radius: float = 0.085
    slot_count: int = 36
    conductors_per_slot: int = 18
    conductor_radius: float = 0.00075
    slot_width: float = 0.0058
    slot_depth: float = 0.013
    slot_offset: float = 0.001
    model_fraction: float = 0.25
    mesh_size: float = 0.0025
    slot_mesh_size: float = 0.0006

    @property
    def rotor_outer_radius(self) -> float:
        return self.stator_inner_radius - self.air_gap_thickness

    @property
    def slot_start_radius(self) -> float:
        return self.stator_inner_radius + self.slot_offset

    @property
    def slots_in_model(self) -> int:
        return self.slot_count // 4

    def as_dict(self) -> dict:
        return asdict(self)

    def slot_angles(self) -> np.ndarray:
        pitch = 2 * math.pi / self.slot_count
        return (np.arange(self.slots_in_model) + 0.5) * pitch

    def slot_frame(self, k):
        """Origin, radial unit vector and tangential unit vector of slot ``k``."""
        phi = self.slot_angles()[k]
        er = np.array([math.cos(phi), math.sin(phi)])
        et = np.array([-math.sin(phi), math.cos(phi)])
        return self.slot_start_radius * er, er, et

    def slot_corners(self, k) -> np.ndarray:
        o, er, et = self.slot_frame(k)
        w, d = self.slot_width / 2, self.slot_depth
        local = [(0, -w), (d, -w), (d, w), (0, w)]
        return np.array([o + u * er + v * et for u, v in local])

    def layer_counts(self) -> tuple[int, int]:
        upper = math.ceil(self.conductors_per_slot / 2)
        return upper, self.conductors_per_slot - upper

    def conductor_layout(self) -> list[tuple[float, float, str]]:
        """Slot-local ``(u, v, region)`` of every conductor centre.

        ``u`` runs from the slot opening towards the yoke, ``v`` across the
        slot.  The upper layer fills the half next to the bore.
        """
        rc, w, d = self.conductor_radius, self.slot_width, self.slot_depth
        clearance = 0.2 * rc
        max_cols = math.floor((w - clearance) / (2 * rc + clearance))
        if max_cols < 1 and self.conductors_per_slot:
            raise GeometryError(
                f"slot width {w:.4g} m cannot hold a conductor of radius {rc:.4g} m"
            )
        layout = []
        for (n, region), u0 in zip(
            zip(self.layer_counts(), ("conductor_upper", "conductor_lower")), (0.0, d / 2)
        ):
            if n == 0:
                continue
            cols = min(max_cols, n)
            rows = math.ceil(n / cols)
            if rows * 2 * rc + (rows + 1) * clearance > d / 2 + 1e-15:
                raise GeometryError(
                    f"slot depth {d:.4g} m is too small: each layer needs {rows} rows "
                    f"of conductors of radius {rc:.4g} m"
                )
            gap_u = (d / 2 - rows * 2 * rc) / (rows + 1)
            placed = 0
            for row in range(rows):
                in_row = min(cols, n - placed)
                gap_v = (w - in_row * 2 * rc) / (in_row + 1)
                u = u0 + gap_u + rc + row * (2 * rc + gap_u)
                for c in range(in_row):
                    v = -w / 2 + gap_v + rc + c * (2 * rc + gap_v)
                    layout.append((u, v, region))
                placed += in_row
        return layout

    def conductors(self) -> list[tuple[np.ndarray, str]]:
        """Global centre and region of every conductor in the model."""
        out = []
        for k in range(self.slots_in_model):
            o, er, et = self.slot_frame(k)
            for u, v, region in self.conductor_layout():
                out.append((o + u * er + v * et, region))
        return out

    def validate(self) -> None:
        radii = [
            ("shaft_radius", self.shaft_radius),
            ("rotor_yoke_outer_radius", self.rotor_yoke_outer_radius),
            ("rotor outer radius (stator_inner_radius - air_gap_thickness)",
             self.rotor_outer_radius),
            ("stator_inner_radius", self.stator_inner_radius),
            ("stator_outer_radius", self.stator_outer_radius),
        ]
        if self.shaft_radius <= 0:
            raise GeometryError("shaft_radius must be positive")
        for (n0, r0), (n1, r1) in zip(radii, radii[1:]):
            if not r1 > r0:
                raise GeometryError(f"radii must increase: {n0}={r0:.4g} m >= {n1}={r1:.4g} m")
        if self.model_fraction != 0.25:
            raise GeometryError("only quarter models (model_fraction=0.25) are supported")
        if self.slot_count < 4 or self.slot_count % 4:
            raise GeometryError(f"slot_count={self.slot_count} must be a positive multiple of 4")
        if self.conductors_per_slot < 0 or self.conductor_radius <= 0:
            raise GeometryError("conductor count must be >= 0 and conductor radius positive")
        for name in ("slot_width", "slot_depth", "slot_offset", "mesh_size", "slot_mesh_size"):
            if getattr(self, name) <= 0:
                raise GeometryError(f"{name} must be positive")
        r_end = math.hypot(self.slot_start_radius + self.slot_depth, self.slot_width / 2)
        if r_end >= self.stator_outer_radius:
            raise GeometryError(
                f"slots exceed the stator annulus: slot bottom corner at r={r_end:.4g} m "
                f"reaches stator_outer_radius={self.stator_outer_radius:.4g} m"
            )
        corners = [self.slot_corners(k) for k in range(self.slots_in_model)]
        tooth = corners[0][0][1]  # distance of the first slot from the x axis cut
        if tooth <= 0:
            raise GeometryError("slots overlap the symmetry cut: slot_width too large for the pitch")
        for a, b in zip(corners, corners[1:]):
            if np.linalg.norm(a[3] - b[0]) <= 0 or _cross(a[0], a[3], b[0]) <= 0:
                raise GeometryError("neighbouring slots overlap: slot_width too large for the pitch")
        self.conductor_layout()


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


# ---------------------------------------------------------------------------
# helpers


def _points_in_polygon(points, poly):
    """Even-odd test of many points against one closed polygon."""
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    px, py = poly[:, 0], poly[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    for x0, y0, x1, y1 in zip(px, py, qx, qy):
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xint)
    return inside


def _hex_lattice(xmin, xmax, ymin, ymax, s):
    dy = s * math.sqrt(3) / 2
    ys = np.arange(ymin, ymax + dy, dy)
    rows = []
    for j, y in enumerate(ys):
        xs = np.arange(xmin + (0.5 * s if j % 2 else 0.0), xmax + s, s)
        rows.append(np.column_stack([xs, np.full(len(xs), y)]))
    return np.concatenate(rows)


def _subdivide(a, b, size, minimum=1):
    """Points from ``a`` to ``b`` (inclusive) spaced by the size function."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    t = np.linspace(0.0, 1.0, 201)
    pts = a + t[:, None] * (b - a)
    density = np.linalg.norm(b - a) / size(pts)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(t))])
    n = max(minimum, math.ceil(cum[-1] - 1e-9))
    ts = np.interp(np.arange(n + 1) * cum[-1] / n, cum, t)
    out = a + ts[:, None] * (b - a)
    out[0], out[-1] = a, b
    return out


class _Chains:
    """Constraint chains: ordered point lists whose consecutive pairs must
    appear as mesh edges."""

    def __init__(self):
        self.points = []
        self.chains = []  # (indices, closed, splittable)

    def add(self, pts, closed=False, splittable=True, indices=None):
        idx = []
        for k, p in enumerate(pts):
            if indices is not None and indices[k] is not None:
                idx.append(indices[k])
                continue
            idx.append(len(self.points))
            self.points.append((float(p[0]), float(p[1])))
        self.chains.append([idx, closed, splittable])
        return idx

    def segments(self):
        for c, (idx, closed, split) in enumerate(self.chains):
            pairs = list(zip(idx[:-1], idx[1:]))
            if closed:
                pairs.append((idx[-1], idx[0]))
            for pos, (a, b) in enumerate(pairs):
                yield c, pos, a, b, split

    def split(self, chain, pos):
        idx = self.chains[chain][0]
        a, b = idx[pos], idx[(pos + 1) % len(idx)]
        pa, pb = np.array(self.points[a]), np.array(self.points[b])
        mid = len(self.points)
        self.points.append(tuple((0.5 * (pa + pb)).tolist()))
        idx.insert(pos + 1, mid)


# ---------------------------------------------------------------------------
# rotor rings


def _arc_segments(radius, h, level, interface):
    n = math.ceil(QUARTER * radius / h - 1e-9)
    return max(n, ARC_SEGMENTS * level) if interface else max(n, 1)


def _rotor(geom: MachineGeometry, level: int, h: float, h_bore: float):
    stack = RingStack(QUARTER)
    stack.add_ring(0.0, 1)
    n_gap = max(
        _arc_segments(geom.stator_inner_radius, h_bore, level, True),
        _arc_segments(geom.rotor_outer_radius, h, level, True),
    )
    layers = [
        ("shaft", 0.0, geom.shaft_radius),
        ("rotor_yoke", geom.shaft_radius, geom.rotor_yoke_outer_radius),
        ("cage", geom.rotor_yoke_outer_radius, geom.rotor_outer_radius),
    ]
    shaft_ring = None
    for region, r0, r1 in layers:
        m = max(1, math.ceil((r1 - r0) / h - 1e-9))
        for k in range(1, m + 1):
            r = r1 if k == m else r0 + (r1 - r0) * k / m
            if region == "cage" and k == m:
                n = n_gap
            else:
                n = _arc_segments(r, h, level, k == m)
            stack.add_ring(r, n)
            stack.connect(REGION_IDS[region])
        if region == "shaft":
            shaft_ring = len(stack.rings) - 1
    stack.add_ring(geom.stator_inner_radius, n_gap)
    stack.connect(REGION_IDS["air_gap"])
    nodes, tris, region = stack.arrays()
    bore = stack.rings[-1][1]
    return nodes, tris, region, stack.ring_edges(shaft_ring), bore


# ---------------------------------------------------------------------------
# stator


def _slot_distance(geom, pts):
    d = np.full(len(pts), np.inf)
    for k in range(geom.slots_in_model):
        o, er, et = geom.slot_frame(k)
        rel = pts - o
        u, v = rel @ er, rel @ et
        du = np.maximum(np.maximum(-u, u - geom.slot_depth), 0.0)
        dv = np.maximum(np.abs(v) - geom.slot_width / 2, 0.0)
        d = np.minimum(d, np.hypot(du, dv))
    return d


def _stator(geom: MachineGeometry, level: int, h: float, h_slot: float, bore_pts):
    r_si, r_so = geom.stator_inner_radius, geom.stator_outer_radius
    rc = geom.conductor_radius

    def size(pts):
        return np.minimum(h, h_slot + GRADING * _slot_distance(geom, pts))

    chains = _Chains()
    bore_idx = chains.add(bore_pts, splittable=False)
    cut_x = _subdivide((r_si, 0.0), (r_so, 0.0), size)
    cut_y = _subdivide((0.0, r_so), (0.0, r_si), size)
    n_jacket = _arc_segments(r_so, h, level, True)
    theta = QUARTER * np.arange(n_jacket + 1) / n_jacket
    jacket = np.column_stack([r_so * np.cos(theta), r_so * np.sin(theta)])
    jacket[0], jacket[-1] = (r_so, 0.0), (0.0, r_so)
    cut_x[-1], jacket[0] = (r_so, 0.0), (r_so, 0.0)
    # outer boundary as one chain: x-axis cut, jacket, y-axis cut
    outer = np.concatenate([cut_x, jacket[1:], cut_y[1:]])
    fixed = [bore_idx[0]] + [None] * (len(outer) - 2) + [bore_idx[-1]]
    chains.add(outer, indices=fixed)

    n_cond = CONDUCTOR_SEGMENTS * level
    interior = []  # points inside conductors, not part of any chain
    conductor_polys = []
    for k in range(geom.slots_in_model):
        corners = geom.slot_corners(k)
        ring = [_subdivide(corners[i], corners[(i + 1) % 4], lambda p: np.full(len(p), h_slot))[:-1]
                for i in range(4)]
        chains.add(np.concatenate(ring), closed=True)
    for centre, region in geom.conductors():
        ang = 2 * math.pi * np.arange(n_cond) / n_cond
        circle = centre + rc * np.column_stack([np.cos(ang), np.sin(ang)])
        idx = chains.add(circle, closed=True)
        conductor_polys.append((centre, region, len(chains.chains) - 1))
        chord = 2 * rc * math.sin(math.pi / n_cond)
        rings = max(1, round(rc / chord))
        interior.append(centre)
        for j in range(1, rings):
            rj = rc * j / rings
            nj = max(3, round(2 * math.pi * rj / chord))
            a = 2 * math.pi * np.arange(nj) / nj + (0.5 * math.pi / nj) * (j % 2)
            interior.extend(centre + rj * np.column_stack([np.cos(a), np.sin(a)]))

    # graded fill: dyadic lattices, each used where the size function matches
    candidates = []
    s, k = h_slot, 0
    while True:
        lat = _hex_lattice(0.0, r_so, 0.0, r_so, s)
        rr = np.hypot(lat[:, 0], lat[:, 1])
        lat = lat[(rr > r_si) & (rr < r_so) & (lat[:, 0] > 0) & (lat[:, 1] > 0)]
        hs = size(lat)
        last = 2 * s > h
        keep = (hs >= s) & ((hs < 2 * s) | last) if k else (hs < 2 * s) | last
        candidates.append((lat[keep], k))
        if last:
            break
        s, k = 2 * s, k + 1
    fill = np.concatenate([c for c, _ in candidates])
    level_of = np.concatenate([np.full(len(c), k) for c, k in candidates])
    # slots get their own lattice aligned with the walls
    slot_fill = []
    for k in range(geom.slots_in_model):
        o, er, et = geom.slot_frame(k)
        lat = _hex_lattice(0.0, geom.slot_depth, -geom.slot_width / 2, geom.slot_width / 2, h_slot)
        uv = lat[(lat[:, 0] > 0) & (lat[:, 0] < geom.slot_depth)
                 & (np.abs(lat[:, 1]) < geom.slot_width / 2)]
        slot_fill.append(o + uv[:, :1] * er + uv[:, 1:] * et)
    slot_fill = np.concatenate(slot_fill)
    fill = np.concatenate([fill, slot_fill])
    level_of = np.concatenate([level_of, np.full(len(slot_fill), -1)])
    inside_slot = _slot_distance(geom, fill) == 0
    fill = fill[(level_of == -1) | ~inside_slot]
    level_of = level_of[(level_of == -1) | ~inside_slot]
    if geom.conductors_per_slot:
        centres = np.array([c for c, _ in geom.conductors()])
        dist, _ = cKDTree(centres).query(fill)
        ok = dist > rc + 0.5 * h_slot
        fill, level_of = fill[ok], level_of[ok]
    hfill = np.where(level_of == -1, h_slot, size(fill))
    # drop coarse points crowding finer lattices
    tree = cKDTree(fill)
    pairs = tree.query_pairs(0.6 * hfill.max(), output_type="ndarray")
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        d = np.linalg.norm(fill[i] - fill[j], axis=1)
        li, lj = level_of[i], level_of[j]
        drop = np.zeros(len(fill), dtype=bool)
        coarse_i = (li > lj) & (d < 0.6 * hfill[i])
        coarse_j = (lj > li) & (d < 0.6 * hfill[j])
        drop[i[coarse_i]] = True
        drop[j[coarse_j]] = True
        fill, hfill = fill[~drop], hfill[~drop]

    interior = np.array(interior).reshape(-1, 2)
    far = 3 * h
    guard = np.array([(-far, -far), (r_so + far, -far), (r_so + far, r_so + far),
                      (-far, r_so + far), (0.0, 0.0)])

    for attempt in range(40):
        cpts = np.array(chains.points)
        segs = list(chains.segments())
        a = np.array([s[2] for s in segs])
        b = np.array([s[3] for s in segs])
        mids = 0.5 * (cpts[a] + cpts[b])
        half = 0.5 * np.linalg.norm(cpts[a] - cpts[b], axis=1)
        ok = cKDTree(cpts).query(fill)[0] >= 0.5 * hfill
        clash = cKDTree(fill).sparse_distance_matrix(
            cKDTree(mids), 1.2 * half.max(), output_type="ndarray"
        )
        bad = clash["v"] < 1.2 * half[clash["j"]]
        ok[clash["i"][bad]] = False
        pts = np.concatenate([cpts, interior, fill[ok], guard])
        tri = Delaunay(pts).simplices.astype(np.int64)

        outer_idx = chains.chains[1][0]
        boundary_poly = cpts[outer_idx + bore_idx[::-1][1:-1]]
        cen = pts[tri].mean(axis=1)
        tri = tri[_points_in_polygon(cen, boundary_poly)]
        keys = set()
        for e in (tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]):
            keys.update((np.minimum(e[:, 0], e[:, 1]) * len(pts) + np.maximum(e[:, 0], e[:, 1])).tolist())
        missing = [
            (c, pos, split) for (c, pos, p, q, split) in segs
            if min(p, q) * len(pts) + max(p, q) not in keys
        ]
        if not missing:
            break
        if any(not split for _, _, split in missing):
            raise GeometryError("resolution too coarse: the bore arc could not be recovered")
        for c, pos, _ in sorted(missing, key=lambda m: (m[0], -m[1])):
            chains.split(c, pos)
    else:
        raise GeometryError(
            "resolution too coarse to resolve the slot contents: constraint edges still "
            "missing after 40 refinement passes"
        )

    # regions
    cen = pts[tri].mean(axis=1)
    region = np.full(len(tri), REGION_IDS["stator_yoke"])
    in_slot = _slot_distance(geom, cen) == 0
    region[in_slot] = REGION_IDS["slot_insulation"]
    if conductor_polys:
        centres = np.array([c for c, _, _ in conductor_polys])
        dist, near = cKDTree(centres).query(cen)
        for t in np.flatnonzero(dist < rc):
            centre, name, chain = conductor_polys[near[t]]
            poly = cpts[chains.chains[chain][0]]
            if _points_in_polygon(cen[t : t + 1], poly)[0]:
                region[t] = REGION_IDS[name]
    used = np.unique(tri)
    remap = -np.ones(len(pts), dtype=np.int64)
    # keep bore points first so they line up with the rotor ring
    order = np.concatenate([np.array(bore_idx), np.setdiff1d(used, bore_idx)])
    remap[order] = np.arange(len(order))
    return pts[order], remap[tri], region


def build_machine_mesh(geometry: MachineGeometry | None = None, resolution_level: int = 1) -> Mesh:
    """Mesh the quarter cross-section.

    Regions: shaft, rotor_yoke, cage, air_gap, stator_yoke, slot_insulation,
    conductor_upper, conductor_lower.  Boundaries: ``jacket`` (outer arc),
    ``symmetry_cut`` (both radial cuts) and the interior edge set
    ``shaft_surface``.  Raising the level refines every length by the same
    factor, so doubling it roughly quadruples the element count.
    """
    geom = geometry or MachineGeometry()
    geom.validate()
    level = int(resolution_level)
    if level < 1:
        raise GeometryError("resolution_level must be >= 1")
    h = geom.mesh_size / level
    h_slot = geom.slot_mesh_size / level
    h_bore = min(h, h_slot + GRADING * geom.slot_offset)

    r_nodes, r_tris, r_region, shaft_edges, bore = _rotor(geom, level, h, h_bore)
    s_nodes, s_tris, s_region = _stator(geom, level, h, h_slot, r_nodes[bore])

    nb = len(bore)
    smap = np.concatenate([np.array(bore), len(r_nodes) + np.arange(len(s_nodes) - nb)])
    nodes = np.concatenate([r_nodes, s_nodes[nb:]])
    tris = np.concatenate([r_tris, smap[s_tris]])
    region = np.concatenate([r_region, s_region])

    free = Mesh(nodes=nodes, elements=tris, element_region=region, regions=REGION_IDS).free_edges()
    p, q = nodes[free[:, 0]], nodes[free[:, 1]]
    on_cut = ((p[:, 1] == 0) & (q[:, 1] == 0)) | ((p[:, 0] == 0) & (q[:, 0] == 0))
    r_so = geom.stator_outer_radius
    # split jacket chords sit slightly inside the arc
    on_jacket = (np.hypot(*p.T) > (1 - 1e-3) * r_so) & (np.hypot(*q.T) > (1 - 1e-3) * r_so) & ~on_cut
    if not np.all(on_cut | on_jacket):
        raise GeometryError("internal mesher error: untagged outer boundary edge")
    tags = np.where(on_cut, BOUNDARY_IDS["symmetry_cut"], BOUNDARY_IDS["jacket"])
    return Mesh(
        nodes=nodes,
        elements=tris,
        element_region=region,
        regions=REGION_IDS,
        boundary_edges=free,
        boundary_tags=tags,
        boundaries=BOUNDARY_IDS,
        interface_edges=shaft_edges,
        interface_tags=np.full(len(shaft_edges), BOUNDARY_IDS["shaft_surface"]),
    )


def default_probes(geometry: MachineGeometry | None = None) -> dict[str, tuple[tuple[float, float], str]]:
    """Sensor-like probe points: ``probe_id -> ((x, y), group)``.

    One probe in the middle of each winding layer and one in the yoke behind
    every slot, one in the centre of every tooth, two in the rotor yoke and
    one in the shaft.
    """
    geom = geometry or MachineGeometry()
    probes = {}
    upper, lower = geom.layer_counts()
    for k in range(geom.slots_in_model):
        o, er, et = geom.slot_frame(k)
        if upper:
            probes[f"slot{k}_upper"] = (tuple(o + 0.25 * geom.slot_depth * er), "slot")
        if lower:
            probes[f"slot{k}_lower"] = (tuple(o + 0.75 * geom.slot_depth * er), "slot")
        r_y = 0.5 * (geom.slot_start_radius + geom.slot_depth + geom.stator_outer_radius)
        probes[f"yoke{k}"] = (tuple(r_y * er), "stator_yoke")
    angles = geom.slot_angles()
    r_t = geom.slot_start_radius + 0.5 * geom.slot_depth
    for k, (a0, a1) in enumerate(zip(angles, angles[1:])):
        phi = 0.5 * (a0 + a1)
        probes[f"tooth{k}"] = ((r_t * math.cos(phi), r_t * math.sin(phi)), "stator_tooth")
    r_mid = 0.5 * (geom.shaft_radius + geom.rotor_yoke_outer_radius)
    for name, phi in (("rotor0", math.pi / 8), ("rotor1", 3 * math.pi / 8)):
        probes[name] = ((r_mid * math.cos(phi), r_mid * math.sin(phi)), "rotor")
    r_s = 0.5 * geom.shaft_radius
    probes["shaft0"] = ((r_s * math.cos(math.pi / 4), r_s * math.sin(math.pi / 4)), "shaft")
    return {k: ((float(p[0]), float(p[1])), g) for k, (p, g) in probes.items()}
