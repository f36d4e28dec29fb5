"""Structured triangulations: rectangles, disks, annuli and polar ring stacks."""

from __future__ import annotations

import math

import numpy as np

from machtherm.mesh.core import Mesh, signed_areas


def _orient(nodes, tris):
    tris = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    cw = signed_areas(nodes, tris) < 0
    tris[cw] = tris[cw][:, [0, 2, 1]]
    return tris


def zipper(inner, outer, inner_theta, outer_theta):
    """Triangulate the strip between two angularly sorted point chains.

    Both chains run in increasing angle over the same span.  A chain of one
    point (the origin) produces a fan.
    """
    tris = []
    if len(inner) == 1:
        for j in range(len(outer) - 1):
            tris.append((inner[0], outer[j], outer[j + 1]))
        return tris
    i = j = 0
    na, nb = len(inner) - 1, len(outer) - 1
    while i < na or j < nb:
        if j == nb or (i < na and inner_theta[i + 1] <= outer_theta[j + 1]):
            tris.append((inner[i], outer[j], inner[i + 1]))
            i += 1
        else:
            tris.append((inner[i], outer[j], outer[j + 1]))
            j += 1
    return tris


class RingStack:
    """Concentric rings of nodes joined layer by layer.

    ``span`` is the angular extent; ``2*pi`` closes the rings.  Angles are
    measured from the positive x axis.  Sector end points are placed exactly
    on the axes when the span is a quarter turn.
    """

    def __init__(self, span=2 * math.pi):
        self.span = span
        self.closed = math.isclose(span, 2 * math.pi)
        self.nodes = []
        self.rings = []  # (radius, node indices, angles)
        self.tris = []
        self.tri_region = []

    def _point(self, r, theta):
        if not self.closed and math.isclose(self.span, math.pi / 2):
            if theta == 0.0:
                return (r, 0.0)
            if theta == self.span:
                return (0.0, r)
        return (r * math.cos(theta), r * math.sin(theta))

    def add_ring(self, radius, segments):
        if radius == 0.0:
            idx = [len(self.nodes)]
            self.nodes.append((0.0, 0.0))
            self.rings.append((0.0, idx, np.zeros(1)))
            return idx
        segments = max(int(segments), 3 if self.closed else 1)
        count = segments if self.closed else segments + 1
        theta = np.array([self.span * k / segments for k in range(count)])
        if not self.closed:
            theta[-1] = self.span
        start = len(self.nodes)
        self.nodes.extend(self._point(radius, float(t)) for t in theta)
        idx = list(range(start, start + count))
        self.rings.append((radius, idx, theta))
        return idx

    def connect(self, region):
        """Triangulate between the last two rings and tag with ``region``."""
        (r0, a, ta), (r1, b, tb) = self.rings[-2], self.rings[-1]
        if self.closed:
            if len(a) > 1:
                a, ta = a + [a[0]], np.append(ta, 2 * math.pi)
            b, tb = b + [b[0]], np.append(tb, 2 * math.pi)
        new = zipper(a, b, ta, tb)
        self.tris.extend(new)
        self.tri_region.extend([region] * len(new))

    def ring_edges(self, ring_index):
        _, idx, _ = self.rings[ring_index]
        pairs = list(zip(idx[:-1], idx[1:]))
        if self.closed:
            pairs.append((idx[-1], idx[0]))
        return np.array(pairs, dtype=np.int64)

    def arrays(self):
        nodes = np.array(self.nodes, dtype=float)
        return nodes, _orient(nodes, self.tris), np.array(self.tri_region, dtype=np.int64)


def rectangle_mesh(lx=1.0, ly=1.0, nx=4, ny=4, origin=(0.0, 0.0)):
    """Structured right-triangle mesh of an axis-aligned rectangle.

    Diagonals alternate direction cell by cell, which keeps the pattern
    symmetric.  Boundary tags: ``left``, ``right``, ``bottom``, ``top``;
    single region ``domain``.
    """
    x = origin[0] + lx * np.arange(nx + 1) / nx
    y = origin[1] + ly * np.arange(ny + 1) / ny
    x[-1], y[-1] = origin[0] + lx, origin[1] + ly
    X, Y = np.meshgrid(x, y)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    nid = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b = nid[j, i], nid[j, i + 1]
            c, d = nid[j + 1, i + 1], nid[j + 1, i]
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    edges, tags = [], []
    sides = {
        "bottom": (nid[0, :-1], nid[0, 1:]),
        "right": (nid[:-1, -1], nid[1:, -1]),
        "top": (nid[-1, 1:], nid[-1, :-1]),
        "left": (nid[1:, 0], nid[:-1, 0]),
    }
    names = {}
    for tag, (name, (a, b)) in enumerate(sides.items(), start=1):
        names[name] = tag
        edges.append(np.column_stack([a, b]))
        tags.append(np.full(len(a), tag))
    return Mesh(
        nodes=nodes,
        elements=np.array(tris),
        element_region=np.ones(len(tris), dtype=int),
        regions={"domain": 1},
        boundary_edges=np.concatenate(edges),
        boundary_tags=np.concatenate(tags),
        boundaries=names,
    )


def _layers(r0, r1, h):
    return max(1, math.ceil((r1 - r0) / h - 1e-9))


def annulus_mesh(r_in, r_out, level=1, n_theta=None, n_radial=None):
    """Full annulus; boundary tags ``inner`` and ``outer``, region ``domain``.

    At level ``L`` the default resolution is ``32*L`` segments around and
    ``8*L`` layers across.
    """
    n_theta = n_theta or 32 * level
    n_radial = n_radial or 8 * level
    stack = RingStack()
    stack.add_ring(r_in, n_theta)
    for k in range(1, n_radial + 1):
        stack.add_ring(r_in + (r_out - r_in) * k / n_radial, n_theta)
        stack.connect(1)
    nodes, tris, region = stack.arrays()
    inner, outer = stack.ring_edges(0), stack.ring_edges(-1)
    return Mesh(
        nodes=nodes,
        elements=tris,
        element_region=region,
        regions={"domain": 1},
        boundary_edges=np.concatenate([inner, outer]),
        boundary_tags=np.concatenate([np.full(len(inner), 1), np.full(len(outer), 2)]),
        boundaries={"inner": 1, "outer": 2},
    )


def disk_mesh(radius, level=1, n_theta=None):
    """Full disk built from rings of roughly equal spacing; boundary tag ``rim``."""
    n_theta = n_theta or 32 * level
    h = 2 * math.pi * radius / n_theta
    n_radial = _layers(0.0, radius, h)
    stack = RingStack()
    stack.add_ring(0.0, 1)
    for k in range(1, n_radial + 1):
        r = radius * k / n_radial
        n = n_theta if k == n_radial else max(6, math.ceil(2 * math.pi * r / h))
        stack.add_ring(r, n)
        stack.connect(1)
    nodes, tris, region = stack.arrays()
    rim = stack.ring_edges(-1)
    return Mesh(
        nodes=nodes,
        elements=tris,
        element_region=region,
        regions={"domain": 1},
        boundary_edges=rim,
        boundary_tags=np.ones(len(rim), dtype=int),
        boundaries={"rim": 1},
    )
