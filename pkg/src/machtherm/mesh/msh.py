"""Reader and writer for the ASCII MSH 2.2 subset used by this package.

Grammar accepted by :func:`parse_msh` (whitespace separated, one record per
line)::

    $MeshFormat
    2.2 0 <data-size>
    $EndMeshFormat
    $PhysicalNames
    <count>
    <dim> <physical-tag> "<name>"          (dim 1 = boundary, dim 2 = region)
    $EndPhysicalNames
    $Nodes
    <count>
    <node-id> <x> <y> <z>
    $EndNodes
    $Elements
    <count>
    <elm-id> <type> <ntags> <physical-tag> [<more tags>...] <node-ids...>
    $EndElements

Element type 1 is a 2-node line, type 2 a 3-node triangle; anything else is
rejected.  Other ``$Section`` blocks are skipped.  Triangles become elements
tagged with their physical group; lines become boundary edges when they
touch one triangle and interface edges when they touch two.
"""

from __future__ import annotations

import shlex
from collections import defaultdict

import numpy as np

from machtherm.errors import MeshFormatError
from machtherm.mesh.core import Mesh, reorient, _edge_key

_NODES_PER_TYPE = {1: 2, 2: 3}


def _sections(lines):
    blocks = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if not line.startswith("$"):
            raise MeshFormatError(f"line {i + 1}: expected a $Section header, got {line!r}")
        name = line[1:]
        end = f"$End{name}"
        j = i + 1
        while j < len(lines) and lines[j].strip() != end:
            j += 1
        if j == len(lines):
            raise MeshFormatError(f"section ${name} is not terminated by {end}")
        blocks.setdefault(name, (i + 1, lines[i + 1 : j]))
        i = j + 1
    return blocks


def _count(body, name, start):
    if not body:
        raise MeshFormatError(f"${name} is empty")
    try:
        n = int(body[0].split()[0])
    except (ValueError, IndexError):
        raise MeshFormatError(f"line {start + 1}: bad ${name} count {body[0]!r}") from None
    if len(body) - 1 < n:
        raise MeshFormatError(f"${name} declares {n} records but holds {len(body) - 1}")
    return n


def parse_msh(data: bytes | str) -> Mesh:
    """Parse ASCII MSH 2.2 text into a :class:`Mesh`.

    Clockwise triangles are reoriented with a warning.
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    lines = text.splitlines()
    blocks = _sections(lines)

    if "MeshFormat" not in blocks:
        raise MeshFormatError("missing $MeshFormat header")
    start, body = blocks["MeshFormat"]
    head = body[0].split() if body else []
    if len(head) != 3 or not head[0].startswith("2.") or head[1] != "0":
        raise MeshFormatError(f"unsupported mesh format header {' '.join(head)!r}; need '2.2 0 8'")

    names = {1: {}, 2: {}}
    if "PhysicalNames" in blocks:
        start, body = blocks["PhysicalNames"]
        n = _count(body, "PhysicalNames", start)
        for k, raw in enumerate(body[1 : n + 1]):
            try:
                dim, tag, name = shlex.split(raw)
                dim, tag = int(dim), int(tag)
            except ValueError:
                raise MeshFormatError(f"line {start + k + 2}: bad physical name {raw!r}") from None
            if dim in names:
                names[dim][tag] = name

    if "Nodes" not in blocks:
        raise MeshFormatError("missing $Nodes section")
    start, body = blocks["Nodes"]
    n = _count(body, "Nodes", start)
    index = {}
    coords = np.empty((n, 2))
    for k, raw in enumerate(body[1 : n + 1]):
        parts = raw.split()
        if len(parts) < 3:
            raise MeshFormatError(f"line {start + k + 2}: bad node record {raw!r}")
        index[int(parts[0])] = k
        coords[k] = float(parts[1]), float(parts[2])

    if "Elements" not in blocks:
        raise MeshFormatError("missing $Elements section")
    start, body = blocks["Elements"]
    n = _count(body, "Elements", start)
    tris, tri_tags, segs, seg_tags = [], [], [], []
    for k, raw in enumerate(body[1 : n + 1]):
        where = f"line {start + k + 2}"
        parts = [int(p) for p in raw.split()]
        if len(parts) < 3:
            raise MeshFormatError(f"{where}: bad element record {raw!r}")
        etype, ntags = parts[1], parts[2]
        if etype not in _NODES_PER_TYPE:
            raise MeshFormatError(f"{where}: unknown element type {etype}")
        ids = parts[3 + ntags :]
        if len(ids) != _NODES_PER_TYPE[etype]:
            raise MeshFormatError(f"{where}: element type {etype} needs {_NODES_PER_TYPE[etype]} nodes")
        phys = parts[3] if ntags >= 1 else 0
        dim = 2 if etype == 2 else 1
        if phys not in names[dim]:
            raise MeshFormatError(f"{where}: element has no named physical group (tag {phys})")
        try:
            conn = [index[i] for i in ids]
        except KeyError as exc:
            raise MeshFormatError(f"{where}: dangling node reference {exc.args[0]}") from None
        if etype == 2:
            tris.append(conn)
            tri_tags.append(phys)
        else:
            segs.append(conn)
            seg_tags.append(phys)

    if not tris:
        raise MeshFormatError("mesh contains no triangles")
    elements, _ = reorient(coords, tris)

    segs = np.array(segs, dtype=np.int64).reshape(-1, 2)
    seg_tags = np.array(seg_tags, dtype=np.int64)
    adjacency = defaultdict(int)
    tri_edges = np.concatenate([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]])
    for key in _edge_key(tri_edges, len(coords)).tolist():
        adjacency[key] += 1
    touching = np.array([adjacency.get(k, 0) for k in _edge_key(segs, len(coords)).tolist()], int)
    if np.any(touching == 0):
        j = int(np.flatnonzero(touching == 0)[0])
        raise MeshFormatError(f"line element {j} is not an edge of any triangle")
    interior = touching == 2

    return Mesh(
        nodes=coords,
        elements=elements,
        element_region=np.array(tri_tags, dtype=np.int64),
        regions={name: tag for tag, name in sorted(names[2].items())},
        boundary_edges=segs[~interior],
        boundary_tags=seg_tags[~interior],
        boundaries={name: tag for tag, name in sorted(names[1].items())},
        interface_edges=segs[interior],
        interface_tags=seg_tags[interior],
    )


def serialize_msh(mesh: Mesh) -> bytes:
    """Write ``mesh`` as ASCII MSH 2.2.

    Coordinates use Python's shortest round-trip float repr, so parsing the
    output reproduces them bit for bit.
    """
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat"]
    phys = [(1, tag, name) for name, tag in mesh.boundaries.items()]
    phys += [(2, tag, name) for name, tag in mesh.regions.items()]
    out += ["$PhysicalNames", str(len(phys))]
    out += [f'{dim} {tag} "{name}"' for dim, tag, name in sorted(phys)]
    out.append("$EndPhysicalNames")

    out += ["$Nodes", str(mesh.n_nodes)]
    out += [f"{i + 1} {x!r} {y!r} 0" for i, (x, y) in enumerate(mesh.nodes.tolist())]
    out.append("$EndNodes")

    records = []
    for edges, tags in ((mesh.boundary_edges, mesh.boundary_tags),
                        (mesh.interface_edges, mesh.interface_tags)):
        for (a, b), t in zip(edges.tolist(), tags.tolist()):
            records.append(f"1 2 {t} {t} {a + 1} {b + 1}")
    for (a, b, c), t in zip(mesh.elements.tolist(), mesh.element_region.tolist()):
        records.append(f"2 2 {t} {t} {a + 1} {b + 1} {c + 1}")
    out += ["$Elements", str(len(records))]
    out += [f"{i + 1} {r}" for i, r in enumerate(records)]
    out.append("$EndElements")
    return ("\n".join(out) + "\n").encode("utf-8")


def read_msh(path) -> Mesh:
    with open(path, "rb") as fh:
        return parse_msh(fh.read())


def write_msh(mesh: Mesh, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_msh(mesh))
