"""Halfedge triangle-mesh core: construction, OBJ I/O, topology queries and
cut-to-disk surgery.

Halfedges are indexed implicitly: face ``f`` owns halfedges ``3f``, ``3f+1``,
``3f+2``, where halfedge ``3f+s`` runs from corner ``s`` to corner ``(s+1)%3``
of the face. ``next`` and ``prev`` are therefore index arithmetic and only the
twin pairing is stored.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, TopologyError


def _require(cond, exc, message):
    if not cond:
        raise exc(message)


@dataclass(frozen=True)
class HalfedgeMesh:
    """Immutable halfedge representation of an oriented triangle mesh.

    Attributes
    ----------
    faces : (F, 3) int array
        Vertex ids per face, counter-clockwise.
    n_vertices : int
        Number of vertices; every vertex appears in at least one face.
    positions : (V, 3) float array or None
        Optional embedded coordinates in the input file's length units.
    twin : (3F,) int array
        Opposite halfedge id, or -1 on the boundary.
    edges : (E, 2) int array
        Endpoint vertex ids per edge, in the orientation of the first
        halfedge encountered during construction.
    edge_of_halfedge : (3F,) int array
        Edge id under each halfedge.
    edge_halfedges : (E, 2) int array
        The one or two halfedges of each edge (-1 when the edge is boundary).
    boundary_loops : tuple of tuple of int
        Vertex cycles, one per boundary component, interior on the left.
    vertex_halfedge : (V,) int array
        One outgoing halfedge per vertex; for boundary vertices this is the
        unique outgoing boundary halfedge, so that counter-clockwise rotation
        sweeps the whole fan.
    """

    faces: np.ndarray
    n_vertices: int
    positions: np.ndarray | None
    twin: np.ndarray
    edges: np.ndarray
    edge_of_halfedge: np.ndarray
    edge_halfedges: np.ndarray
    boundary_loops: tuple
    vertex_halfedge: np.ndarray
    uv: np.ndarray | None = field(default=None, compare=False)

    @property
    def n_faces(self):
        return self.faces.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def n_halfedges(self):
        return 3 * self.faces.shape[0]

    def origin(self, h):
        return self.faces[h // 3, h % 3]

    def dest(self, h):
        return self.faces[h // 3, (h % 3 + 1) % 3]

    @staticmethod
    def next(h):
        return h - h % 3 + (h % 3 + 1) % 3

    @staticmethod
    def prev(h):
        return h - h % 3 + (h % 3 + 2) % 3

    def is_boundary_halfedge(self, h):
        return self.twin[h] < 0

    def is_closed(self):
        return not self.boundary_loops

    def boundary_vertex_mask(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        for loop in self.boundary_loops:
            mask[list(loop)] = True
        return mask

    def outgoing_halfedges(self, v):
        """Outgoing halfedges around ``v`` in counter-clockwise order.

        For boundary vertices the walk starts at the outgoing boundary
        halfedge and ends at the fan's other boundary edge.
        """
        start = int(self.vertex_halfedge[v])
        ring = [start]
        h = int(self.twin[self.prev(start)])
        while h >= 0 and h != start:
            ring.append(h)
            h = int(self.twin[self.prev(h)])
        return ring

    def edge_id(self, a, b):
        """Edge id of the (a, b) edge, or -1 if absent."""
        for h in self.outgoing_halfedges(a):
            if self.dest(h) == b:
                return int(self.edge_of_halfedge[h])
        for h in self.outgoing_halfedges(b):
            if self.dest(h) == a:
                return int(self.edge_of_halfedge[h])
        return -1


def build_mesh(faces, positions=None, uv=None):
    """Build a validated :class:`HalfedgeMesh` from an indexed face list.

    Raises
    ------
    TopologyError
        On non-triangular input, repeated vertex ids within a face,
        non-manifold edges (an oriented edge shared by two faces), unused or
        non-manifold (bowtie) vertices.
    """
    faces = np.ascontiguousarray(faces, dtype=np.int64)
    _require(faces.ndim == 2 and faces.shape[1] == 3, TopologyError,
             "faces must be an (F, 3) index array")
    nf = faces.shape[0]
    _require(nf > 0, TopologyError, "mesh has no faces")
    _require(faces.min() >= 0, TopologyError, "negative vertex id")
    nv = int(faces.max()) + 1
    degenerate = (
        (faces[:, 0] == faces[:, 1])
        | (faces[:, 1] == faces[:, 2])
        | (faces[:, 2] == faces[:, 0])
    )
    if degenerate.any():
        raise TopologyError(
            f"repeated vertex id in faces {np.nonzero(degenerate)[0].tolist()}")

    used = np.zeros(nv, dtype=bool)
    used[faces.ravel()] = True
    if not used.all():
        raise TopologyError(
            f"unused vertex ids {np.nonzero(~used)[0].tolist()}")

    if positions is not None:
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        _require(positions.shape == (nv, 3), TopologyError,
                 f"positions must have shape ({nv}, 3)")
    if uv is not None:
        uv = np.ascontiguousarray(uv, dtype=np.complex128)
        _require(uv.shape == (nv,), TopologyError,
                 f"uv must have shape ({nv},)")

    nh = 3 * nf
    origin = faces[np.arange(nh) // 3, np.arange(nh) % 3]
    dest = faces[np.arange(nh) // 3, (np.arange(nh) % 3 + 1) % 3]

    directed = {}
    for h in range(nh):
        key = (int(origin[h]), int(dest[h]))
        if key in directed:
            raise TopologyError(
                f"oriented edge {key} shared by faces {directed[key] // 3} "
                f"and {h // 3}: non-manifold or inconsistently oriented")
        directed[key] = h

    twin = np.full(nh, -1, dtype=np.int64)
    for (a, b), h in directed.items():
        t = directed.get((b, a), -1)
        twin[h] = t

    edge_of_halfedge = np.full(nh, -1, dtype=np.int64)
    edge_list = []
    edge_halfedges = []
    for h in range(nh):
        if edge_of_halfedge[h] >= 0:
            continue
        e = len(edge_list)
        edge_list.append((int(origin[h]), int(dest[h])))
        t = int(twin[h])
        edge_halfedges.append((h, t))
        edge_of_halfedge[h] = e
        if t >= 0:
            edge_of_halfedge[t] = e
    edges = np.array(edge_list, dtype=np.int64)
    edge_halfedges = np.array(edge_halfedges, dtype=np.int64)

    # Vertex -> outgoing halfedge, preferring the boundary one so that CCW
    # rotation from it covers the whole fan.
    vertex_halfedge = np.full(nv, -1, dtype=np.int64)
    for h in range(nh):
        if vertex_halfedge[origin[h]] < 0:
            vertex_halfedge[origin[h]] = h
    boundary_start = {}
    for h in range(nh):
        if twin[h] < 0:
            v = int(origin[h])
            if v in boundary_start:
                raise TopologyError(
                    f"vertex {v} has two outgoing boundary edges "
                    "(non-manifold bowtie)")
            boundary_start[v] = h
            vertex_halfedge[v] = h

    mesh = HalfedgeMesh(
        faces=faces,
        n_vertices=nv,
        positions=positions,
        twin=twin,
        edges=edges,
        edge_of_halfedge=edge_of_halfedge,
        edge_halfedges=edge_halfedges,
        boundary_loops=(),
        vertex_halfedge=vertex_halfedge,
        uv=uv,
    )

    # Manifold-vertex check: the CCW fan from vertex_halfedge must reach every
    # incident corner.
    incident = np.bincount(faces.ravel(), minlength=nv)
    for v in range(nv):
        if len(mesh.outgoing_halfedges(v)) != incident[v]:
            raise TopologyError(f"vertex {v} has a disconnected fan "
                                "(non-manifold vertex)")

    loops = _boundary_loops(mesh, boundary_start)
    object.__setattr__(mesh, "boundary_loops", loops)
    return mesh


def _boundary_loops(mesh, boundary_start):
    loops = []
    seen = set()
    for v0 in sorted(boundary_start):
        h = boundary_start[v0]
        if h in seen:
            continue
        loop = []
        while h not in seen:
            seen.add(h)
            loop.append(int(mesh.origin(h)))
            h = boundary_start[int(mesh.dest(h))]
        loops.append(tuple(loop))
    return tuple(loops)


def euler_characteristic(mesh):
    """|V| - |E| + |F|."""
    return mesh.n_vertices - mesh.n_edges + mesh.n_faces


def is_connected(mesh):
    seen = np.zeros(mesh.n_faces, dtype=bool)
    queue = deque([0])
    seen[0] = True
    while queue:
        f = queue.popleft()
        for s in range(3):
            t = mesh.twin[3 * f + s]
            if t >= 0 and not seen[t // 3]:
                seen[t // 3] = True
                queue.append(t // 3)
    return bool(seen.all())


# ---------------------------------------------------------------------------
# OBJ I/O


def load_obj(path):
    """Load an ASCII OBJ file into a :class:`HalfedgeMesh`.

    Only ``v``, ``vt`` and triangular ``f`` records are interpreted; other
    record types are skipped. Texture coordinates, when present on every face
    corner, are stored on the mesh as a per-vertex complex array.
    """
    verts = []
    uvs = []
    corners = []  # (vertex index, uv index or -1)
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            if tok[0] == "v":
                if len(tok) < 4:
                    raise ParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    verts.append([float(x) for x in tok[1:4]])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad vertex coordinate") from exc
            elif tok[0] == "vt":
                if len(tok) < 3:
                    raise ParseError(f"{path}:{lineno}: vt needs 2 coordinates")
                try:
                    uvs.append(complex(float(tok[1]), float(tok[2])))
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad texture coordinate") from exc
            elif tok[0] == "f":
                if len(tok) != 4:
                    raise ParseError(
                        f"{path}:{lineno}: only triangular faces are supported")
                face = []
                for ref in tok[1:]:
                    parts = ref.split("/")
                    try:
                        vi = int(parts[0])
                        ti = int(parts[1]) if len(parts) > 1 and parts[1] else 0
                    except ValueError as exc:
                        raise ParseError(f"{path}:{lineno}: bad face index") from exc
                    if vi < 1:
                        raise ParseError(f"{path}:{lineno}: face index must be >= 1")
                    face.append((vi - 1, ti - 1))
                faces.append([vi for vi, _ in face])
                corners.extend(face)

    if not verts:
        raise ParseError(f"{path}: no vertices")
    if not faces:
        raise ParseError(f"{path}: no faces")
    verts = np.asarray(verts, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    if faces.max() >= len(verts):
        raise ParseError(f"{path}: face references vertex {faces.max() + 1} "
                         f"but only {len(verts)} vertices are defined")

    uv = None
    if uvs and all(ti >= 0 for _, ti in corners):
        uv = np.full(len(verts), np.nan, dtype=np.complex128)
        for vi, ti in corners:
            if ti >= len(uvs):
                raise ParseError(f"{path}: face references vt {ti + 1} "
                                 f"but only {len(uvs)} are defined")
            val = uvs[ti]
            if not np.isnan(uv[vi].real) and uv[vi] != val:
                raise ParseError(
                    f"{path}: vertex {vi + 1} has two distinct texture "
                    "coordinates; per-vertex uv required")
            uv[vi] = val
        if np.isnan(uv.real).any():
            uv = None

    return build_mesh(faces, positions=verts, uv=uv)


def save_obj(mesh, path, uv=None):
    """Write a mesh (and optional parameterization) as ASCII OBJ.

    Coordinates are printed with 9 significant digits so a save/load cycle
    reproduces them bit-identically. ``uv`` may be a complex per-vertex array
    or any object with a ``coords`` attribute. When the mesh has no 3D
    positions the uv coordinates are written as the ``v`` records.
    """
    coords = None
    if uv is not None:
        coords = np.asarray(getattr(uv, "coords", uv), dtype=np.complex128)
        if coords.shape != (mesh.n_vertices,):
            raise ValueError("uv must assign one coordinate per vertex")
    pos = mesh.positions
    if pos is None:
        if coords is None:
            raise ValueError("mesh has no positions and no uv was given")
        pos = np.column_stack([coords.real, coords.imag,
                               np.zeros(mesh.n_vertices)])

    lines = []
    for x, y, z in pos:
        lines.append(f"v {x:.9g} {y:.9g} {z:.9g}")
    if coords is not None:
        for w in coords:
            lines.append(f"vt {w.real:.9g} {w.imag:.9g}")
        for a, b, c in mesh.faces + 1:
            lines.append(f"f {a}/{a} {b}/{b} {c}/{c}")
    else:
        for a, b, c in mesh.faces + 1:
            lines.append(f"f {a} {b} {c}")

    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Cutting


@dataclass(frozen=True)
class CutGraph:
    """Record of a slicing operation.

    ``cut_edges`` are edge ids of the *original* mesh. ``new_to_orig_vertex``
    and ``new_to_orig_edge`` map ids of the cut-open mesh back to the
    original; ``edge_copy_pairs`` lists, for every cut edge, its two copies as
    new-vertex endpoint pairs aligned with the original edge orientation.
    """

    cut_edges: tuple
    new_to_orig_vertex: np.ndarray
    new_to_orig_edge: np.ndarray
    edge_copy_pairs: dict

    def vertex_copies(self, v):
        return np.nonzero(self.new_to_orig_vertex == v)[0].tolist()

    def push_vertex(self, values):
        """Transfer per-original-vertex data onto the cut mesh (copies share
        the value)."""
        values = np.asarray(values)
        return values[self.new_to_orig_vertex]

    def pull_vertex(self, values):
        """Average per-cut-vertex data back onto original vertices."""
        values = np.asarray(values)
        n = int(self.new_to_orig_vertex.max()) + 1
        out = np.zeros(n, dtype=values.dtype)
        cnt = np.zeros(n)
        np.add.at(out, self.new_to_orig_vertex, values)
        np.add.at(cnt, self.new_to_orig_vertex, 1.0)
        return out / cnt

    def push_edge(self, values):
        """Transfer per-original-edge data (e.g. lengths) onto the cut mesh."""
        values = np.asarray(values)
        return values[self.new_to_orig_edge]


def slice_along_edges(mesh, edge_ids):
    """Cut the mesh open along a set of interior edges.

    Every vertex incident to ``k`` cut edges is split into ``k`` copies
    (``k+1`` for boundary vertices), one per fan sector delimited by the cut
    edges. Returns the cut-open mesh and the :class:`CutGraph` bookkeeping.
    """
    cut = np.zeros(mesh.n_edges, dtype=bool)
    for e in edge_ids:
        if mesh.edge_halfedges[e, 1] < 0:
            raise TopologyError(f"cannot slice along boundary edge {e}")
        cut[e] = True

    boundary = mesh.boundary_vertex_mask()
    corner_vertex = np.full((mesh.n_faces, 3), -1, dtype=np.int64)
    new_to_orig = []
    for v in range(mesh.n_vertices):
        ring = mesh.outgoing_halfedges(v)
        breaks = [t for t, h in enumerate(ring) if cut[mesh.edge_of_halfedge[h]]]
        if boundary[v]:
            bounds = [0] + [b for b in breaks if b != 0]
            sectors = [ring[bounds[i]:(bounds[i + 1] if i + 1 < len(bounds) else None)]
                       for i in range(len(bounds))]
        elif not breaks:
            sectors = [ring]
        else:
            sectors = []
            for i, b in enumerate(breaks):
                end = breaks[i + 1] if i + 1 < len(breaks) else breaks[0] + len(ring)
                sectors.append([ring[t % len(ring)] for t in range(b, end)])
        for sector in sectors:
            nid = len(new_to_orig)
            new_to_orig.append(v)
            for h in sector:
                corner_vertex[h // 3, h % 3] = nid

    new_to_orig = np.asarray(new_to_orig, dtype=np.int64)
    # Isolated interior cut edges would give duplicate oriented edges in the
    # cut mesh; detect early for a clear message.
    for e in np.nonzero(cut)[0]:
        a, b = mesh.edges[e]
        if (not boundary[a] and not boundary[b]
                and np.count_nonzero(new_to_orig == a) == 1
                and np.count_nonzero(new_to_orig == b) == 1):
            raise TopologyError(
                f"cut edge {int(e)} is isolated: slicing it would not open "
                "the mesh")

    positions = None
    if mesh.positions is not None:
        positions = mesh.positions[new_to_orig]
    new_mesh = build_mesh(corner_vertex, positions=positions)

    pair_to_orig_edge = {}
    for e, (a, b) in enumerate(mesh.edges):
        pair_to_orig_edge[frozenset((int(a), int(b)))] = e
    new_to_orig_edge = np.empty(new_mesh.n_edges, dtype=np.int64)
    copies = {}
    for e2, (a2, b2) in enumerate(new_mesh.edges):
        oa, ob = int(new_to_orig[a2]), int(new_to_orig[b2])
        oe = pair_to_orig_edge[frozenset((oa, ob))]
        new_to_orig_edge[e2] = oe
        if cut[oe]:
            a, b = (int(x) for x in mesh.edges[oe])
            ends = (int(a2), int(b2)) if oa == a else (int(b2), int(a2))
            copies.setdefault(oe, []).append(ends)

    edge_copy_pairs = {}
    for oe, ends in copies.items():
        if len(ends) != 2:
            raise TopologyError(
                f"cut edge {oe} produced {len(ends)} copies instead of 2")
        edge_copy_pairs[int(oe)] = tuple(ends)

    graph = CutGraph(
        cut_edges=tuple(int(e) for e in np.nonzero(cut)[0]),
        new_to_orig_vertex=new_to_orig,
        new_to_orig_edge=new_to_orig_edge,
        edge_copy_pairs=edge_copy_pairs,
    )
    return new_mesh, graph


def cut_to_disk(mesh):
    """Cut a closed connected mesh open into a topological disk.

    The cut graph is the complement of a breadth-first dual spanning tree
    rooted at face 0, pruned of degree-1 vertices; for a sphere (where the
    pruned graph is empty) a two-edge slit inside face 0 is used instead.
    Deterministic for a given face ordering.
    """
    if mesh.boundary_loops:
        raise TopologyError("cut_to_disk requires a closed mesh")
    if not is_connected(mesh):
        raise TopologyError("cut_to_disk requires a connected mesh")

    in_tree = np.zeros(mesh.n_edges, dtype=bool)
    seen = np.zeros(mesh.n_faces, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        f = queue.popleft()
        for s in range(3):
            h = 3 * f + s
            t = int(mesh.twin[h])
            g = t // 3
            if not seen[g]:
                seen[g] = True
                in_tree[mesh.edge_of_halfedge[h]] = True
                queue.append(g)

    cut = ~in_tree
    degree = np.zeros(mesh.n_vertices, dtype=np.int64)
    incident = [[] for _ in range(mesh.n_vertices)]
    for e in np.nonzero(cut)[0]:
        a, b = (int(x) for x in mesh.edges[e])
        degree[a] += 1
        degree[b] += 1
        incident[a].append(int(e))
        incident[b].append(int(e))
    leaves = deque(int(v) for v in np.nonzero(degree == 1)[0])
    while leaves:
        v = leaves.popleft()
        if degree[v] != 1:
            continue
        e = next(x for x in incident[v] if cut[x])
        cut[e] = False
        for w in (int(mesh.edges[e, 0]), int(mesh.edges[e, 1])):
            degree[w] -= 1
            if degree[w] == 1:
                leaves.append(w)

    if not cut.any():
        # Sphere: open a two-edge slit inside face 0.
        cut[mesh.edge_of_halfedge[0]] = True
        cut[mesh.edge_of_halfedge[1]] = True

    disk, graph = slice_along_edges(mesh, np.nonzero(cut)[0])
    if euler_characteristic(disk) != 1 or len(disk.boundary_loops) != 1:
        raise TopologyError(
            "internal error: cut mesh is not a disk "
            f"(chi={euler_characteristic(disk)}, "
            f"boundaries={len(disk.boundary_loops)})")
    return disk, graph
