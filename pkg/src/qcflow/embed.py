"""Isometric layout of flat and hyperbolic metrics: breadth-first
triangle-by-triangle flattening into the plane or the Poincare disk, plus
flat-torus period extraction from a cut-open layout.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .beltrami import Parameterization
from .errors import LayoutError, MetricError
from .geom import (
    hyperbolic_distance,
    place_third_euclidean,
    place_third_hyperbolic,
    poincare_circle_to_euclidean,
)
from .metric import (
    Geometry,
    check_triangle_inequality,
    corner_angles,
    vertex_curvature,
)

_FLATNESS_TOL = 1e-6


@dataclass(frozen=True)
class PoincareCircle:
    """Hyperbolic circle in the Poincare disk."""

    center: complex
    radius: float

    def __post_init__(self):
        if not (abs(self.center) < 1.0):
            raise ValueError("center must lie inside the unit disk")
        if not (np.isfinite(self.radius) and self.radius > 0.0):
            raise ValueError("radius must be positive and finite")


@dataclass(frozen=True)
class TorusPeriods:
    """Deck-lattice translations of a flattened genus-1 surface."""

    za: complex
    zb: complex

    def __post_init__(self):
        if abs((np.conj(self.za) * self.zb).imag) <= 0.0:
            raise ValueError("periods must be linearly independent over R")

    def to_json_dict(self):
        return {"za": [self.za.real, self.za.imag],
                "zb": [self.zb.real, self.zb.imag]}


def hyperbolic_circle_to_euclidean(circle):
    """Euclidean (center, radius) of a hyperbolic circle.

    Validated property: every point at hyperbolic distance ``r`` from the
    hyperbolic center lies on the returned Euclidean circle.
    """
    return poincare_circle_to_euclidean(circle.center, circle.radius)


def _check_disk(mesh):
    chi = mesh.n_vertices - mesh.n_edges + mesh.n_faces
    if chi != 1 or len(mesh.boundary_loops) != 1:
        raise LayoutError(
            f"layout requires a topological disk (chi={chi}, "
            f"boundaries={len(mesh.boundary_loops)})")


def _check_flat(mesh, angles):
    K = vertex_curvature(angles, mesh)
    interior = ~mesh.boundary_vertex_mask()
    if interior.any():
        worst = float(np.max(np.abs(K[interior])))
        if worst > _FLATNESS_TOL:
            v = int(np.argmax(np.abs(np.where(interior, K, 0.0))))
            raise LayoutError(
                f"interior vertex {v} has curvature {worst:.3e}; the metric "
                "must be flat to embed")


def _layout(mesh, metric, seed, place):
    angles = corner_angles(metric, mesh)
    _check_flat(mesh, angles)

    coords = np.full(mesh.n_vertices, np.nan + 0j, dtype=np.complex128)
    placed = np.zeros(mesh.n_vertices, dtype=bool)
    lengths = metric.lengths

    v0, v1, v2 = (int(v) for v in mesh.faces[0])
    l01 = float(lengths[mesh.edge_of_halfedge[0]])
    l12 = float(lengths[mesh.edge_of_halfedge[1]])
    l20 = float(lengths[mesh.edge_of_halfedge[2]])
    for v, z in zip((v0, v1, v2), seed(l01, l12, l20, angles[0])):
        coords[v] = z
        placed[v] = True

    done = np.zeros(mesh.n_faces, dtype=bool)
    done[0] = True
    queue = deque([0])
    while queue:
        f = queue.popleft()
        for s in range(3):
            t = int(mesh.twin[3 * f + s])
            if t < 0:
                continue
            g = t // 3
            if done[g]:
                continue
            free = [sc for sc in range(3) if not placed[mesh.faces[g, sc]]]
            if len(free) > 1:
                continue  # not ready; reached again through another edge
            if len(free) == 1:
                sc = free[0]
                va = int(mesh.faces[g, (sc + 1) % 3])
                vb = int(mesh.faces[g, (sc + 2) % 3])
                vc = int(mesh.faces[g, sc])
                la = float(lengths[mesh.edge_of_halfedge[3 * g + sc]])
                lb = float(lengths[mesh.edge_of_halfedge[3 * g + (sc + 2) % 3]])
                coords[vc] = place(coords[va], coords[vb], la, lb)
                placed[vc] = True
            done[g] = True
            queue.append(g)

    if not placed.all():
        raise LayoutError("mesh is not face-connected")
    return coords


def layout_euclidean(mesh, metric):
    """Isometric plane layout of a flat Euclidean metric on a disk.

    The first face is seeded with vertex 0 at the origin and vertex 1 on the
    positive real axis; every further vertex is placed breadth-first on the
    counter-clockwise side of an already-embedded edge. Every embedded edge
    reproduces its metric length (to roundoff-level drift).
    """
    if metric.geometry != Geometry.EUCLIDEAN:
        raise MetricError("layout_euclidean requires a Euclidean metric")
    _check_disk(mesh)
    bad = check_triangle_inequality(metric, mesh)
    if bad:
        raise MetricError(f"metric inadmissible on faces {bad[:16]}", faces=bad)

    def seed(l01, l12, l20, _angles):
        return (0.0 + 0j,
                l01 + 0j,
                place_third_euclidean(0.0 + 0j, l01 + 0j, l20, l12))

    coords = _layout(mesh, metric, seed, place_third_euclidean)
    return Parameterization(coords, Geometry.EUCLIDEAN)


def layout_hyperbolic(mesh, metric):
    """Poincare-disk layout of a hyperbolically flat metric on a disk.

    Seeds the first face at ``tau(v0) = 0``, ``tau(v1) = tanh(l01 / 2)``,
    ``tau(v2) = tanh(l02 / 2) e^{i theta_0}`` and propagates breadth-first by
    intersecting hyperbolic circles (converted to Euclidean circles),
    keeping each face's orientation positive.
    """
    if metric.geometry != Geometry.HYPERBOLIC:
        raise MetricError("layout_hyperbolic requires a hyperbolic metric")
    _check_disk(mesh)
    bad = check_triangle_inequality(metric, mesh)
    if bad:
        raise MetricError(f"metric inadmissible on faces {bad[:16]}", faces=bad)

    def seed(l01, l12, l20, face_angles):
        return (0.0 + 0j,
                np.tanh(0.5 * l01) + 0j,
                np.tanh(0.5 * l20) * np.exp(1j * face_angles[0]))

    coords = _layout(mesh, metric, seed, place_third_hyperbolic)
    radius = np.abs(coords)
    if radius.max() >= 1.0:
        raise LayoutError(
            f"layout escaped the unit disk (max |tau| = {radius.max():.6f})")
    return Parameterization(coords, Geometry.HYPERBOLIC)


def embedded_edge_lengths(mesh, param):
    """Length of every edge as embedded by the parameterization, in the
    parameterization's own geometry."""
    za = param.coords[mesh.edges[:, 0]]
    zb = param.coords[mesh.edges[:, 1]]
    if param.geometry == Geometry.HYPERBOLIC:
        return hyperbolic_distance(za, zb)
    return np.abs(za - zb)


def torus_periods(mesh, cut, layout, tol=1e-6):
    """Deck translations of a flattened genus-1 surface cut along two loops.

    Every cut edge has two copies in the cut-open layout; their images must
    differ by a single constant translation per loop (checked against ``tol``
    times the layout diameter). The two shortest independent translations are
    returned as the lattice basis.
    """
    z = np.asarray(getattr(layout, "coords", layout), dtype=np.complex128)
    finite = z[np.isfinite(z)]
    scale = float(np.abs(finite - finite.mean()).max()) * 2.0 or 1.0

    translations = []
    for oe, ((a1, b1), (a2, b2)) in sorted(cut.edge_copy_pairs.items()):
        t1 = z[a2] - z[a1]
        t2 = z[b2] - z[b1]
        if abs(t1 - t2) > tol * scale:
            raise LayoutError(
                f"cut edge {oe}: copies differ by a non-constant translation "
                f"({t1:.6g} vs {t2:.6g})")
        translations.append(0.5 * (t1 + t2))

    clusters = []  # [sum, count]
    for t in translations:
        if abs(t) <= tol * scale:
            continue
        if t.real < -tol * scale or (abs(t.real) <= tol * scale and t.imag < 0.0):
            t = -t
        for c in clusters:
            if abs(t - c[0] / c[1]) <= 10.0 * tol * scale:
                c[0] += t
                c[1] += 1
                break
        else:
            clusters.append([t, 1])
    means = sorted((c[0] / c[1] for c in clusters),
                   key=lambda w: (abs(w), w.real, w.imag))

    if len(means) not in (2, 3):
        raise LayoutError(
            f"expected two independent cut loops, found {len(means)} "
            "distinct translations")
    za, zb = means[0], means[1]
    if len(means) == 3:
        t3 = means[2]
        combos = [za + zb, za - zb]
        if not any(abs(t3 - w) <= 10.0 * tol * scale or
                   abs(t3 + w) <= 10.0 * tol * scale for w in combos):
            raise LayoutError(
                "three cut-loop translations are not lattice-consistent")
    if abs((np.conj(za) * zb).imag) <= tol * scale * scale:
        raise LayoutError("cut-loop translations are linearly dependent")

    # Lagrange-Gauss reduction: the cut loops give *a* basis of the deck
    # lattice; return the canonical shortest one.
    za, zb = complex(za), complex(zb)
    while True:
        if abs(za) > abs(zb):
            za, zb = zb, za
        shift = round((np.conj(za) * zb).real / abs(za) ** 2)
        if shift == 0:
            break
        zb = zb - shift * za
    return TorusPeriods(za, zb)
