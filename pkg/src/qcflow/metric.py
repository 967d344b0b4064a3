"""Discrete-metric algebra: cosine laws in Euclidean and hyperbolic
background geometry, corner angles, angle-deficit curvature, areas,
Gauss-Bonnet validation and conformal metric deformation.

Conventions: a metric assigns a positive length to every edge id of a mesh.
Per-vertex scalars (conformal factors, curvatures) are plain float arrays
indexed by vertex id. Corner angles are reported as an (F, 3) array where
column ``s`` is the angle at the face's ``s``-th vertex.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import MetricError

# cos arguments within this distance outside [-1, 1] are clamped; anything
# worse signals a genuinely broken metric and raises.
_COS_GUARD = 1e-9


class Geometry(enum.Enum):
    EUCLIDEAN = "euclidean"
    HYPERBOLIC = "hyperbolic"


@dataclass(frozen=True)
class DiscreteMetric:
    """Edge-length assignment plus background-geometry tag.

    ``checked`` records whether the caller has verified the per-face triangle
    inequalities; deformation returns unchecked metrics on purpose, because
    the flow loop must detect violations itself to trigger damping/surgery.
    """

    geometry: Geometry
    lengths: np.ndarray
    checked: bool = field(default=False, compare=False)

    def __post_init__(self):
        lengths = np.ascontiguousarray(self.lengths, dtype=np.float64)
        object.__setattr__(self, "lengths", lengths)
        if lengths.ndim != 1:
            raise MetricError("lengths must be a 1-d array over edge ids")
        if not np.isfinite(lengths).all():
            raise MetricError("metric contains non-finite lengths")
        if lengths.size and lengths.min() <= 0.0:
            raise MetricError("metric contains non-positive lengths")

    def retagged(self, geometry):
        """Same lengths reinterpreted in another background geometry."""
        if geometry == self.geometry:
            return self
        return DiscreteMetric(geometry, self.lengths, checked=self.checked)


def induced_metric(mesh):
    """Euclidean metric induced by the mesh's 3D embedding."""
    if mesh.positions is None:
        raise MetricError("mesh has no vertex positions")
    diff = mesh.positions[mesh.edges[:, 0]] - mesh.positions[mesh.edges[:, 1]]
    lengths = np.linalg.norm(diff, axis=1)
    zero = np.nonzero(lengths <= 0.0)[0]
    if zero.size:
        raise MetricError(f"zero-length edges {zero.tolist()}")
    return DiscreteMetric(Geometry.EUCLIDEAN, lengths, checked=True)


def opposite_lengths(metric, mesh):
    """(F, 3) array: entry ``[f, s]`` is the length of the edge opposite the
    face's ``s``-th corner."""
    per_halfedge = metric.lengths[mesh.edge_of_halfedge].reshape(-1, 3)
    return per_halfedge[:, [1, 2, 0]]


def check_triangle_inequality(metric, mesh):
    """Face ids violating the strict triangle inequality (empty iff
    admissible)."""
    L = opposite_lengths(metric, mesh)
    bad = (
        (L[:, 0] >= L[:, 1] + L[:, 2])
        | (L[:, 1] >= L[:, 2] + L[:, 0])
        | (L[:, 2] >= L[:, 0] + L[:, 1])
    )
    return np.nonzero(bad)[0].tolist()


def _safe_acos(arg, what):
    arg = np.asarray(arg)
    worst = float(np.max(np.abs(arg))) if arg.size else 0.0
    if worst > 1.0 + _COS_GUARD:
        faces = None
        if arg.ndim == 2:
            faces = np.nonzero(np.abs(arg).max(axis=1) > 1.0 + _COS_GUARD)[0]
        raise MetricError(f"{what}: cosine argument {worst} outside [-1, 1]",
                          faces=faces)
    return np.arccos(np.clip(arg, -1.0, 1.0))


def corner_angles(metric, mesh):
    """Corner angles of every face under the metric's cosine law.

    Euclidean faces satisfy angle sum pi; hyperbolic faces have angle sum
    strictly below pi. Raises :class:`MetricError` (with the offending faces)
    when a triangle inequality is violated.
    """
    violations = check_triangle_inequality(metric, mesh)
    if violations:
        raise MetricError(
            f"triangle inequality violated on faces {violations[:16]}"
            + ("..." if len(violations) > 16 else ""),
            faces=violations)
    L = opposite_lengths(metric, mesh)
    a = L
    b = np.roll(L, -1, axis=1)
    c = np.roll(L, -2, axis=1)
    if metric.geometry == Geometry.EUCLIDEAN:
        arg = (b * b + c * c - a * a) / (2.0 * b * c)
    else:
        arg = ((np.cosh(b) * np.cosh(c) - np.cosh(a))
               / (np.sinh(b) * np.sinh(c)))
    return _safe_acos(arg, "corner_angles")


def vertex_curvature(angles, mesh):
    """Discrete Gaussian curvature: 2*pi (interior) or pi (boundary) minus
    the incident corner-angle sum."""
    K = np.where(mesh.boundary_vertex_mask(), np.pi, 2.0 * np.pi)
    np.subtract.at(K, mesh.faces.ravel(), np.asarray(angles).ravel())
    return K


def triangle_area(geometry, l1, l2, l3):
    """Area of one triangle from its side lengths."""
    if geometry == Geometry.EUCLIDEAN:
        a, b, c = sorted((l1, l2, l3), reverse=True)
        s = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
        if s < 0.0:
            raise MetricError(f"triangle inequality violated: {(l1, l2, l3)}")
        return 0.25 * np.sqrt(s)
    arg1 = (np.cosh(l2) * np.cosh(l3) - np.cosh(l1)) / (np.sinh(l2) * np.sinh(l3))
    arg2 = (np.cosh(l3) * np.cosh(l1) - np.cosh(l2)) / (np.sinh(l3) * np.sinh(l1))
    arg3 = (np.cosh(l1) * np.cosh(l2) - np.cosh(l3)) / (np.sinh(l1) * np.sinh(l2))
    args = np.array([arg1, arg2, arg3])
    return float(np.pi - np.sum(_safe_acos(args, "triangle_area")))


def face_areas(metric, mesh, angles=None):
    """Areas of all faces: Heron's formula (Euclidean) or angle deficit
    pi - sum of angles (hyperbolic)."""
    if metric.geometry == Geometry.HYPERBOLIC:
        if angles is None:
            angles = corner_angles(metric, mesh)
        return np.pi - np.asarray(angles).sum(axis=1)
    L = np.sort(opposite_lengths(metric, mesh), axis=1)[:, ::-1]
    a, b, c = L[:, 0], L[:, 1], L[:, 2]
    s = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    bad = np.nonzero(s < 0.0)[0]
    if bad.size:
        raise MetricError(f"triangle inequality violated on faces {bad.tolist()}",
                          faces=bad)
    return 0.25 * np.sqrt(s)


def gauss_bonnet_residual(metric, mesh):
    """sum(K) + lambda * sum(area) - 2*pi*chi with lambda = 0 (Euclidean)
    or -1 (hyperbolic); approximately zero for every consistent metric."""
    angles = corner_angles(metric, mesh)
    K = vertex_curvature(angles, mesh)
    chi = mesh.n_vertices - mesh.n_edges + mesh.n_faces
    total = float(K.sum())
    if metric.geometry == Geometry.HYPERBOLIC:
        total -= float(face_areas(metric, mesh, angles=angles).sum())
    return total - 2.0 * np.pi * chi


def deform_metric(mesh, base, u):
    """Conformally deform a metric by per-vertex factors ``u``.

    Euclidean: ``L_ab = exp(u_a) * l_ab * exp(u_b)``.
    Hyperbolic: ``L_ab = 2 * asinh(exp(u_a + u_b) * sinh(l_ab / 2))``.

    The result is returned unchecked: it may violate triangle inequalities
    and callers must validate before using it.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (mesh.n_vertices,):
        raise ValueError("u must assign one factor per vertex")
    if not np.isfinite(u).all():
        raise MetricError("conformal factor contains non-finite values")
    s = u[mesh.edges[:, 0]] + u[mesh.edges[:, 1]]
    with np.errstate(over="raise"):
        try:
            if base.geometry == Geometry.EUCLIDEAN:
                lengths = base.lengths * np.exp(s)
            else:
                lengths = 2.0 * np.arcsinh(np.exp(s) * np.sinh(0.5 * base.lengths))
        except FloatingPointError as exc:
            raise MetricError(f"conformal deformation overflowed: {exc}") from exc
    if not np.isfinite(lengths).all():
        raise MetricError("conformal deformation overflowed")
    return DiscreteMetric(base.geometry, lengths, checked=False)
