"""Newton-type optimization of the discrete Yamabe energy in Euclidean and
hyperbolic background geometry: analytic Hessian assembly, preconditioned
conjugate-gradient solves, step damping, edge-swap surgery and convergence
reporting.

Sign convention: the assembled Hessian is the curvature Jacobian
``H = dK/du``, so a Newton iteration solves ``H du = Kbar - K`` and updates
``u += du``. In the Euclidean case every row of H sums to zero (global
scaling leaves angles unchanged) and the system is solved on the zero-mean
subspace; in the hyperbolic case H is positive definite and solved directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FlowError, MetricError, SolverError, SurgeryError
from .geom import (
    hyperbolic_distance,
    hyperbolic_segment_real_axis_crossing,
    place_third_euclidean,
    place_third_hyperbolic,
)
from .mesh import build_mesh
from .metric import (
    DiscreteMetric,
    Geometry,
    check_triangle_inequality,
    corner_angles,
    deform_metric,
    opposite_lengths,
    vertex_curvature,
)

# failed step halvings before edge-swap surgery is attempted
_SURGERY_AFTER_HALVINGS = 5


@dataclass(frozen=True)
class FlowOptions:
    """Knobs of the Newton iteration."""

    eps: float = 1e-8
    max_iterations: int = 50
    max_halvings: int = 20
    linear_tol: float = 1e-12
    surgery: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_iterations < 1 or self.max_halvings < 1:
            raise ValueError("iteration bounds must be >= 1")
        if not self.linear_tol > 0:
            raise ValueError("linear_tol must be positive")


@dataclass
class FlowReport:
    """Convergence record; ``residuals`` has ``iterations + 1`` entries
    (the leading one is the initial residual)."""

    residuals: list
    iterations: int
    swaps: int
    halvings: int
    u: np.ndarray
    converged: bool
    u_history: list = field(default_factory=list, repr=False)

    def to_json_dict(self):
        return {
            "iterations": self.iterations,
            "residuals": [float(r) for r in self.residuals],
            "swaps": self.swaps,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class FlowResult:
    """Outcome of :func:`run_flow`. ``mesh`` differs from the input only when
    edge-swap surgery fired; ``base`` is the undeformed metric on that mesh,
    so ``deform_metric(mesh, base, u)`` reproduces ``metric``."""

    mesh: object
    metric: DiscreteMetric
    base: DiscreteMetric
    u: np.ndarray
    report: FlowReport


def angle_derivatives(metric, mesh, angles=None):
    """Per-face matrix ``D[f, a, b] = d(theta_a) / d(u_b)`` of corner-angle
    derivatives with respect to the conformal factors, at the current metric.

    Euclidean: ``d(theta_i)/d(u_j) = cot(theta_k)`` and
    ``d(theta_i)/d(u_i) = -cot(theta_j) - cot(theta_k)``.

    Hyperbolic (with ``c_m = cosh(y_m)`` of the current lengths and the
    symmetric ``A = sin(theta_k) sinh(y_i) sinh(y_j)``):
    ``d(theta_i)/d(u_j) = 2 (c_i + c_j - c_k - 1) / (A (c_k + 1))`` and
    ``d(theta_i)/d(u_i) = -2 (2 c_i c_j c_k - c_j^2 - c_k^2 + c_i c_j
    + c_i c_k - c_j - c_k) / (A (c_j + 1)(c_k + 1))``.
    The factor 2 comes from ``d(y_i)/d(u_j) = 2 tanh(y_i / 2)`` under the
    half-length deformation rule; it is validated against finite differences
    in the test suite.
    """
    if angles is None:
        angles = corner_angles(metric, mesh)
    nf = mesh.n_faces
    D = np.empty((nf, 3, 3))
    others = ((1, 2), (0, 2), (0, 1))
    if metric.geometry == Geometry.EUCLIDEAN:
        cot = np.cos(angles) / np.sin(angles)
        for a in range(3):
            b, k = others[a]
            D[:, a, b] = cot[:, k]
            D[:, a, k] = cot[:, b]
            D[:, a, a] = -cot[:, b] - cot[:, k]
        return D
    y = opposite_lengths(metric, mesh)
    c = np.cosh(y)
    area = np.sin(angles[:, 0]) * np.sinh(y[:, 1]) * np.sinh(y[:, 2])
    for a in range(3):
        b, k = others[a]
        D[:, a, b] = 2.0 * (c[:, a] + c[:, b] - c[:, k] - 1.0) / (area * (c[:, k] + 1.0))
        D[:, a, k] = 2.0 * (c[:, a] + c[:, k] - c[:, b] - 1.0) / (area * (c[:, b] + 1.0))
        num = (2.0 * c[:, a] * c[:, b] * c[:, k]
               - c[:, b] ** 2 - c[:, k] ** 2
               + c[:, a] * c[:, b] + c[:, a] * c[:, k]
               - c[:, b] - c[:, k])
        D[:, a, a] = -2.0 * num / (area * (c[:, b] + 1.0) * (c[:, k] + 1.0))
    return D


def assemble_hessian(mesh, metric, u=None, angles=None):
    """Sparse curvature Jacobian ``H = dK/du`` (CSR, symmetric).

    When ``u`` is given the metric is deformed first. Off-diagonal entries
    exist only on edges; each face contributes one value per unordered corner
    pair, so symmetry is exact by construction.
    """
    if u is not None:
        metric = deform_metric(mesh, metric, u)
    D = angle_derivatives(metric, mesh, angles=angles)
    f = mesh.faces
    rows = [f[:, 0], f[:, 1], f[:, 0], f[:, 2], f[:, 1], f[:, 2],
            f[:, 0], f[:, 1], f[:, 2]]
    cols = [f[:, 1], f[:, 0], f[:, 2], f[:, 0], f[:, 2], f[:, 1],
            f[:, 0], f[:, 1], f[:, 2]]
    w01, w02, w12 = -D[:, 0, 1], -D[:, 0, 2], -D[:, 1, 2]
    vals = [w01, w01, w02, w02, w12, w12,
            -D[:, 0, 0], -D[:, 1, 1], -D[:, 2, 2]]
    n = mesh.n_vertices
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    return H.tocsr()


def newton_step(H, residual, geometry, options=FlowOptions()):
    """Solve ``H du = residual`` (= Kbar - K) by Jacobi-preconditioned
    conjugate gradients.

    Euclidean systems are singular with kernel spanned by the constant
    vector; right-hand side, preconditioner and solution are projected onto
    the zero-mean subspace. Raises :class:`SolverError` if the relative
    residual is not reduced below ``options.linear_tol`` within ``10 n``
    iterations.
    """
    n = H.shape[0]
    b = np.asarray(residual, dtype=np.float64).copy()
    euclidean = geometry == Geometry.EUCLIDEAN
    if euclidean:
        b -= b.mean()
    if not np.any(b):
        return np.zeros(n)

    diag = H.diagonal()
    inv_diag = np.where(diag > np.finfo(float).tiny, 1.0 / diag, 1.0)

    if euclidean:
        def precondition(v):
            w = v - v.mean()
            w = inv_diag * w
            return w - w.mean()
    else:
        def precondition(v):
            return inv_diag * v

    M = spla.LinearOperator((n, n), matvec=precondition)
    x, info = spla.cg(H, b, rtol=options.linear_tol, atol=0.0,
                      maxiter=10 * n, M=M)
    if info != 0:
        raise SolverError(f"conjugate gradients stagnated (info={info})")
    if euclidean:
        x = x - x.mean()
    return x


# ---------------------------------------------------------------------------
# Edge-swap surgery


def _face_lengths(mesh, metric, f):
    e = mesh.edge_of_halfedge[3 * f:3 * f + 3]
    return metric.lengths[e]


def edge_swap(mesh, metric, edge):
    """Replace the diagonal of the two faces meeting at ``edge`` with the
    opposite diagonal of their quad.

    The quad is laid out isometrically in the metric's background geometry to
    measure the new diagonal. Raises :class:`SurgeryError` when the edge is
    on the boundary, the swap would duplicate an existing edge, the quad is
    non-convex, or a new face would violate the triangle inequality.
    Returns the updated mesh and metric (edge ids are re-derived).
    """
    h1, h2 = (int(x) for x in mesh.edge_halfedges[edge])
    if h2 < 0:
        raise SurgeryError(f"edge {edge} is on the boundary")
    i, j = int(mesh.origin(h1)), int(mesh.dest(h1))
    k = int(mesh.dest(mesh.next(h1)))
    l = int(mesh.dest(mesh.next(h2)))

    d = float(metric.lengths[edge])
    l_ik = float(metric.lengths[mesh.edge_of_halfedge[mesh.prev(h1)]])
    l_jk = float(metric.lengths[mesh.edge_of_halfedge[mesh.next(h1)]])
    l_il = float(metric.lengths[mesh.edge_of_halfedge[mesh.next(h2)]])
    l_jl = float(metric.lengths[mesh.edge_of_halfedge[mesh.prev(h2)]])

    if mesh.edge_id(k, l) >= 0:
        raise SurgeryError(f"swap of edge {edge} would duplicate edge "
                           f"({k}, {l})")

    if metric.geometry == Geometry.EUCLIDEAN:
        pk = place_third_euclidean(0.0, d + 0j, l_ik, l_jk)
        pl = np.conj(place_third_euclidean(0.0, d + 0j, l_il, l_jl))
        if pk.imag <= 0.0 or pl.imag >= 0.0:
            raise SurgeryError(f"degenerate quad at edge {edge}")
        cross = (pk.real * (-pl.imag) + pl.real * pk.imag) / (pk.imag - pl.imag)
        if not 0.0 < cross < d:
            raise SurgeryError(f"non-convex quad at edge {edge}")
        new_len = float(abs(pk - pl))
    else:
        base = np.tanh(0.5 * d)
        pk = place_third_hyperbolic(0.0 + 0j, base + 0j, l_ik, l_jk)
        pl = np.conj(place_third_hyperbolic(0.0 + 0j, base + 0j, l_il, l_jl))
        if pk.imag <= 0.0 or pl.imag >= 0.0:
            raise SurgeryError(f"degenerate quad at edge {edge}")
        cross = hyperbolic_segment_real_axis_crossing(pk, pl)
        if cross is None or not 0.0 < cross < base:
            raise SurgeryError(f"non-convex quad at edge {edge}")
        new_len = float(hyperbolic_distance(pk, pl))
    if not np.isfinite(new_len) or new_len <= 0.0:
        raise SurgeryError(f"degenerate new diagonal at edge {edge}")

    new_faces = mesh.faces.copy()
    new_faces[h1 // 3] = (i, l, k)
    new_faces[h2 // 3] = (j, k, l)
    new_mesh = build_mesh(new_faces, positions=mesh.positions)

    pair_len = {frozenset((int(a), int(b))): float(x)
                for (a, b), x in zip(mesh.edges, metric.lengths)}
    del pair_len[frozenset((i, j))]
    pair_len[frozenset((k, l))] = new_len
    new_lengths = np.array([pair_len[frozenset((int(a), int(b)))]
                            for a, b in new_mesh.edges])
    new_metric = DiscreteMetric(metric.geometry, new_lengths, checked=False)

    for f in (h1 // 3, h2 // 3):
        a, b, c = np.sort(_face_lengths(new_mesh, new_metric, f))[::-1]
        if a >= b + c:
            raise SurgeryError(
                f"swap of edge {edge} produced an invalid face {f}")
    return new_mesh, new_metric


def _undeform_length(geometry, length, s):
    """Base length whose deformation by endpoint-factor sum ``s`` gives
    ``length``."""
    if geometry == Geometry.EUCLIDEAN:
        return length * np.exp(-s)
    return 2.0 * np.arcsinh(np.sinh(0.5 * length) * np.exp(-s))


# ---------------------------------------------------------------------------
# The flow proper


class _FlowState:
    """Mutable bundle (mesh, base metric, u) tracked across surgery."""

    def __init__(self, mesh, base, u):
        self.mesh = mesh
        self.base = base
        self.u = u

    def deformed(self, u=None):
        return deform_metric(self.mesh, self.base, self.u if u is None else u)

    def apply_swaps(self, current, edges_by_pair):
        """Swap the given edges (identified by vertex pairs) on the current
        deformed metric; rebuilds the base metric so the accumulated ``u``
        stays valid. Returns the number of successful swaps."""
        done = 0
        cur = current
        for pair in edges_by_pair:
            e = self.mesh.edge_id(*pair)
            if e < 0:
                continue
            try:
                new_mesh, new_cur = edge_swap(self.mesh, cur, e)
            except SurgeryError:
                continue
            pair_base = {frozenset((int(a), int(b))): float(x)
                         for (a, b), x in zip(self.mesh.edges, self.base.lengths)}
            self.mesh = new_mesh
            cur = new_cur
            base_lengths = np.empty(new_mesh.n_edges)
            for e2, (a, b) in enumerate(new_mesh.edges):
                key = frozenset((int(a), int(b)))
                if key in pair_base:
                    base_lengths[e2] = pair_base[key]
                else:
                    s = self.u[int(a)] + self.u[int(b)]
                    base_lengths[e2] = _undeform_length(
                        cur.geometry, float(cur.lengths[e2]), s)
            self.base = DiscreteMetric(cur.geometry, base_lengths, checked=False)
            done += 1
        return done


def run_flow(mesh, metric, target, geometry, options=FlowOptions()):
    """Drive the discrete metric to the prescribed curvature by damped
    Newton iterations.

    Each iteration deforms the lengths by the accumulated conformal factor,
    assembles the curvature Jacobian, solves for the Newton direction and
    backtracks (halving the step) until the deformed metric is admissible and
    the max-norm residual decreases. After ``5`` failed halvings edge-swap
    surgery is attempted on the longest edge of every violating face.
    Iteration stops when ``max |Kbar - K| < options.eps``.

    ``target`` must satisfy the Euclidean Gauss-Bonnet identity
    ``sum(Kbar) = 2 pi chi`` (to 1e-9); hyperbolic targets are not
    pre-checked since the area term is flow-dependent.

    Returns a :class:`FlowResult`; raises :class:`FlowError` on an infeasible
    target, a failed line search, or a non-converged budget, with the partial
    report attached.
    """
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (mesh.n_vertices,):
        raise ValueError("target must assign one curvature per vertex")
    metric = metric.retagged(geometry)
    violations = check_triangle_inequality(metric, mesh)
    if violations:
        raise MetricError(
            f"initial metric violates triangle inequality on faces "
            f"{violations[:16]}", faces=violations)
    chi = mesh.n_vertices - mesh.n_edges + mesh.n_faces
    if geometry == Geometry.EUCLIDEAN:
        defect = abs(float(target.sum()) - 2.0 * np.pi * chi)
        if defect > 1e-9:
            raise FlowError(
                f"target curvature violates Gauss-Bonnet: sum(Kbar) deviates "
                f"from 2 pi chi by {defect:.3e}")

    state = _FlowState(mesh, metric, np.zeros(mesh.n_vertices))
    current = state.deformed()
    angles = corner_angles(current, state.mesh)
    K = vertex_curvature(angles, state.mesh)
    res = float(np.max(np.abs(target - K)))

    residuals = [res]
    u_history = [state.u.copy()]
    swaps = 0
    halvings = 0
    iterations = 0

    while res >= options.eps and iterations < options.max_iterations:
        H = assemble_hessian(state.mesh, current, angles=angles)
        du = newton_step(H, target - K, geometry, options)

        accepted = False
        surgery_progress = False
        surgery_tried = False
        saw_admissible = False
        halv = 0
        while halv <= options.max_halvings:
            step = 0.5 ** halv
            u_try = state.u + step * du
            try:
                trial = state.deformed(u_try)
                trial_violations = check_triangle_inequality(trial, state.mesh)
            except MetricError:
                trial_violations = None
            if trial_violations:
                if (options.surgery and not surgery_tried
                        and halv >= _SURGERY_AFTER_HALVINGS):
                    surgery_tried = True
                    pairs = _longest_edge_pairs(state.mesh, trial,
                                                trial_violations)
                    n_done = state.apply_swaps(current, pairs)
                    if n_done:
                        # Connectivity changed: recompute the state at the
                        # unchanged u and restart with a fresh Hessian.
                        swaps += n_done
                        current = state.deformed()
                        angles = corner_angles(current, state.mesh)
                        K = vertex_curvature(angles, state.mesh)
                        res = float(np.max(np.abs(target - K)))
                        surgery_progress = True
                        break
                halv += 1
                halvings += 1
                continue
            if trial_violations is None:
                halv += 1
                halvings += 1
                continue
            saw_admissible = True
            trial_angles = corner_angles(trial, state.mesh)
            K_try = vertex_curvature(trial_angles, state.mesh)
            res_try = float(np.max(np.abs(target - K_try)))
            if res_try < res:
                state.u = u_try
                current = trial
                angles = trial_angles
                K = K_try
                res = res_try
                accepted = True
                break
            halv += 1
            halvings += 1

        if not accepted and not surgery_progress:
            report = _make_report(residuals, iterations, swaps, halvings,
                                  state.u, False, u_history)
            if not saw_admissible:
                detail = (" and surgery is disabled" if not options.surgery
                          else "")
                raise FlowError(
                    "deformed metric inadmissible at every step length"
                    + detail, report=report)
            raise FlowError(
                "line search failed to reduce the curvature residual",
                report=report)

        iterations += 1
        residuals.append(res)
        u_history.append(state.u.copy())

    converged = res < options.eps
    report = _make_report(residuals, iterations, swaps, halvings, state.u,
                          converged, u_history)
    if not converged:
        raise FlowError(
            f"flow did not converge within {options.max_iterations} "
            f"iterations (residual {res:.3e})", report=report)
    final = DiscreteMetric(current.geometry, current.lengths, checked=True)
    return FlowResult(mesh=state.mesh, metric=final, base=state.base,
                      u=state.u, report=report)


def _longest_edge_pairs(mesh, metric, faces):
    """Vertex pairs of the longest edge of each listed face, deduplicated,
    in face order."""
    pairs = []
    seen = set()
    for f in faces:
        e_local = mesh.edge_of_halfedge[3 * f:3 * f + 3]
        e = int(e_local[np.argmax(metric.lengths[e_local])])
        a, b = (int(x) for x in mesh.edges[e])
        key = frozenset((a, b))
        if key not in seen:
            seen.add(key)
            pairs.append((a, b))
    return pairs


def _make_report(residuals, iterations, swaps, halvings, u, converged,
                 u_history):
    return FlowReport(residuals=list(residuals), iterations=iterations,
                      swaps=swaps, halvings=halvings, u=u.copy(),
                      converged=converged, u_history=[v.copy() for v in u_history])
