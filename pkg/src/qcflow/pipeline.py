"""End-to-end parameterization pipelines: target-curvature presets, the
conformal flatten, the quasi-conformal map driven by a Beltrami field, map
estimation/composition/comparison, and a mesh validity report.

All pipelines are deterministic: identical inputs produce bit-identical
outputs.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .beltrami import (
    BeltramiField,
    Parameterization,
    auxiliary_metric,
    compose_beltrami,
    estimate_beltrami,
    map_distance,
)
from .errors import BeltramiError, PresetError, SurgeryError
from .flow import FlowOptions, edge_swap, run_flow
from .mesh import cut_to_disk, euler_characteristic, slice_along_edges
from .metric import (
    DiscreteMetric,
    Geometry,
    check_triangle_inequality,
    corner_angles,
    gauss_bonnet_residual,
    induced_metric,
)
from .embed import layout_euclidean, layout_hyperbolic, torus_periods

_PRE_SURGERY_ROUNDS = 50


class PresetKind(enum.Enum):
    RECTANGLE = "rectangle"
    ANNULUS = "annulus"
    FREE_DISK = "free-disk"
    CLOSED_FLAT = "closed-flat"
    CLOSED_HYPERBOLIC = "closed-hyperbolic"


@dataclass(frozen=True)
class TargetPreset:
    """Target-curvature recipe plus its parameters (rectangle corners)."""

    kind: PresetKind
    corners: tuple = ()

    def __post_init__(self):
        if self.kind == PresetKind.RECTANGLE:
            if len(set(self.corners)) != 4:
                raise PresetError("rectangle preset needs 4 distinct corner ids")
        elif self.corners:
            raise PresetError(f"{self.kind.value} preset takes no corners")


def _loop_length(mesh, metric, loop):
    total = 0.0
    for a, b in zip(loop, loop[1:] + loop[:1]):
        total += float(metric.lengths[mesh.edge_id(a, b)])
    return total


def target_curvature(mesh, preset, metric=None):
    """Per-vertex target curvature for a preset; validates the topology.

    Rectangle: pi/2 at the four corners, zero elsewhere. Annulus: zero in the
    interior, ``2 pi / n`` on each outer-boundary vertex and ``-2 pi / n`` on
    each inner-boundary vertex (outer = metrically longer loop). Free disk:
    ``2 pi / n`` on the single boundary. Closed presets: identically zero.
    """
    chi = euler_characteristic(mesh)
    loops = mesh.boundary_loops
    K = np.zeros(mesh.n_vertices)
    kind = preset.kind
    if kind == PresetKind.RECTANGLE:
        if chi != 1 or len(loops) != 1:
            raise PresetError(
                f"rectangle preset needs a disk (chi={chi}, "
                f"boundaries={len(loops)})")
        boundary = set(loops[0])
        for c in preset.corners:
            if c not in boundary:
                raise PresetError(f"corner {c} is not a boundary vertex")
            K[c] = 0.5 * np.pi
    elif kind == PresetKind.ANNULUS:
        if chi != 0 or len(loops) != 2:
            raise PresetError(
                f"annulus preset needs an annulus (chi={chi}, "
                f"boundaries={len(loops)})")
        if metric is None:
            metric = induced_metric(mesh)
        lens = [_loop_length(mesh, metric, list(lp)) for lp in loops]
        outer = int(np.argmax(lens))
        for idx, lp in enumerate(loops):
            sign = 1.0 if idx == outer else -1.0
            K[list(lp)] = sign * 2.0 * np.pi / len(lp)
    elif kind == PresetKind.FREE_DISK:
        if chi != 1 or len(loops) != 1:
            raise PresetError(
                f"free-disk preset needs a disk (chi={chi}, "
                f"boundaries={len(loops)})")
        K[list(loops[0])] = 2.0 * np.pi / len(loops[0])
    elif kind == PresetKind.CLOSED_FLAT:
        if loops or chi != 0:
            raise PresetError(
                f"closed-flat preset needs a closed genus-1 mesh (chi={chi}, "
                f"boundaries={len(loops)})")
    elif kind == PresetKind.CLOSED_HYPERBOLIC:
        if loops or chi >= 0:
            raise PresetError(
                "closed-hyperbolic preset needs a closed genus >= 2 mesh "
                f"(chi={chi}, boundaries={len(loops)})")
    return K


def preset_geometry(preset):
    return (Geometry.HYPERBOLIC if preset.kind == PresetKind.CLOSED_HYPERBOLIC
            else Geometry.EUCLIDEAN)


def _order_corners(mesh, corners):
    loop = list(mesh.boundary_loops[0])
    pos = {v: i for i, v in enumerate(loop)}
    start = pos[corners[0]]
    ordered = sorted(corners, key=lambda c: (pos[c] - start) % len(loop))
    return ordered


def normalize_rectangle(param, mesh, corners):
    """Similarity transform putting corner 0 at the origin and corner 1 at
    1 + 0i (unit width); returns the transformed parameterization and the
    height (the conformal module)."""
    ordered = _order_corners(mesh, corners)
    z = param.coords
    z0 = z[ordered[0]]
    w = z[ordered[1]] - z0
    out = (z - z0) / w
    h2 = out[ordered[2]].imag
    h3 = out[ordered[3]].imag
    return Parameterization(out, param.geometry), 0.5 * (h2 + h3), ordered


def _boundary_slit_path(mesh):
    """Deterministic interior edge path joining the two boundary loops (used
    to open an annulus into a disk). Breadth-first from the first loop
    through interior edges and interior vertices only."""
    loops = mesh.boundary_loops
    boundary = mesh.boundary_vertex_mask()
    targets = set(loops[1])
    parent = {v: None for v in sorted(loops[0])}
    queue = deque(sorted(loops[0]))
    hit = None
    while queue and hit is None:
        v = queue.popleft()
        for h in mesh.outgoing_halfedges(v):
            e = int(mesh.edge_of_halfedge[h])
            if mesh.edge_halfedges[e, 1] < 0:
                continue  # the slit must be made of interior edges
            w = int(mesh.dest(h))
            if w in parent:
                continue
            if w in targets:
                parent[w] = (v, e)
                hit = w
                break
            if boundary[w]:
                continue  # path may not run along a boundary loop
            parent[w] = (v, e)
            queue.append(w)
    if hit is None:
        raise PresetError("no interior path between the two boundary loops")
    edges = []
    v = hit
    while parent[v] is not None:
        v, e = parent[v]
        edges.append(e)
    return edges


@dataclass
class FlattenResult:
    """Everything a pipeline run produces. ``mesh`` is the laid-out mesh
    (cut open for closed inputs, re-triangulated if surgery fired);
    ``param`` indexes its vertices."""

    mesh: object
    param: Parameterization
    flow: object
    module: float | None = None
    periods: object = None
    cut: object = None
    report: dict = field(default_factory=dict)


def _report_dict(geometry, preset, flow_result, module=None, periods=None,
                 extra=None):
    doc = {
        "geometry": geometry.value,
        "preset": preset.kind.value,
        "flow": flow_result.report.to_json_dict(),
    }
    if module is not None:
        doc["module"] = module
    if periods is not None:
        doc["periods"] = periods.to_json_dict()
    if extra:
        doc.update(extra)
    return doc


def cmd_flatten(mesh, geometry, preset, options=FlowOptions(), metric=None):
    """Conformal flatten: induced metric -> Yamabe flow -> isometric layout
    -> preset-specific normalization.

    For the rectangle preset the reported ``module`` is the height of the
    unit-width rectangle image; for the annulus it is the inner/outer
    boundary length ratio of the flat metric.
    """
    if geometry != preset_geometry(preset):
        raise PresetError(
            f"{preset.kind.value} preset requires "
            f"{preset_geometry(preset).value} geometry")
    if metric is None:
        metric = induced_metric(mesh)
    target = target_curvature(mesh, preset, metric=metric)
    fr = run_flow(mesh, metric, target, geometry, options)
    kind = preset.kind

    if kind in (PresetKind.RECTANGLE, PresetKind.FREE_DISK):
        param = layout_euclidean(fr.mesh, fr.metric)
        if kind == PresetKind.RECTANGLE:
            param, module, _ = normalize_rectangle(param, fr.mesh,
                                                   preset.corners)
        else:
            z = param.coords
            center = z.mean()
            scale = np.abs(z - center).max()
            param = Parameterization((z - center) / scale, param.geometry)
            module = None
        report = _report_dict(geometry, preset, fr, module=module)
        return FlattenResult(mesh=fr.mesh, param=param, flow=fr,
                             module=module, report=report)

    if kind == PresetKind.ANNULUS:
        lens = sorted(_loop_length(fr.mesh, fr.metric, list(lp))
                      for lp in fr.mesh.boundary_loops)
        module = lens[0] / lens[1]
        slit = _boundary_slit_path(fr.mesh)
        disk, cut = slice_along_edges(fr.mesh, slit)
        cut_metric = DiscreteMetric(Geometry.EUCLIDEAN,
                                    cut.push_edge(fr.metric.lengths),
                                    checked=True)
        param = layout_euclidean(disk, cut_metric)
        report = _report_dict(geometry, preset, fr, module=module,
                              extra={"slit_edges": len(slit),
                                     "boundary_convention":
                                         "uniform 2pi/n outer, -2pi/n inner"})
        return FlattenResult(mesh=disk, param=param, flow=fr, module=module,
                             cut=cut, report=report)

    # Closed surfaces: cut to a disk, transfer the flat metric, lay out.
    disk, cut = cut_to_disk(fr.mesh)
    cut_metric = DiscreteMetric(geometry, cut.push_edge(fr.metric.lengths),
                                checked=True)
    if kind == PresetKind.CLOSED_FLAT:
        param = layout_euclidean(disk, cut_metric)
        periods = torus_periods(disk, cut, param)
        report = _report_dict(geometry, preset, fr, periods=periods)
        return FlattenResult(mesh=disk, param=param, flow=fr,
                             periods=periods, cut=cut, report=report)
    param = layout_hyperbolic(disk, cut_metric)
    report = _report_dict(geometry, preset, fr)
    return FlattenResult(mesh=disk, param=param, flow=fr, cut=cut,
                         report=report)


def _aux_metric_with_surgery(mesh, base_metric, z, mu, max_rounds=_PRE_SURGERY_ROUNDS):
    """Auxiliary metric on a possibly re-triangulated mesh.

    When the scaled lengths break a triangle inequality, the longest edge of
    each violating face is swapped (under the base metric, where the quad is
    admissible) and the auxiliary metric recomputed, up to ``max_rounds``.
    """
    cur_mesh, cur_base = mesh, base_metric
    for _ in range(max_rounds):
        aux = auxiliary_metric(cur_base, z, mu, cur_mesh)
        violations = check_triangle_inequality(aux, cur_mesh)
        if not violations:
            return cur_mesh, cur_base, aux
        progressed = False
        for f in violations:
            e_local = cur_mesh.edge_of_halfedge[3 * f:3 * f + 3]
            e = int(e_local[np.argmax(aux.lengths[e_local])])
            try:
                cur_mesh, cur_base = edge_swap(cur_mesh, cur_base, e)
            except SurgeryError:
                continue
            progressed = True
            break
        if not progressed:
            break
    raise BeltramiError(
        "auxiliary metric is inadmissible even after edge-swap surgery")


def cmd_qcmap(mesh, mu, geometry, preset, options=FlowOptions(), metric=None):
    """Quasi-conformal map with prescribed Beltrami field: conformal flatten
    (mu = 0) for the parameter ``z``, auxiliary metric, second flow, layout
    and normalization. With ``mu = 0`` the output equals :func:`cmd_flatten`
    bit-identically."""
    if not isinstance(mu, BeltramiField):
        mu = BeltramiField(np.asarray(mu))
    if metric is None:
        metric = induced_metric(mesh)
    metric = metric.retagged(Geometry.EUCLIDEAN)
    base = cmd_flatten(mesh, geometry, preset, options,
                       metric=metric.retagged(geometry))
    if preset.kind in (PresetKind.CLOSED_FLAT, PresetKind.CLOSED_HYPERBOLIC):
        return _qcmap_closed(mesh, mu, geometry, preset, options, base, metric)

    z = base.param
    qmesh, _, aux = _aux_metric_with_surgery(mesh, metric, z, mu)
    result = cmd_flatten(qmesh, geometry, preset, options, metric=aux)
    result.report["mu_max_modulus"] = mu.max_modulus
    result.report["conformal_module_mu0"] = base.module
    return result


def _qcmap_closed(mesh, mu, geometry, preset, options, base, metric):
    """Closed-surface variant: z lives on the cut mesh, so edge scales are
    computed there and pulled back. The two copies of a cut edge see the same
    |dz| under deck translations (consistent mu); the copies' scales are
    averaged, which also covers the Mobius-identified genus >= 2 case where
    exact cross-chart consistency is out of scope."""
    cut = base.cut
    mu_cut = BeltramiField(cut.push_vertex(mu.values))
    metric_cut = DiscreteMetric(Geometry.EUCLIDEAN,
                                cut.push_edge(metric.lengths), checked=True)
    aux_cut = auxiliary_metric(metric_cut, base.param, mu_cut, base.mesh)
    scale_cut = aux_cut.lengths / metric_cut.lengths
    num = np.zeros(mesh.n_edges)
    den = np.zeros(mesh.n_edges)
    np.add.at(num, cut.new_to_orig_edge, scale_cut)
    np.add.at(den, cut.new_to_orig_edge, 1.0)
    aux = DiscreteMetric(Geometry.EUCLIDEAN, metric.lengths * (num / den),
                         checked=False)
    violations = check_triangle_inequality(aux, mesh)
    if violations:
        raise BeltramiError(
            f"auxiliary metric inadmissible on faces {violations[:16]}")
    result = cmd_flatten(mesh, geometry, preset, options,
                         metric=aux.retagged(geometry))
    result.report["mu_max_modulus"] = mu.max_modulus
    return result


def cmd_estimate_mu(src_mesh, dst_mesh):
    """Beltrami coefficient of the map between two parameterized meshes with
    identical connectivity; returns the estimate plus CSV rows
    ``(re, im, arg, modulus, dilation)`` per vertex."""
    if not np.array_equal(src_mesh.faces, dst_mesh.faces):
        raise BeltramiError("source and target must share connectivity")
    if src_mesh.uv is None or dst_mesh.uv is None:
        raise BeltramiError("both OBJ files must carry per-vertex vt records")
    est = estimate_beltrami(src_mesh.uv, dst_mesh.uv, src_mesh)
    mu = est.vertex_mu.values
    mod = np.abs(mu)
    rows = np.column_stack([mu.real, mu.imag, np.angle(mu), mod,
                            (1.0 + mod) / (1.0 - mod)])
    return est, rows


def csv_text(rows):
    lines = ["re,im,arg,modulus,dilation"]
    for r in rows:
        lines.append(",".join(f"{x:.9g}" for x in r))
    return "\n".join(lines) + "\n"


def cmd_compose(mu_f, mu_g, f_src_mesh, f_dst_mesh):
    """Composition coefficient ``mu_{g o f}`` with ``tau`` derived from the
    supplied source/image pair of ``f`` (pull-back of ``mu_g`` is
    index-aliased: connectivity is shared across the pipeline)."""
    if not np.array_equal(f_src_mesh.faces, f_dst_mesh.faces):
        raise BeltramiError("f source and image must share connectivity")
    if f_src_mesh.uv is None or f_dst_mesh.uv is None:
        raise BeltramiError("f OBJ files must carry per-vertex vt records")
    est = estimate_beltrami(f_src_mesh.uv, f_dst_mesh.uv, f_src_mesh)
    return compose_beltrami(mu_f, mu_g, est.vertex_tau)


def cmd_compare(a_mesh, b_mesh, ref_mesh, threshold=None):
    """Normalized L1 distance between two parameterizations over a reference
    mesh; returns (distance, max pointwise deviation, within_threshold)."""
    if not (np.array_equal(a_mesh.faces, b_mesh.faces)
            and np.array_equal(a_mesh.faces, ref_mesh.faces)):
        raise BeltramiError("all three meshes must share connectivity")
    if a_mesh.uv is None or b_mesh.uv is None:
        raise BeltramiError("compared OBJ files must carry vt records")
    metric = induced_metric(ref_mesh)
    dist = map_distance(a_mesh.uv, b_mesh.uv, ref_mesh, metric)
    worst = float(np.abs(a_mesh.uv - b_mesh.uv).max())
    ok = threshold is None or dist < threshold
    return dist, worst, ok


def cmd_check(mesh):
    """Validity report: Euler characteristic, boundary census, Gauss-Bonnet
    residual of the induced metric, minimum corner angle, triangle-inequality
    violations."""
    doc = {
        "vertices": mesh.n_vertices,
        "edges": mesh.n_edges,
        "faces": mesh.n_faces,
        "chi": euler_characteristic(mesh),
        "boundaries": len(mesh.boundary_loops),
    }
    if mesh.positions is not None:
        metric = induced_metric(mesh)
        violations = check_triangle_inequality(metric, mesh)
        doc["violations"] = violations
        if not violations:
            angles = corner_angles(metric, mesh)
            doc["gauss_bonnet_residual"] = gauss_bonnet_residual(metric, mesh)
            doc["min_angle"] = float(angles.min())
    return doc
