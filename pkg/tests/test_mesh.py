import numpy as np
import pytest

import meshes
from qcflow.errors import MetricError, ParseError, TopologyError
from qcflow.mesh import (
    build_mesh,
    cut_to_disk,
    euler_characteristic,
    load_obj,
    save_obj,
    slice_along_edges,
)
from qcflow.metric import induced_metric


def test_load_single_triangle(tmp_path):
    path = tmp_path / "tri.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    mesh = load_obj(path)
    assert mesh.n_vertices == 3
    assert mesh.n_faces == 1
    assert np.count_nonzero(mesh.twin < 0) == 3
    assert len(mesh.boundary_loops) == 1


def test_load_tetrahedron(tmp_path, tetra):
    path = tmp_path / "tet.obj"
    save_obj(tetra, path)
    mesh = load_obj(path)
    assert mesh.n_vertices == 4
    assert mesh.n_faces == 4
    assert mesh.boundary_loops == ()


def test_load_rejects_inconsistent_orientation(tmp_path):
    path = tmp_path / "bad.obj"
    # both faces traverse the shared edge 1->2 in the same direction
    path.write_text(
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 1 2 4\n")
    with pytest.raises(TopologyError):
        load_obj(path)


def test_load_rejects_bad_index(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n")
    with pytest.raises(ParseError):
        load_obj(path)


def test_load_rejects_quad(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(ParseError):
        load_obj(path)


def test_load_rejects_malformed_vertex(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 zero 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    with pytest.raises(ParseError):
        load_obj(path)


def test_save_load_round_trip(tmp_path, grid9):
    path = tmp_path / "grid.obj"
    save_obj(grid9, path)
    again = load_obj(path)
    assert np.array_equal(again.faces, grid9.faces)
    assert np.abs(again.positions - grid9.positions).max() < 1e-9
    # re-saving reproduces the file byte for byte
    path2 = tmp_path / "grid2.obj"
    save_obj(again, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_save_with_uv_round_trip(tmp_path, grid9):
    uv = grid9.positions[:, 0] + 1j * grid9.positions[:, 1]
    path = tmp_path / "uv.obj"
    save_obj(grid9, path, uv=uv)
    text = path.read_text()
    assert text.count("\nvt ") == grid9.n_vertices
    again = load_obj(path)
    assert again.uv is not None
    assert np.abs(again.uv - uv).max() < 1e-9


def test_save_unwritable_path(grid9):
    with pytest.raises(OSError):
        save_obj(grid9, "/nonexistent-dir/x.obj")


def test_euler_characteristic(tetra, grid9):
    assert euler_characteristic(tetra) == 2
    assert euler_characteristic(grid9) == 1
    torus, _ = meshes.torus_grid(8, 8)
    assert euler_characteristic(torus) == 0


def test_halfedge_invariants(grid9, tetra, sphere2):
    for mesh in (grid9, tetra, sphere2):
        h = np.arange(mesh.n_halfedges)
        interior = mesh.twin >= 0
        assert np.array_equal(mesh.twin[mesh.twin[interior]], h[interior])
        nxt = mesh.next(mesh.next(mesh.next(h)))
        assert np.array_equal(nxt, h)
        assert mesh.faces.size == 3 * mesh.n_faces


def test_boundary_loop_of_grid(grid9):
    assert len(grid9.boundary_loops) == 1
    loop = grid9.boundary_loops[0]
    assert len(loop) == 4 * 8
    assert len(set(loop)) == len(loop)


def test_rejects_nonmanifold_edge():
    faces = np.array([[0, 1, 2], [1, 0, 3], [0, 1, 4]])
    with pytest.raises(TopologyError):
        build_mesh(faces)


def test_rejects_repeated_vertex_in_face():
    with pytest.raises(TopologyError):
        build_mesh(np.array([[0, 1, 1]]))


def test_rejects_bowtie_vertex():
    # two triangle fans sharing only vertex 0
    faces = np.array([[0, 1, 2], [0, 3, 4]])
    with pytest.raises(TopologyError):
        build_mesh(faces)


def test_induced_metric_right_triangle():
    mesh = build_mesh(np.array([[0, 1, 2]]),
                      np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]))
    metric = induced_metric(mesh)
    assert sorted(metric.lengths) == pytest.approx([1.0, 1.0, np.sqrt(2)])


def test_induced_metric_equilateral():
    mesh = build_mesh(np.array([[0, 1, 2]]),
                      np.array([[0.0, 0, 0], [2, 0, 0], [1, np.sqrt(3), 0]]))
    metric = induced_metric(mesh)
    assert metric.lengths == pytest.approx([2.0, 2.0, 2.0])


def test_induced_metric_zero_edge():
    mesh = build_mesh(np.array([[0, 1, 2]]),
                      np.array([[0.0, 0, 0], [0, 0, 0], [0, 1, 0]]))
    with pytest.raises(MetricError):
        induced_metric(mesh)


def test_cut_tetrahedron_to_disk(tetra):
    disk, cut = cut_to_disk(tetra)
    assert euler_characteristic(disk) == 1
    assert len(disk.boundary_loops) == 1
    assert disk.n_faces == tetra.n_faces


def test_cut_torus_to_disk(torus16):
    mesh, _ = torus16
    disk, cut = cut_to_disk(mesh)
    assert euler_characteristic(disk) == 1
    assert len(disk.boundary_loops) == 1
    # The pruned cut graph deformation-retracts the torus: chi = -1, so it is
    # either a wedge of two loops (one degree-4 vertex) or a theta graph
    # (two degree-3 vertices); every other vertex has degree 2.
    degree = {}
    for e in cut.cut_edges:
        for v in mesh.edges[e]:
            degree[int(v)] = degree.get(int(v), 0) + 1
    assert min(degree.values()) >= 2
    vertices = len(degree)
    assert len(cut.cut_edges) - vertices == 1
    high = sorted(d for d in degree.values() if d > 2)
    assert high in ([4], [3, 3])


def test_cut_open_mesh_rejected(grid9):
    with pytest.raises(TopologyError):
        cut_to_disk(grid9)


@pytest.mark.parametrize("builder", [
    lambda: meshes.tetrahedron(),
    lambda: meshes.subdivided_sphere(1),
    lambda: meshes.subdivided_sphere(2),
    lambda: meshes.subdivided_sphere(3),
    lambda: meshes.torus_grid(5, 4)[0],
    lambda: meshes.torus_grid(12, 7)[0],
    lambda: meshes.embedded_torus(10, 6),
    lambda: meshes.voxel_torus(),
    lambda: meshes.genus2_mesh(),
])
def test_cut_to_disk_property(builder):
    mesh = builder()
    disk, cut = cut_to_disk(mesh)
    assert euler_characteristic(disk) == 1
    assert len(disk.boundary_loops) == 1
    # data transfer round trip: push then pull is the identity
    values = np.arange(mesh.n_vertices, dtype=float)
    assert np.array_equal(cut.pull_vertex(cut.push_vertex(values)), values)


def test_slice_requires_interior_edge(grid9):
    boundary_edges = np.nonzero(grid9.edge_halfedges[:, 1] < 0)[0]
    with pytest.raises(TopologyError):
        slice_along_edges(grid9, [int(boundary_edges[0])])


def test_slice_edge_copies(torus16):
    mesh, _ = torus16
    disk, cut = cut_to_disk(mesh)
    for oe, (c1, c2) in cut.edge_copy_pairs.items():
        a, b = mesh.edges[oe]
        assert cut.new_to_orig_vertex[c1[0]] == a
        assert cut.new_to_orig_vertex[c2[0]] == a
        assert cut.new_to_orig_vertex[c1[1]] == b
        assert cut.new_to_orig_vertex[c2[1]] == b
