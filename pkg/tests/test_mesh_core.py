import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from descforge.errors import IndexOutOfRange, ParseError
from descforge.mesh import TriangleMesh, load_mesh, save_mesh, shapes, validate_mesh

from conftest import TETRA_OBJ


class TestLoadMesh:
    def test_tetrahedron_obj(self, tetra_obj):
        mesh = load_mesh(tetra_obj)
        assert mesh.n_vertices == 4
        assert mesh.n_faces == 4

    def test_face_index_out_of_range(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 5\n")
        with pytest.raises(IndexOutOfRange):
            load_mesh(path)

    def test_malformed_obj(self, tmp_path):
        path = tmp_path / "junk.obj"
        path.write_text("v 0 0\nf 1 2 3\n")
        with pytest.raises(ParseError):
            load_mesh(path)

    def test_obj_slash_indices_and_negative(self, tmp_path):
        path = tmp_path / "slashes.obj"
        path.write_text(
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3\nf -3 -2 -1\n"
        )
        mesh = load_mesh(path)
        assert mesh.n_faces == 2
        assert np.array_equal(mesh.faces[0], mesh.faces[1])

    def test_ply_binary_round_trip_bit_exact(self, tmp_path):
        mesh = shapes.torus(0.1, 0.04, 64, 64)
        assert mesh.n_vertices == 4096
        assert mesh.n_faces == 8192
        path = tmp_path / "torus.ply"
        save_mesh(mesh, path, binary=True)
        loaded = load_mesh(path)
        assert loaded.vertices.tobytes() == mesh.vertices.tobytes()
        assert np.array_equal(loaded.faces, mesh.faces)

    def test_ply_ascii_round_trip(self, tmp_path):
        mesh = shapes.box(0.1, 0.2, 0.3)
        path = tmp_path / "box.ply"
        save_mesh(mesh, path, binary=False)
        loaded = load_mesh(path)
        assert np.allclose(loaded.vertices, mesh.vertices, atol=0)
        assert np.array_equal(loaded.faces, mesh.faces)

    def test_obj_round_trip(self, tmp_path):
        mesh = shapes.uv_sphere(0.07, 12, 8)
        path = tmp_path / "s.obj"
        save_mesh(mesh, path)
        loaded = load_mesh(path)
        assert loaded.vertices.tobytes() == mesh.vertices.tobytes()

    def test_ply_missing_magic(self, tmp_path):
        path = tmp_path / "no.ply"
        path.write_bytes(b"not a ply\n")
        with pytest.raises(ParseError):
            load_mesh(path)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ParseError):
            load_mesh(tmp_path / "mesh.stl")


class TestMeshInvariants:
    def test_face_repeating_vertex_rejected(self):
        with pytest.raises(ParseError):
            TriangleMesh(np.eye(3), np.array([[0, 1, 1]]))

    def test_index_validation(self):
        with pytest.raises(IndexOutOfRange):
            TriangleMesh(np.eye(3), np.array([[0, 1, 3]]))


class TestValidateMesh:
    def test_closed_tetrahedron(self, tetra_obj):
        report = validate_mesh(load_mesh(tetra_obj))
        assert report.n_boundary_edges == 0
        assert report.n_nonmanifold_edges == 0
        assert report.n_components == 1
        assert report.is_closed

    def test_single_triangle(self):
        mesh = TriangleMesh(np.array([[0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]]),
                            np.array([[0, 1, 2]]))
        report = validate_mesh(mesh)
        assert report.n_boundary_edges == 3
        assert report.n_components == 1

    def test_two_disjoint_tetrahedra(self, tmp_path):
        second = TETRA_OBJ.replace("v 1.0", "v 9.0").replace("v -1.0", "v 7.0")
        lines = [ln for ln in second.splitlines() if ln.startswith("v")]
        merged = TETRA_OBJ + "\n".join(lines) + "\nf 5 7 6\nf 5 6 8\nf 5 8 7\nf 6 7 8\n"
        path = tmp_path / "two.obj"
        path.write_text(merged)
        mesh = load_mesh(path)
        report = validate_mesh(mesh)
        # oracle: sparse connected components over the edge graph
        e = mesh.edges_unique()
        adj = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])),
                            shape=(mesh.n_vertices, mesh.n_vertices))
        n_oracle, _ = connected_components(adj, directed=False)
        assert report.n_components == n_oracle == 2

    def test_degenerate_face_listed(self):
        mesh = TriangleMesh(
            np.array([[0, 0, 0], [1.0, 0, 0], [2.0, 0, 0], [0, 1.0, 0]]),
            np.array([[0, 1, 2], [0, 1, 3]]),
        )
        report = validate_mesh(mesh)
        assert report.degenerate_faces == [0]
        assert report.min_face_area <= 1e-12

    def test_nonmanifold_edge_counted(self):
        verts = np.array([[0, 0, 0], [1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0], [0, -1.0, 0]])
        faces = np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]])
        report = validate_mesh(TriangleMesh(verts, faces))
        assert report.n_nonmanifold_edges == 1

    def test_does_not_mutate(self, torus_mesh):
        before = torus_mesh.vertices.copy()
        validate_mesh(torus_mesh)
        assert np.array_equal(before, torus_mesh.vertices)


class TestGenerators:
    def test_torus_euler_characteristic(self, torus_mesh):
        chi = torus_mesh.n_vertices - len(torus_mesh.edges_unique()) + torus_mesh.n_faces
        assert chi == 0
        assert torus_mesh.n_vertices == 2048

    @pytest.mark.parametrize("mesh,chi", [
        (shapes.box(0.1, 0.1, 0.1), 2),
        (shapes.uv_sphere(0.1, 16, 12), 2),
        (shapes.cylinder(0.04, 0.1, 16, 3), 2),
    ])
    def test_closed_shapes(self, mesh, chi):
        report = validate_mesh(mesh)
        assert report.is_closed
        assert mesh.n_vertices - len(mesh.edges_unique()) + mesh.n_faces == chi

    def test_outward_winding(self):
        for mesh in (shapes.torus(0.1, 0.04, 16, 8), shapes.uv_sphere(0.1, 16, 12),
                     shapes.cylinder(0.04, 0.1, 16, 2), shapes.box(1, 2, 3)):
            a, b, c = (mesh.vertices[mesh.faces[:, k]] for k in range(3))
            volume = (np.cross(a, b) * c).sum() / 6.0
            assert volume > 0

    def test_bad_segment_counts(self):
        with pytest.raises(ValueError):
            shapes.torus(0.1, 0.04, 2, 8)
        with pytest.raises(ValueError):
            shapes.uv_sphere(0.1, 2, 8)

    def test_torus_rotation_permutation_is_automorphism(self, torus_mesh):
        perm = shapes.torus_rotation_permutation(64, 32)
        rotated = np.cos(2 * np.pi / 64), np.sin(2 * np.pi / 64)
        c, s = rotated
        rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
        target = torus_mesh.vertices @ rot.T
        assert np.allclose(target, torus_mesh.vertices[perm], atol=1e-12)
