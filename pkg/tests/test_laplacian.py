import numpy as np
import pytest

from descforge.errors import DegenerateFace, EmptyMesh
from descforge.mesh import TriangleMesh, build_laplacian, shapes
from descforge.mesh.laplacian import barycentric_masses

from oracles import combinatorial_laplacian

HALF_COT_60 = 1.0 / (2.0 * np.sqrt(3.0))  # cot(60 deg) / 2


def equilateral():
    return TriangleMesh(
        np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, np.sqrt(3) / 2, 0.0]]),
        np.array([[0, 1, 2]]),
    )


class TestCotangentWeights:
    def test_equilateral_triangle(self):
        pair = build_laplacian(equilateral())
        dense = pair.L.toarray()
        off = dense[~np.eye(3, dtype=bool)]
        assert np.allclose(off, -HALF_COT_60, atol=1e-12)
        assert np.allclose(np.diag(dense), 2 * HALF_COT_60, atol=1e-12)

    def test_square_diagonal_weight_zero(self):
        # unit square split along its diagonal: both opposite angles are 90 deg
        mesh = TriangleMesh(
            np.array([[0.0, 0, 0], [1.0, 0, 0], [1.0, 1, 0], [0.0, 1, 0]]),
            np.array([[0, 1, 2], [0, 2, 3]]),
        )
        pair = build_laplacian(mesh)
        assert abs(pair.L[0, 2]) < 1e-12

    def test_rigid_invariance(self, torus_mesh):
        pair = build_laplacian(torus_mesh)
        rng = np.random.default_rng(3)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        if np.linalg.det(q) < 0:
            q[:, 0] *= -1
        moved = TriangleMesh(torus_mesh.vertices @ q.T + rng.normal(size=3),
                             torus_mesh.faces)
        pair2 = build_laplacian(moved)
        assert abs(pair.L - pair2.L).max() < 1e-9
        assert np.abs(pair.c_diag - pair2.c_diag).max() < 1e-9

    def test_degenerate_face_rejected(self):
        mesh = TriangleMesh(
            np.array([[0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]]), np.array([[0, 1, 2]])
        )
        with pytest.raises(DegenerateFace):
            build_laplacian(mesh)

    def test_empty_mesh_rejected(self):
        mesh = TriangleMesh(np.zeros((4, 3)), np.zeros((0, 3), dtype=int))
        with pytest.raises(EmptyMesh):
            build_laplacian(mesh)


class TestUniformWeights:
    def test_matches_combinatorial_oracle_fan(self):
        # triangle fan around a center vertex
        n = 7
        angles = 2 * np.pi * np.arange(n) / n
        verts = np.vstack([[0, 0, 0], np.stack([np.cos(angles), np.sin(angles),
                                                np.zeros(n)], axis=1)])
        faces = np.array([[0, 1 + i, 1 + (i + 1) % n] for i in range(n)])
        mesh = TriangleMesh(verts, faces)
        pair = build_laplacian(mesh, weighting="uniform")
        oracle = combinatorial_laplacian(mesh.n_vertices, mesh.edges_unique())
        assert np.array_equal(pair.L.toarray(), oracle)

    def test_matches_combinatorial_oracle_torus(self, torus_mesh):
        pair = build_laplacian(torus_mesh, weighting="uniform")
        oracle = combinatorial_laplacian(torus_mesh.n_vertices,
                                         torus_mesh.edges_unique())
        assert np.array_equal(pair.L.toarray(), oracle)


class TestPairInvariants:
    @pytest.mark.parametrize("weighting", ["cotangent", "uniform"])
    def test_row_sums_zero(self, torus_mesh, weighting):
        pair = build_laplacian(torus_mesh, weighting=weighting)
        assert np.abs(pair.L.sum(axis=1)).max() < 1e-9

    @pytest.mark.parametrize("weighting", ["cotangent", "uniform"])
    def test_psd_random_vectors(self, weighting):
        mesh = shapes.blob(0.08, 24, 18, seed=2)
        pair = build_laplacian(mesh, weighting=weighting)
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.normal(size=pair.n)
            assert x @ (pair.L @ x) >= -1e-9

    def test_constant_null_space(self, torus_pair):
        ones = np.ones(torus_pair.n)
        assert np.abs(torus_pair.L @ ones).max() < 1e-9

    def test_symmetric_storage(self, torus_pair):
        assert abs(torus_pair.L - torus_pair.L.T).max() == 0.0

    def test_degrees_positive(self, torus_pair):
        assert (torus_pair.c_diag > 0).all()

    def test_clamped_fallback_flag(self, monkeypatch):
        # For valid meshes every cotangent degree is the Dirichlet energy of
        # the vertex hat function and hence strictly positive, so the clamp
        # retry can only fire through rounding pathology. Inject fabricated
        # cotangents to exercise the mechanism.
        from descforge.mesh import laplacian as lap_mod

        mesh = equilateral()
        fake = np.array([[-2.0, 0.4, 0.4]])  # drives one degree negative

        monkeypatch.setattr(lap_mod, "_face_cotangents", lambda m: fake)
        pair = build_laplacian(mesh)
        assert pair.clamped_fallback
        assert (pair.c_diag > 0).all()
        assert np.abs(pair.L.sum(axis=1)).max() < 1e-9
        assert pair.L[1, 2] == 0.0  # the negative weight was clamped away

    def test_cotangent_degrees_always_positive(self):
        # hat-function Dirichlet energy argument, checked numerically on
        # deliberately nasty obtuse geometry
        rng = np.random.default_rng(7)
        for _ in range(50):
            m = int(rng.integers(4, 8))
            angles = np.sort(rng.uniform(0, 2 * np.pi, m))
            radius = rng.uniform(0.2, 3.0, m)
            apex_height = rng.uniform(0.01, 6.0)
            verts = np.vstack([
                [0, 0, apex_height],
                np.stack([radius * np.cos(angles), radius * np.sin(angles),
                          np.zeros(m)], axis=1),
            ])
            faces = np.array([[0, 1 + i, 1 + (i + 1) % m] for i in range(m)])
            pair = build_laplacian(TriangleMesh(verts, faces))
            assert (pair.c_diag > 0).all()
            assert not pair.clamped_fallback


class TestBarycentricMass:
    def test_total_mass_is_area(self, torus_mesh):
        masses = barycentric_masses(torus_mesh)
        assert masses.min() > 0
        assert np.isclose(masses.sum(), torus_mesh.face_areas().sum())

    def test_flag_selects_mass(self, torus_mesh):
        pair = build_laplacian(torus_mesh, mass="barycentric")
        assert np.allclose(pair.c_diag, barycentric_masses(torus_mesh))
        # L itself is identical under either mass mode
        ref = build_laplacian(torus_mesh, mass="degree")
        assert abs(pair.L - ref.L).max() == 0.0
