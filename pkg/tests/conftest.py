import numpy as np
import pytest

from descforge.camera import CameraIntrinsics, RigidTransform
from descforge.descriptors import background_descriptor, embed, normalize_descriptors
from descforge.mesh import shapes
from descforge.mesh.laplacian import build_laplacian
from descforge.scene import Trajectory, generate_scene

TETRA_OBJ = """\
v 1.0 1.0 1.0
v 1.0 -1.0 -1.0
v -1.0 1.0 -1.0
v -1.0 -1.0 1.0
f 1 3 2
f 1 2 4
f 1 4 3
f 2 3 4
"""


@pytest.fixture
def tetra_obj(tmp_path):
    path = tmp_path / "tetra.obj"
    path.write_text(TETRA_OBJ)
    return path


@pytest.fixture(scope="session")
def torus_mesh():
    return shapes.torus(0.1, 0.04, 64, 32)


@pytest.fixture(scope="session")
def torus_pair(torus_mesh):
    return build_laplacian(torus_mesh)


@pytest.fixture(scope="session")
def blob_mesh():
    return shapes.blob(0.09, 50, 50, seed=11)


@pytest.fixture(scope="session")
def blob_field(blob_mesh):
    pair = build_laplacian(blob_mesh, mass="barycentric")
    field = normalize_descriptors(embed(pair, 3, symmetry="off").field)
    background_descriptor(field)
    return field


@pytest.fixture(scope="session")
def small_intrinsics():
    return CameraIntrinsics(fx=300.0, fy=300.0, cx=160.0, cy=120.0,
                            width=320, height=240)


@pytest.fixture(scope="session")
def blob_scene(blob_mesh, blob_field, small_intrinsics):
    """Five-frame in-memory orbit reused by render/correspondence/tracking tests."""
    trajectory = Trajectory(0.42, 0.5, np.deg2rad(25), np.deg2rad(60))
    return generate_scene(blob_mesh, blob_field, small_intrinsics,
                          RigidTransform.identity(), trajectory, count=5, seed=9)
