from .core import AREA_FLOOR, MeshReport, TriangleMesh, validate_mesh
from .io import load_mesh, save_mesh
from .laplacian import LaplacianPair, barycentric_masses, build_laplacian
from . import shapes

__all__ = [
    "AREA_FLOOR",
    "MeshReport",
    "TriangleMesh",
    "validate_mesh",
    "load_mesh",
    "save_mesh",
    "LaplacianPair",
    "barycentric_masses",
    "build_laplacian",
    "shapes",
]
