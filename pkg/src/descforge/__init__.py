"""descforge: optimal dense-descriptor embeddings for triangle meshes,
descriptor-space target rendering, and tracking/grasp evaluation."""

from . import camera, correspond, descriptors, errors, grasp, losses, mesh, render, scene, spectral, tracking

__version__ = "0.1.0"

__all__ = [
    "camera",
    "correspond",
    "descriptors",
    "errors",
    "grasp",
    "losses",
    "mesh",
    "render",
    "scene",
    "spectral",
    "tracking",
    "__version__",
]
