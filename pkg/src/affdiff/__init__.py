"""Equi-affine invariant diffusion geometry on triangle meshes."""

__version__ = "0.1.0"

from .mesh import AffineTransform, TriangleMesh, apply_affine, load_mesh, random_equi_affine  # noqa: F401
from .pipeline import laplacian_spectrum  # noqa: F401
