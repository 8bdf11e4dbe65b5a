"""Mesh -> metric field -> FEM system -> eigenpairs in one call."""

from dataclasses import dataclass

from . import eigen, fem, metric
from .eigen import SpectralDecomposition
from .fem import FemSystem
from .metric import MetricField


@dataclass
class Spectrum:
    metric: MetricField
    system: FemSystem
    spec: SpectralDecomposition

    @property
    def area_weights(self):
        return self.system.lumped_mass()


def laplacian_spectrum(mesh, mode=metric.EQUI_AFFINE, k=100, tol=1e-10):
    """Eigen-decomposition of the Laplace-Beltrami operator of ``mesh`` in ``mode``."""
    field = metric.compute_metric_field(mesh, mode)
    system = fem.assemble(mesh, field)
    k = min(k, mesh.n_vertices)
    spec = eigen.smallest_eigenpairs(system, k, tol, mode=mode)
    return Spectrum(field, system, spec)
