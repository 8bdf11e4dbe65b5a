"""Linear finite elements for the Laplace-Beltrami operator of a per-face metric.

On the canonized unit simplex the hat functions have constant gradients
(-1,-1), (1,0), (0,1); with a constant metric ``G`` per face the element
integrals are closed form:

    stiffness_kl = sqrt(det G)/2 * grad_k^T G^-1 grad_l
    mass_kl      = sqrt(det G) * (1/12 if k == l else 1/24)
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.io import mmwrite

from .errors import SingularMetricError

HAT_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
MASS_PATTERN = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 24.0


@dataclass
class FemSystem:
    """Stiffness ``A`` and consistent mass ``B`` (CSR, sorted indices)."""

    A: sparse.csr_matrix
    B: sparse.csr_matrix

    @property
    def n(self):
        return self.A.shape[0]

    def lumped_mass(self):
        return np.asarray(self.B.sum(axis=1)).ravel()

    def area(self):
        return float(self.B.sum())

    def dump_matrix_market(self, prefix):
        mmwrite(f"{prefix}_A.mtx", self.A, symmetry="symmetric")
        mmwrite(f"{prefix}_B.mtx", self.B, symmetry="symmetric")


def _element_batch(G):
    det = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]
    if np.any(~(det > 0)):
        raise SingularMetricError("metric tensor is not positive definite")
    sq = np.sqrt(det)
    Ginv = np.empty_like(G)
    Ginv[:, 0, 0] = G[:, 1, 1] / det
    Ginv[:, 1, 1] = G[:, 0, 0] / det
    Ginv[:, 0, 1] = Ginv[:, 1, 0] = -G[:, 0, 1] / det
    D = HAT_GRADIENTS
    K = 0.5 * sq[:, None, None] * np.einsum("ka,mab,lb->mkl", D, Ginv, D)
    M = sq[:, None, None] * MASS_PATTERN[None]
    return K, M


def element_matrices(G):
    """(stiffness, mass) 3x3 blocks for one face with constant metric ``G``."""
    K, M = _element_batch(np.asarray(G, dtype=float).reshape(1, 2, 2))
    return K[0], M[0]


def _scatter(faces, blocks, n):
    rows = np.repeat(faces, 3, axis=1).ravel()
    cols = np.tile(faces, (1, 3)).ravel()
    mat = sparse.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble(mesh, metric):
    """Global stiffness and mass matrices for ``metric`` on ``mesh``."""
    F = np.asarray(mesh.faces)
    if len(metric.G) != len(F):
        raise ValueError("metric field does not cover every face")
    K, M = _element_batch(np.asarray(metric.G))
    n = mesh.n_vertices
    A = _scatter(F, K, n)
    B = _scatter(F, M, n)
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    A = A.tocsr()
    B = B.tocsr()
    A.sort_indices()
    B.sort_indices()
    return FemSystem(A, B)


def cotangent_laplacian(mesh):
    """Classical cotangent stiffness matrix built edge by edge (independent route)."""
    V = np.asarray(mesh.vertices)
    F = np.asarray(mesh.faces)
    n = mesh.n_vertices
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = F[:, (k + 1) % 3], F[:, (k + 2) % 3], F[:, k]
        a = V[i] - V[o]
        b = V[j] - V[o]
        cot = np.einsum("ij,ij->i", a, b) / np.linalg.norm(np.cross(a, b), axis=1)
        w = 0.5 * cot
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
    L = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)).tocsr()
    L.sum_duplicates()
    return L
