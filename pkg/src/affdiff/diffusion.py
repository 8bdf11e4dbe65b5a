"""Heat kernels, heat kernel signatures, diffusion and commute-time distances.

Everything here is a function of the eigenpairs only. Eigenvectors are
B-orthonormal vertex samples, so the constant mode equals 1/sqrt(area).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DisconnectedError, ValidationError

DEFAULT_SCALES = tuple(1024.0 * 2.0 ** (2.0 * k / 5.0) for k in range(6))


@dataclass
class HksDescriptor:
    """Per-vertex heat kernel signature; ``values`` is (n_vertices, n_scales)."""

    values: np.ndarray
    scales: np.ndarray

    @property
    def dim(self):
        return self.values.shape[1]

    def __len__(self):
        return self.values.shape[0]

    def to_json_dict(self):
        return {"scales": [float(t) for t in self.scales],
                "hks": [[float(x) for x in row] for row in self.values]}


def heat_kernel(spec, x, y, t):
    """h_t(x, y) = sum_i exp(-lambda_i t) phi_i(x) phi_i(y) over the available eigenpairs."""
    if t <= 0:
        raise ValidationError("t must be positive")
    phi = spec.vectors
    w = np.exp(-spec.values * t)
    return float(np.sum(w * (phi[x] * phi[y])))


def heat_kernel_row(spec, x, t):
    """h_t(x, .) at every vertex."""
    return spec.vectors @ (np.exp(-spec.values * t) * spec.vectors[x])


def hks(spec, scales=DEFAULT_SCALES):
    """Diagonal heat kernel h_t(x, x) for every vertex and every scale."""
    ts = np.asarray(scales, dtype=float)
    if np.any(ts <= 0) or np.any(np.diff(ts) <= 0):
        raise ValidationError("scales must be positive and strictly ascending")
    W = np.exp(-np.outer(spec.values, ts))  # (k, T)
    return HksDescriptor((spec.vectors ** 2) @ W, ts)


def _nontrivial(spec):
    return spec.values[1:], spec.vectors[:, 1:]


def diffusion_distance(spec, x, y, t, literal=False):
    """Diffusion distance at scale ``t``.

    Uses exp(-2 lambda_i t), the exponent under which d_t^2 equals the L2
    distance between heat kernel rows and integrates to the commute time.
    ``literal=True`` uses exp(-lambda_i t) instead.
    """
    if t <= 0:
        raise ValidationError("t must be positive")
    lam, phi = _nontrivial(spec)
    c = 1.0 if literal else 2.0
    d = phi[x] - phi[y]
    return float(np.sqrt(np.sum(np.exp(-c * lam * t) * d * d)))


def _check_connected(spec):
    lam = spec.values
    if len(lam) < 2:
        raise ValidationError("need at least two eigenpairs")
    if len(lam) > 2 and lam[1] < 1e-8 * lam[2]:
        raise DisconnectedError("second eigenvalue vanishes: mesh looks disconnected")
    if lam[1] <= 0:
        raise DisconnectedError("second eigenvalue is not positive")


def commute_time(spec, x, y):
    """Commute-time distance sqrt(sum_{i>0} (phi_i(x) - phi_i(y))^2 / lambda_i)."""
    _check_connected(spec)
    lam, phi = _nontrivial(spec)
    d = phi[x] - phi[y]
    return float(np.sqrt(np.sum(d * d / lam)))


def commute_time_embedding(spec):
    """Coordinates whose Euclidean distances are commute-time distances."""
    _check_connected(spec)
    lam, phi = _nontrivial(spec)
    return phi / np.sqrt(lam)


def diffusion_embedding(spec, t, literal=False):
    c = 1.0 if literal else 2.0
    lam, phi = _nontrivial(spec)
    return phi * np.exp(-0.5 * c * lam * t)


def pairwise(embedding, ids=None):
    """Euclidean distance matrix between embedded vertices ``ids``."""
    E = embedding if ids is None else embedding[np.asarray(ids)]
    diff = E[:, None, :] - E[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(D, 0.0)
    return D


def commute_time_matrix(spec, ids):
    return pairwise(commute_time_embedding(spec), ids)


def diffusion_distance_matrix(spec, ids, t, literal=False):
    return pairwise(diffusion_embedding(spec, t, literal), ids)
