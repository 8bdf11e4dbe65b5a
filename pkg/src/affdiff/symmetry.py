"""Intrinsic symmetry detection from eigenfunction sign signatures.

A reflection-like self-isometry f acts on simple eigenfunctions as
phi_i o f = s_i phi_i with s_i = +/-1. For a candidate signature s the
energy

    E(s) = sum_x area(x) min_x' sum_i (s_i phi_i(x) - phi_i(x'))^2 / lambda_i

vanishes when s belongs to a true symmetry, and the minimiser x' gives f(x).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

CHUNK = 256


@dataclass
class Candidate:
    signs: tuple
    energy: float
    mapping: np.ndarray

    def signs_str(self):
        return "".join("+" if s > 0 else "-" for s in self.signs)


def _weighted_coords(spec, K, indices=None):
    if indices is None:
        indices = np.arange(1, K + 1)
    indices = np.asarray(indices)
    if spec.k <= indices.max():
        raise ValidationError(f"need at least {indices.max() + 1} eigenpairs")
    lam = spec.values[indices]
    if np.any(lam <= 0):
        raise ValidationError("eigenvalues used in the signature must be positive")
    return spec.vectors[:, indices] / np.sqrt(lam)


def nearest_scan(Q, P):
    """For every row of ``Q`` the index of, and squared distance to, the closest row of ``P``.

    Plain linear scan, chunked; ties go to the lowest index.
    """
    n = len(Q)
    idx = np.empty(n, dtype=np.int64)
    best = np.empty(n)
    for s in range(0, n, CHUNK):
        q = Q[s:s + CHUNK]
        d2 = ((q[:, None, :] - P[None, :, :]) ** 2).sum(-1)
        j = np.argmin(d2, axis=1)
        idx[s:s + CHUNK] = j
        best[s:s + CHUNK] = d2[np.arange(len(q)), j]
    return idx, best


def _energy(Y, signs, area):
    idx, d2 = nearest_scan(Y * np.asarray(signs, dtype=float), Y)
    return float(area @ d2), idx


def signature_energy(spec, signs, area_weights, indices=None):
    """E(s) for one signature; returns the energy only."""
    signs = tuple(int(s) for s in signs)
    if any(s not in (-1, 1) for s in signs) or not signs:
        raise ValidationError("signs must be a non-empty sequence of +1/-1")
    Y = _weighted_coords(spec, len(signs), indices)
    return _energy(Y, signs, np.asarray(area_weights, dtype=float))[0]


def recover_map(spec, signs, indices=None):
    """f(x) = argmin_x' sum_i (s_i phi_i(x) - phi_i(x'))^2 / lambda_i."""
    Y = _weighted_coords(spec, len(signs), indices)
    return nearest_scan(Y * np.asarray(signs, dtype=float), Y)[0]


def signature_of_map(spec, mapping, K=5, indices=None):
    """Signs s_i = sign(<phi_i o f, phi_i>) of a known vertex map (uses lumped-free dot products)."""
    if indices is None:
        indices = np.arange(1, K + 1)
    phi = spec.vectors[:, indices]
    return tuple(int(np.sign(np.dot(phi[mapping, i], phi[:, i])) or 1) for i in range(phi.shape[1]))


def detect_symmetries(spec, K=5, top=3, area_weights=None, drop_multiplets=False):
    """Score all 2^K - 1 non-identity sign signatures; return the ``top`` lowest energies."""
    indices = np.arange(1, K + 1)
    flagged = spec.multiplet[indices]
    if flagged.any():
        if drop_multiplets:
            indices = indices[~flagged]
            if len(indices) == 0:
                raise ValidationError("every eigenvalue in the signature is degenerate")
        else:
            warnings.warn("degenerate eigenvalues among the signature eigenfunctions; "
                          "sign signatures may be ill-defined", RuntimeWarning, stacklevel=2)
    if area_weights is None:
        area_weights = np.ones(spec.vertex_count)
    area = np.asarray(area_weights, dtype=float)
    Y = _weighted_coords(spec, len(indices), indices)
    out = []
    for signs in itertools.product((1, -1), repeat=len(indices)):
        if all(s == 1 for s in signs):
            continue
        e, f = _energy(Y, signs, area)
        out.append(Candidate(signs, e, f))
    out.sort(key=lambda c: (c.energy, c.signs[::-1]))
    return out[:top] if top else out


def all_energies(spec, K=5, area_weights=None):
    """Energies of every signature (identity included), keyed by sign tuple."""
    Y = _weighted_coords(spec, K)
    area = np.ones(spec.vertex_count) if area_weights is None else np.asarray(area_weights, float)
    return {s: _energy(Y, s, area)[0] for s in itertools.product((1, -1), repeat=K)}
