"""Per-triangle first fundamental forms: Euclidean and equi-affine invariant.

For every face the face and its edge neighbours are unfolded into the
plane, mapped by a planar affine map that sends the face onto the unit
simplex, and a quadratic patch ``x(u)`` is fitted to the six vertex
positions. The equi-affine pre-metric at the simplex barycentre is

    gt_ij = det(x_1, x_2, x_ij),     gh = gt * |det gt|^(-1/4),

and the metric actually used is ``U |Gamma| U^T`` for ``gh = U Gamma U^T``
(eigenvalues clamped away from zero), which is positive definite even on
saddle-shaped regions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegeneratePreMetric,
    DegenerateTriangleError,
    InsufficientPointsError,
)

EUCLIDEAN = "euclidean"
EQUI_AFFINE = "equi-affine"
MODES = (EUCLIDEAN, EQUI_AFFINE)

BARYCENTER = (1.0 / 3.0, 1.0 / 3.0)
EPS_MIN_RATIO = 1e-6
EPS_DET_RATIO = 1e-10
EPS_DET_FLOOR = 1e-14
FIT_COND_MAX = 1e10
RIDGE_RATIO = 1e-8

SIMPLEX = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
# canonical edge vectors of the unit simplex: v0->v1, v1->v2, v2->v0
SIMPLEX_EDGES = np.array([[1.0, 0.0], [-1.0, 1.0], [0.0, -1.0]])


def check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"unknown metric mode {mode!r}; expected one of {MODES}")
    return mode


# ------------------------------------------------------------------ unfolding


@dataclass
class PlanarPatch:
    """A face and up to three neighbour apexes laid out in the plane.

    Rows are ordered ``[v0, v1, v2, apex0, apex1, apex2]``; apex ``k`` lies
    across local edge ``(k, k+1)``. Missing apexes have ``present`` False and
    NaN coordinates.
    """

    uv: np.ndarray
    xyz: np.ndarray
    present: np.ndarray
    vertex_ids: np.ndarray

    @property
    def n_points(self):
        return int(self.present.sum())


def _unfold_arrays(vertices, faces, neighbors, select=None):
    """Batched unfolding of the faces in ``select`` (default: all).

    Returns uv (m,6,2), xyz (m,6,3), present (m,6), ids (m,6).
    """
    V = vertices
    F_all = faces
    sel = np.arange(len(F_all)) if select is None else np.asarray(select)
    F = F_all[sel]
    neighbors = neighbors[sel]
    m = len(F)
    X = V[F]  # (m,3,3)
    e01 = X[:, 1] - X[:, 0]
    e02 = X[:, 2] - X[:, 0]
    l01 = np.linalg.norm(e01, axis=1)
    p2x = np.einsum("ij,ij->i", e01, e02) / l01
    p2y = np.linalg.norm(np.cross(e01, e02), axis=1) / l01

    uv = np.full((m, 6, 2), np.nan)
    uv[:, 0] = 0.0
    uv[:, 1, 0] = l01
    uv[:, 1, 1] = 0.0
    uv[:, 2, 0] = p2x
    uv[:, 2, 1] = p2y
    xyz = np.full((m, 6, 3), np.nan)
    xyz[:, :3] = X
    present = np.zeros((m, 6), dtype=bool)
    present[:, :3] = True
    ids = -np.ones((m, 6), dtype=np.int64)
    ids[:, :3] = F

    rows = np.arange(m)
    for k in range(3):
        a, b, c = k, (k + 1) % 3, (k + 2) % 3
        g = neighbors[:, k]
        has = g >= 0
        if not has.any():
            continue
        r = rows[has]
        G = F_all[g[has]]
        va, vb = F[r, a], F[r, b]
        apex_local = (G != va[:, None]) & (G != vb[:, None])
        w_id = G[apex_local]
        W = V[w_id]
        Xa, Xb = X[r, a], X[r, b]
        edge = Xb - Xa
        len2 = np.einsum("ij,ij->i", edge, edge)
        rel = W - Xa
        s = np.einsum("ij,ij->i", rel, edge) / len2
        h = np.linalg.norm(np.cross(rel, edge), axis=1) / np.sqrt(len2)

        Pa, Pb, Pc = uv[r, a], uv[r, b], uv[r, c]
        d = Pb - Pa
        nrm = np.column_stack([-d[:, 1], d[:, 0]]) / np.linalg.norm(d, axis=1)[:, None]
        side = np.einsum("ij,ij->i", nrm, Pc - Pa)
        nrm[side > 0] *= -1
        uv[r, 3 + k] = Pa + s[:, None] * d + h[:, None] * nrm
        xyz[r, 3 + k] = W
        present[r, 3 + k] = True
        ids[r, 3 + k] = w_id
    return uv, xyz, present, ids


def unfold_patch(mesh, face):
    """Lay out ``face`` and its edge neighbours isometrically in the plane.

    The face has vertex 0 at the origin and edge (0, 1) along +u1 with
    vertex 2 at positive u2; each neighbour is hinged about the shared edge
    to the far side.
    """
    uv, xyz, present, ids = _unfold_arrays(
        np.asarray(mesh.vertices), np.asarray(mesh.faces),
        np.asarray(mesh.face_neighbors), [int(face)])
    return PlanarPatch(uv[0], xyz[0], present[0], ids[0])


# --------------------------------------------------------------- canonizing


def _canonizing_maps(central):
    """(m,3,2) central triangles -> (m,2,2) linear part and (m,2) offset."""
    E = np.stack([central[:, 1] - central[:, 0], central[:, 2] - central[:, 0]], axis=2)
    det = E[:, 0, 0] * E[:, 1, 1] - E[:, 0, 1] * E[:, 1, 0]
    scale = np.einsum("ijk,ijk->i", E, E)
    if np.any(np.abs(det) <= 1e-14 * scale) or not np.all(np.isfinite(det)):
        raise DegenerateTriangleError("central triangle is degenerate")
    inv = np.empty_like(E)
    inv[:, 0, 0] = E[:, 1, 1] / det
    inv[:, 1, 1] = E[:, 0, 0] / det
    inv[:, 0, 1] = -E[:, 0, 1] / det
    inv[:, 1, 0] = -E[:, 1, 0] / det
    offset = -np.einsum("ijk,ik->ij", inv, central[:, 0])
    return inv, offset


def _apply_canon(M, t, uv):
    out = np.einsum("ijk,ilk->ilj", M, uv) + t[:, None, :]
    out[:, :3] = SIMPLEX
    return out


def canonize(patch):
    """Affine map ``u -> M u + t`` sending the central triangle to the unit simplex.

    ``patch`` is a :class:`PlanarPatch` or an array whose first three rows
    are the central triangle. Returns ``(M, t, mapped_points)``; the central
    rows of ``mapped_points`` are exactly (0,0), (1,0), (0,1).
    """
    uv = patch.uv if isinstance(patch, PlanarPatch) else np.asarray(patch, dtype=float)
    M, t = _canonizing_maps(uv[None, :3])
    mapped = _apply_canon(M, t, uv[None])[0]
    return M[0], t[0], mapped


# ------------------------------------------------------------ quadratic fit


def monomials(u):
    u = np.asarray(u, dtype=float)
    u1, u2 = u[..., 0], u[..., 1]
    return np.stack([np.ones_like(u1), u1, u2, u1 * u1, u1 * u2, u2 * u2], axis=-1)


@dataclass
class QuadraticPatch:
    """x(u) = c0 + c1 u1 + c2 u2 + c3 u1^2 + c4 u1 u2 + c5 u2^2 (rows of ``coeffs``)."""

    coeffs: np.ndarray
    fallback: bool = False
    residual: float = 0.0

    def __call__(self, u):
        return monomials(u) @ self.coeffs

    def derivatives(self, u=BARYCENTER):
        """x_1, x_2, x_11, x_12, x_22 at parameter point ``u``."""
        c = self.coeffs
        u1, u2 = u
        x1 = c[1] + 2 * c[3] * u1 + c[4] * u2
        x2 = c[2] + c[4] * u1 + 2 * c[5] * u2
        return x1, x2, 2 * c[3], c[4], 2 * c[5]


def _ridge_fit(V, X):
    """min |V c - X|^2 + tau^2 |c_quad|^2 with tau = 1e-8 sigma_max(V)."""
    smax = np.linalg.svd(V, compute_uv=False)[0]
    tau = RIDGE_RATIO * smax
    P = np.zeros((3, 6))
    P[:, 3:] = np.eye(3) * tau
    Va = np.vstack([V, P])
    Xa = np.vstack([X, np.zeros((3, X.shape[1]))])
    c = np.linalg.lstsq(Va, Xa, rcond=None)[0]
    res = float(np.abs(V @ c - X).max())
    return c, res


def _fit_batch(uv, xyz, present):
    """Fit all patches. Returns coeffs (m,6,3), lsq flag (m,), residual (m,)."""
    m = len(uv)
    coeffs = np.zeros((m, 6, 3))
    lsq = np.zeros(m, dtype=bool)
    residual = np.zeros(m)
    full = present.all(axis=1)
    idx = np.flatnonzero(full)
    if len(idx):
        V = monomials(uv[idx])
        cond = np.linalg.cond(V)
        ok = np.isfinite(cond) & (cond <= FIT_COND_MAX)
        good = idx[ok]
        if len(good):
            coeffs[good] = np.linalg.solve(V[ok], xyz[good])
        lsq[idx[~ok]] = True
    lsq[~full] = True
    for i in np.flatnonzero(lsq):
        rows = present[i]
        coeffs[i], residual[i] = _ridge_fit(monomials(uv[i, rows]), xyz[i, rows])
    return coeffs, lsq, residual


def fit_quadratic(uv, xyz):
    """Fit a quadratic patch through canonized points ``uv`` with 3D values ``xyz``.

    Exactly six points in general position are interpolated; fewer points
    (boundary faces) or an ill-conditioned 6x6 system use least squares
    with a small ridge on the quadratic coefficients, and set ``fallback``.
    """
    uv = np.asarray(uv, dtype=float)
    xyz = np.asarray(xyz, dtype=float)
    keep = np.all(np.isfinite(uv), axis=1) & np.all(np.isfinite(xyz), axis=1)
    uv, xyz = uv[keep], xyz[keep]
    if len(uv) < 3:
        raise InsufficientPointsError("at least the three central vertices are required")
    pad = 6 - len(uv)
    if pad < 0:
        c, res = _ridge_fit(monomials(uv), xyz)
        return QuadraticPatch(c, True, res)
    present = np.zeros((1, 6), dtype=bool)
    present[0, :len(uv)] = True
    U = np.zeros((1, 6, 2))
    Xs = np.zeros((1, 6, 3))
    U[0, :len(uv)] = uv
    Xs[0, :len(uv)] = xyz
    c, lsq, res = _fit_batch(U, Xs, present)
    return QuadraticPatch(c[0], bool(lsq[0]), float(res[0]))


# ------------------------------------------------------------- pre-metric


def _gtilde_batch(coeffs, u=BARYCENTER):
    c = coeffs
    u1, u2 = u
    x1 = c[:, 1] + 2 * c[:, 3] * u1 + c[:, 4] * u2
    x2 = c[:, 2] + c[:, 4] * u1 + 2 * c[:, 5] * u2
    n = np.cross(x1, x2)
    g11 = np.einsum("ij,ij->i", n, 2 * c[:, 3])
    g12 = np.einsum("ij,ij->i", n, c[:, 4])
    g22 = np.einsum("ij,ij->i", n, 2 * c[:, 5])
    gt = np.empty((len(c), 2, 2))
    gt[:, 0, 0] = g11
    gt[:, 0, 1] = gt[:, 1, 0] = g12
    gt[:, 1, 1] = g22
    return gt


def gtilde(patch, u=BARYCENTER):
    """Determinant tensor ``det(x_1, x_2, x_ij)`` of a quadratic patch."""
    return _gtilde_batch(np.asarray(patch.coeffs)[None], u)[0]


def _normalize(gt):
    det = gt[:, 0, 0] * gt[:, 1, 1] - gt[:, 0, 1] * gt[:, 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.abs(det) ** -0.25
        out = gt * factor[:, None, None]
    return out, det


def pre_metric(patch, eps_det=EPS_DET_FLOOR, u=BARYCENTER):
    """Equi-affine pre-metric ``gt |det gt|^(-1/4)`` at the simplex barycentre.

    Raises :class:`DegeneratePreMetric` when ``|det gt| < eps_det``.
    """
    gt = gtilde(patch, u)[None]
    gh, det = _normalize(gt)
    if not abs(det[0]) >= eps_det:
        raise DegeneratePreMetric(f"|det gtilde| = {abs(det[0]):.3g} below {eps_det:.3g}")
    return gh[0]


# ------------------------------------------------------------ correction


def _correct_batch(gh, eps_min):
    eps_min = np.broadcast_to(np.asarray(eps_min, dtype=float), (len(gh),))
    gam, U = np.linalg.eigh(gh)
    fixed = np.maximum(np.abs(gam), eps_min[:, None])
    G = np.einsum("nij,nj,nkj->nik", U, fixed, U)
    G = 0.5 * (G + np.swapaxes(G, 1, 2))
    # tolerate eigensolver roundoff so clamped outputs count as valid inputs
    slack = 64 * np.finfo(float).eps * np.abs(gam).max(axis=1)
    valid = (gam >= (eps_min - slack)[:, None]).all(axis=1)
    G[valid] = gh[valid]
    return G, gam


def correct_metric(ghat, reference_scale=1.0):
    """Replace ``U Gamma U^T`` by ``U |Gamma| U^T`` with ``|gamma| >= 1e-6 * reference_scale``.

    Inputs that are already positive definite above the floor come back
    unchanged.
    """
    gh = np.asarray(ghat, dtype=float).reshape(1, 2, 2)
    gh = 0.5 * (gh + np.swapaxes(gh, 1, 2))
    G, _ = _correct_batch(gh, EPS_MIN_RATIO * reference_scale)
    return G[0]


# ----------------------------------------------------------- metric field


@dataclass
class MetricField:
    """Per-face metric tensors in canonized (unit-simplex) coordinates.

    ``G`` is (m, 2, 2). ``planar`` holds the unfolded (pre-canonization)
    planar coordinates of each face's three vertices. ``gtilde``,
    ``det_gtilde``, ``gamma`` (eigenvalues of the normalized pre-metric),
    ``fallback`` (Euclidean form used because the pre-metric degenerated) and
    ``lsq`` (least-squares patch fit) are diagnostics and are filled only in
    equi-affine mode.
    """

    G: np.ndarray
    planar: np.ndarray
    mode: str
    reference_scale: float
    eps_min: float
    gtilde: np.ndarray | None = None
    det_gtilde: np.ndarray | None = None
    gamma: np.ndarray | None = None
    fallback: np.ndarray = field(default=None)
    lsq: np.ndarray = field(default=None)
    eps_det: float | None = None

    def __post_init__(self):
        m = len(self.G)
        if self.fallback is None:
            self.fallback = np.zeros(m, dtype=bool)
        if self.lsq is None:
            self.lsq = np.zeros(m, dtype=bool)

    @property
    def n_faces(self):
        return len(self.G)

    def sqrt_det(self):
        G = self.G
        return np.sqrt(G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0])

    def area(self):
        """Total surface area measured by the metric."""
        return float(0.5 * self.sqrt_det().sum())

    def edge_lengths(self):
        """(m, 3) lengths of the three simplex edges under each face's metric."""
        e = SIMPLEX_EDGES
        return np.sqrt(np.einsum("kj,mjl,kl->mk", e, self.G, e))

    def records(self):
        """Per-face dicts for JSON debug dumps."""
        out = []
        for f in range(self.n_faces):
            rec = {"face": f, "G": self.G[f].tolist(), "fallback": bool(self.fallback[f])}
            if self.gtilde is not None:
                rec["gtilde"] = self.gtilde[f].tolist()
                rec["det"] = float(self.det_gtilde[f])
            out.append(rec)
        return out

    def dump_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.records(), fh, indent=1)


def euclidean_forms(mesh):
    """First fundamental form of the linear parametrization over the unit simplex."""
    X = np.asarray(mesh.vertices)[np.asarray(mesh.faces)]
    J = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=2)  # (m,3,2)
    return np.einsum("mki,mkj->mij", J, J)


def compute_metric_field(mesh, mode=EQUI_AFFINE):
    """Metric tensor of every face in the requested ``mode``."""
    check_mode(mode)
    V = np.asarray(mesh.vertices)
    F = np.asarray(mesh.faces)
    uv, xyz, present, _ = _unfold_arrays(V, F, np.asarray(mesh.face_neighbors))
    planar = uv[:, :3].copy()
    G_euc = euclidean_forms(mesh)

    if mode == EUCLIDEAN:
        d = G_euc[:, 0, 0] * G_euc[:, 1, 1] - G_euc[:, 0, 1] ** 2
        ref = float(np.median(np.sqrt(np.abs(d))))
        eps_min = EPS_MIN_RATIO * ref
        G, _ = _correct_batch(G_euc, eps_min)
        return MetricField(G, planar, mode, ref, eps_min)

    M, t = _canonizing_maps(uv[:, :3])
    cuv = _apply_canon(M, t, np.nan_to_num(uv))
    cuv[~present] = np.nan
    coeffs, lsq, _ = _fit_batch(cuv, xyz, present)
    gt = _gtilde_batch(coeffs)
    gh, det = _normalize(gt)
    absdet = np.abs(det)

    # scale-relative threshold; the floor scales like det gtilde (~ length^8)
    floor = EPS_DET_FLOOR * mesh.mean_edge_length() ** 8
    eps_det = max(EPS_DET_RATIO * float(np.median(absdet)), floor)
    degenerate = ~(absdet >= eps_det)

    if (~degenerate).any():
        ref = float(np.median(absdet[~degenerate] ** 0.25))
    else:
        d = G_euc[:, 0, 0] * G_euc[:, 1, 1] - G_euc[:, 0, 1] ** 2
        ref = float(np.median(np.sqrt(np.abs(d))))
    eps_min = EPS_MIN_RATIO * ref
    gh[degenerate] = G_euc[degenerate]
    G, gamma = _correct_batch(gh, eps_min)
    gamma[degenerate] = np.nan
    return MetricField(G, planar, mode, ref, eps_min, gtilde=gt, det_gtilde=det,
                       gamma=gamma, fallback=degenerate, lsq=lsq, eps_det=eps_det)
