"""Correspondence distortion and exhaustive Gromov-Hausdorff distance on small samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffusion
from .errors import InvalidCorrespondenceError, SizeCapError, ValidationError

GH_HARD_CAP = 7


@dataclass
class SampledMetricSpace:
    """A finite metric space: sample vertex ids and their distance matrix."""

    ids: np.ndarray
    D: np.ndarray
    source: str = ""

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.D = np.asarray(self.D, dtype=float)
        n = len(self.ids)
        if self.D.shape != (n, n):
            raise ValidationError("distance matrix does not match sample count")

    def __len__(self):
        return len(self.ids)

    def check(self, slack=1e-8):
        D = self.D
        if not np.allclose(D, D.T, rtol=0, atol=slack) or np.any(np.diag(D) != 0) or np.any(D < 0):
            raise ValidationError("distance matrix must be symmetric, non-negative, zero-diagonal")
        viol = D[:, None, :] - (D[:, :, None] + D[None, :, :])
        if viol.max() > slack * max(D.max(), 1.0):
            raise ValidationError("triangle inequality violated")
        return self

    @classmethod
    def from_spectrum(cls, spec, ids, metric="commute", t=None, source=""):
        ids = np.asarray(ids)
        if metric == "commute":
            D = diffusion.commute_time_matrix(spec, ids)
        elif metric == "diffusion":
            D = diffusion.diffusion_distance_matrix(spec, ids, t)
        else:
            raise ValidationError(f"unknown metric {metric!r}")
        return cls(ids, D, source)


def _pairs(C):
    P = np.asarray(sorted({(int(i), int(j)) for i, j in C}), dtype=np.int64).reshape(-1, 2)
    return P


def check_correspondence(C, nx, ny):
    P = _pairs(C)
    if len(P) == 0:
        raise InvalidCorrespondenceError("empty correspondence")
    if P[:, 0].min() < 0 or P[:, 0].max() >= nx or P[:, 1].min() < 0 or P[:, 1].max() >= ny:
        raise InvalidCorrespondenceError("index out of range")
    if len(np.unique(P[:, 0])) != nx or len(np.unique(P[:, 1])) != ny:
        raise InvalidCorrespondenceError("correspondence is not surjective onto both spaces")
    return P


def stresses(C, X, Y):
    """|d_X(x, x') - d_Y(y, y')| for every ordered pair of correspondence pairs."""
    P = check_correspondence(C, len(X), len(Y))
    dx = X.D[np.ix_(P[:, 0], P[:, 0])]
    dy = Y.D[np.ix_(P[:, 1], P[:, 1])]
    return np.abs(dx - dy)


def distortion(C, X, Y):
    """max over (x,y), (x',y') in C of |d_X(x,x') - d_Y(y,y')|."""
    return float(stresses(C, X, Y).max())


def gromov_hausdorff_bruteforce(X, Y, max_size=GH_HARD_CAP):
    """Half the minimum distortion over all correspondences, by branch and bound.

    Every correspondence contains one of the form graph(f) plus one extra
    pair per point of Y missed by f, with f: X -> Y, and distortion only
    grows with the pair set, so it suffices to enumerate those. Search
    order is lexicographic and ties keep the first minimiser found.
    Returns ``(d_GH, pairs)``.
    """
    cap = min(max_size, GH_HARD_CAP)
    nx, ny = len(X), len(Y)
    if nx > cap or ny > cap:
        raise SizeCapError(f"exhaustive search limited to {cap} points per space")
    if nx == 0 or ny == 0:
        raise ValidationError("empty metric space")
    DX = X.D.tolist()
    DY = Y.D.tolist()
    # initial bound: the full product correspondence is always valid
    best = [max(abs(DX[a][b] - DY[c][d]) for a in range(nx) for b in range(nx)
                for c in range(ny) for d in range(ny)), None]
    best_pairs = [(i, j) for i in range(nx) for j in range(ny)]

    pairs = []

    def add_cost(x, y):
        c = 0.0
        for (a, b) in pairs:
            v = abs(DX[x][a] - DY[y][b])
            if v > c:
                c = v
        return c

    def cover_rest(uncovered, k, cur):
        if k == len(uncovered):
            if cur < best[0] or best[1] is None:
                best[0] = cur
                best[1] = list(pairs)
            return
        y = uncovered[k]
        for x in range(nx):
            c = max(cur, add_cost(x, y))
            if c < best[0] or (best[1] is None and c <= best[0]):
                pairs.append((x, y))
                cover_rest(uncovered, k + 1, c)
                pairs.pop()

    def assign(x, cur, hit):
        if x == nx:
            uncovered = [y for y in range(ny) if not hit[y]]
            cover_rest(uncovered, 0, cur)
            return
        for y in range(ny):
            c = max(cur, add_cost(x, y))
            if c < best[0] or (best[1] is None and c <= best[0]):
                pairs.append((x, y))
                hit[y] += 1
                assign(x + 1, c, hit)
                hit[y] -= 1
                pairs.pop()

    assign(0, 0.0, [0] * ny)
    if best[1] is not None:
        best_pairs = best[1]
    return 0.5 * best[0], sorted(set(best_pairs))


def evaluate_matching(X, Y, C):
    """Distortion of ``C`` with the full list of pairwise stresses."""
    S = stresses(C, X, Y)
    iu = np.triu_indices(len(S), 1)
    return {"distortion": float(S.max()), "stress": S[iu].tolist()}


def farthest_point_sample(spec, count, seed=0, embedding=None):
    """Greedy farthest-point sampling under the commute-time distance.

    The first vertex is drawn from ``seed``. Returns ``(ids, radii)`` where
    ``radii[i]`` is the distance of the ``i``-th pick to the earlier ones.
    """
    E = diffusion.commute_time_embedding(spec) if embedding is None else embedding
    n = len(E)
    if not 1 <= count <= n:
        raise ValidationError("count must be between 1 and the vertex count")
    first = int(np.random.default_rng(seed).integers(n))
    ids = [first]
    radii = [np.inf]
    d = np.linalg.norm(E - E[first], axis=1)
    d[first] = -1.0
    for _ in range(count - 1):
        j = int(np.argmax(d))
        ids.append(j)
        radii.append(float(d[j]))
        d = np.minimum(d, np.linalg.norm(E - E[j], axis=1))
        d[ids] = -1.0
    return np.array(ids, dtype=np.int64), np.array(radii)
