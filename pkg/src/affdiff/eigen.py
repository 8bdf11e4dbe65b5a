"""Smallest eigenpairs of the generalized problem A x = lambda B x."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh, splu

from .errors import ConvergenceError, FactorizationError, ValidationError

MULTIPLET_RTOL = 1e-6
DEFLATION_BLOCK = 8
MAX_DEFLATION_ROUNDS = 10


@dataclass
class SpectralDecomposition:
    """Eigenvalues (ascending) and B-orthonormal eigenvectors (columns of ``vectors``)."""

    values: np.ndarray
    vectors: np.ndarray
    mode: str = "euclidean"
    residuals: np.ndarray | None = None
    multiplet: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.multiplet is None:
            self.multiplet = find_multiplets(self.values)

    @property
    def k(self):
        return len(self.values)

    @property
    def vertex_count(self):
        return self.vectors.shape[0]

    def truncate(self, k):
        return SpectralDecomposition(self.values[:k], self.vectors[:, :k], self.mode,
                                     None if self.residuals is None else self.residuals[:k])

    def to_json(self):
        out = {"mode": self.mode, "k": self.k, "lambda": [float(x) for x in self.values]}
        if self.residuals is not None:
            out["residuals"] = [float(x) for x in self.residuals]
        return json.dumps(out, indent=1)


def find_multiplets(values, rtol=MULTIPLET_RTOL):
    """Flag eigenvalues lying within ``rtol`` (relative) of a neighbour."""
    lam = np.asarray(values, dtype=float)
    flag = np.zeros(len(lam), dtype=bool)
    if len(lam) < 2:
        return flag
    scale = np.maximum(np.abs(lam[1:]), np.abs(lam[:-1]))
    close = np.abs(lam[1:] - lam[:-1]) <= rtol * scale
    flag[1:] |= close
    flag[:-1] |= close
    return flag


def _norm1(M):
    return float(abs(M).sum(axis=0).max()) if sparse.issparse(M) else float(np.abs(M).sum(axis=0).max())


def _normalize_signs(X):
    idx = np.argmax(np.abs(X), axis=0)
    s = np.sign(X[idx, np.arange(X.shape[1])])
    s[s == 0] = 1.0
    return X * s


def _rayleigh_ritz(A, B, X):
    """Re-solve on span(X): improves B-orthonormality inside clusters."""
    AX = A @ X
    BX = B @ X
    Ah = X.T @ AX
    Bh = X.T @ BX
    Ah = 0.5 * (Ah + Ah.T)
    Bh = 0.5 * (Bh + Bh.T)
    lam, Y = scipy.linalg.eigh(Ah, Bh)
    return lam, X @ Y


def residual_norms(A, B, values, vectors):
    R = A @ vectors - (B @ vectors) * values[None, :]
    return np.linalg.norm(R, axis=0)


def _dense(A, B, k):
    Ad = A.toarray() if sparse.issparse(A) else np.asarray(A, dtype=float)
    Bd = B.toarray() if sparse.issparse(B) else np.asarray(B, dtype=float)
    lam, X = scipy.linalg.eigh(Ad, Bd, subset_by_index=[0, k - 1])
    return lam, X


def _lanczos(A, B, k, sigma, solve, v0, tol, ncv=None):
    n = A.shape[0]
    OPinv = LinearOperator((n, n), matvec=solve, dtype=float)
    if ncv is None:
        ncv = min(n - 1, max(2 * k + 1, k + 32))
    try:
        return eigsh(A, k=k, M=B, sigma=sigma, which="LM", OPinv=OPinv, v0=v0,
                     ncv=ncv, tol=tol * 1e-3, maxiter=10 * k + 100)
    except (ArpackNoConvergence, ArpackError) as exc:
        raise ConvergenceError(f"Lanczos did not converge: {exc}") from exc


def _complete_multiplets(A, B, lam, X, sigma, lu, tol):
    """Recover copies of repeated eigenvalues that single-vector Lanczos skipped.

    A Krylov space built from one start vector sees only one direction of
    each exactly repeated eigenvalue; the other copies show up only through
    rounding and may be missing. Solving again in the B-orthogonal
    complement of the pairs found so far exposes them. Rounds repeat until
    nothing below the current largest eigenvalue turns up.
    """
    n, k = X.shape
    for r in range(MAX_DEFLATION_ROUNDS):
        BX = B @ X

        def solve(w, X=X, BX=BX):
            y = lu.solve(w)
            return y - X @ (BX.T @ y)

        v0 = np.random.default_rng([n, r + 1]).standard_normal(n)
        v0 -= X @ (BX.T @ v0)
        m = DEFLATION_BLOCK
        ncv = min(n - k - 1, max(2 * m + 1, m + 20))
        mu, Y = _lanczos(A, B, m, sigma, solve, v0, tol, ncv=ncv)
        new = mu < lam[-1] - 1e-9 * abs(lam[-1])
        if not new.any():
            break
        lam, X = _rayleigh_ritz(A, B, np.hstack([X, Y[:, new]]))
        order = np.argsort(lam, kind="stable")[:k]
        lam, X = lam[order], X[:, order]
    else:
        raise ConvergenceError("eigenvalue multiplicities did not settle")
    return lam, X


def smallest_eigenpairs(system, k=100, tol=1e-10, mode=None, max_retries=3):
    """The ``k`` algebraically smallest eigenpairs of ``A x = lambda B x``.

    Shift-invert Lanczos about a small negative shift, so ``A - sigma B`` is
    positive definite even though ``A`` has constants in its kernel. The
    factorization is retried with a doubled shift if it fails. A deflated
    second pass recovers repeated eigenvalues the first pass skipped. Start
    vectors depend only on ``n``, which makes repeated solves bitwise
    reproducible. Eigenvectors are B-orthonormal and sign-normalized so
    their largest-magnitude entry is positive.
    """
    A = sparse.csr_matrix(system.A)
    B = sparse.csr_matrix(system.B)
    n = A.shape[0]
    if mode is None:
        mode = getattr(system, "mode", "euclidean")
    if not 0 < k <= n:
        raise ValidationError(f"k={k} must be in [1, n={n}]")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    normA = _norm1(A)

    if k >= n - 2 * DEFLATION_BLOCK - 4:
        # too few spare dimensions for Lanczos plus the deflation check; n is small here
        lam, X = _dense(A, B, k)
    else:
        sigma = -1e-8 * A.diagonal().sum() / n
        if sigma == 0:
            sigma = -1e-8
        lu = None
        for _ in range(max_retries + 1):
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("error")
                    lu = splu((A - sigma * B).tocsc())
                if not np.all(np.isfinite(lu.U.diagonal())) or np.any(lu.U.diagonal() == 0):
                    raise RuntimeError("singular factor")
                break
            except (RuntimeError, Warning):
                lu = None
                sigma *= 2
        if lu is None:
            raise FactorizationError("A - sigma B is numerically singular")
        v0 = np.random.default_rng(n).standard_normal(n)
        lam, X = _lanczos(A, B, k, sigma, lu.solve, v0, tol)
        lam, X = _rayleigh_ritz(A, B, X)
        lam, X = _complete_multiplets(A, B, lam, X, sigma, lu, tol)

    order = np.argsort(lam, kind="stable")
    lam, X = lam[order], X[:, order]
    # A is positive semi-definite: negative values at roundoff level are zero
    tiny = (lam < 0) & (lam >= -1e-10 * max(abs(lam[-1]), 1e-300))
    lam = np.where(tiny, 0.0, lam)
    X = _normalize_signs(X)
    res = residual_norms(A, B, lam, X)
    if np.any(res > max(tol, 1e-8) * normA):
        raise ConvergenceError(f"residual {res.max():.3g} exceeds tolerance")
    return SpectralDecomposition(lam, X, mode, res / normA)


def dense_eigenpairs(system, k):
    """Dense generalized solve (reference route for small problems)."""
    lam, X = _dense(system.A, system.B, k)
    return SpectralDecomposition(lam, _normalize_signs(X), getattr(system, "mode", "euclidean"))
