"""Symmetric-matrix primitives: thresholding, Gram matrices, eigensolvers.

The sparse path is what makes the whole estimator fast: after entrywise
soft-thresholding, the sample covariance keeps only O(2*Phi(-tau)*p^2 + k^2)
entries, so Krylov matvecs cost O(nnz) instead of O(p^2).
"""

import numpy as np
import scipy.sparse as sp

from .exceptions import ConvergenceFailure, EmptyInput
from .rng import FrozenRng

# MAD of a standard normal; used to turn MAD into a sigma estimate
NORMAL_MAD = 0.6744897501960817  # Phi^{-1}(3/4)

DENSE_FALLBACK_DIM = 128
_LANCZOS_START_SEED = 0x1A2C205F1ED  # fixed start-vector stream keeps results reproducible


class DenseSymmetric:
    """Dense symmetric matrix; the upper triangle is authoritative.

    Construction mirrors the upper triangle onto the lower one, so the stored
    array is exactly symmetric even if the input carried rounding asymmetry
    (X^T X computed by BLAS can be off by an ulp).
    """

    def __init__(self, entries):
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {entries.shape}")
        if entries.shape[0] == 0:
            raise EmptyInput("empty matrix")
        if not np.all(np.isfinite(entries)):
            raise ValueError("matrix entries must be finite")
        upper = np.triu(entries)
        self.entries = upper + np.triu(entries, 1).T
        self.dim = entries.shape[0]

    def matvec(self, y):
        return self.entries @ y

    def to_dense(self):
        return self.entries

    def negated(self):
        out = object.__new__(DenseSymmetric)
        out.entries = -self.entries
        out.dim = self.dim
        return out


class SparseSymmetric:
    """Symmetric matrix stored as strict-upper CSR plus a dense diagonal."""

    def __init__(self, dim, diag, upper):
        self.dim = int(dim)
        self.diag = np.asarray(diag, dtype=float)
        if self.diag.shape != (self.dim,):
            raise ValueError("diagonal length must equal dim")
        upper = sp.csr_matrix(upper, shape=(self.dim, self.dim), dtype=float)
        upper.eliminate_zeros()
        if upper.nnz and (upper.tocoo().row >= upper.tocoo().col).any():
            raise ValueError("upper factor must be strictly upper triangular")
        self.upper = upper
        self._upper_t = upper.T.tocsr()

    @classmethod
    def from_dense(cls, entries):
        entries = np.asarray(entries, dtype=float)
        diag = np.diagonal(entries).copy()
        upper = sp.csr_matrix(sp.triu(entries, k=1))
        return cls(entries.shape[0], diag, upper)

    @property
    def nnz(self):
        """Exact count of stored nonzero entries of the full matrix."""
        return int(np.count_nonzero(self.diag)) + 2 * int(self.upper.nnz)

    def matvec(self, y):
        return self.diag * y + self.upper @ y + self._upper_t @ y

    def to_dense(self):
        dense = self.upper.toarray()
        dense = dense + dense.T
        dense[np.diag_indices(self.dim)] = self.diag
        return dense

    def negated(self):
        out = object.__new__(SparseSymmetric)
        out.dim = self.dim
        out.diag = -self.diag
        out.upper = -self.upper
        out._upper_t = -self._upper_t
        return out


class EigenPair:
    """(eigenvalue, unit eigenvector) with a residual certificate."""

    __slots__ = ("value", "vector", "residual")

    def __init__(self, value, vector, residual):
        self.value = float(value)
        self.vector = vector
        self.residual = float(residual)

    def __repr__(self):
        return f"EigenPair(value={self.value!r}, residual={self.residual:.3e})"


def soft_threshold(z, level):
    """sgn(z) * (|z| - level)_+, elementwise on arrays."""
    if level < 0:
        raise ValueError("threshold level must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - level, 0.0)


def soft_threshold_matrix(matrix, level, preserve_diagonal=False):
    """Soft-threshold every entry of a DenseSymmetric into a SparseSymmetric.

    `preserve_diagonal` copies the diagonal through unthresholded; it exists
    for diagnostics only — the estimators threshold everything.
    """
    entries = matrix.to_dense()
    dim = matrix.dim
    if preserve_diagonal:
        diag = np.diagonal(entries).copy()
    else:
        diag = soft_threshold(np.diagonal(entries), level)
    upper = sp.csr_matrix(sp.triu(_soft_threshold_dense(entries, level), k=1))
    return SparseSymmetric(dim, diag, upper)


def _soft_threshold_dense(entries, level):
    out = np.abs(entries) - level
    np.maximum(out, 0.0, out=out)
    out *= np.sign(entries)
    return out


def gram_centered(X, subtract_identity=False, sigma2=1.0):
    """X^T X / n as a DenseSymmetric, minus sigma2*I when requested."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise EmptyInput(f"need an n x p matrix with n, p >= 1, got shape {X.shape}")
    n = X.shape[0]
    G = X.T @ X
    G /= n
    if subtract_identity:
        if sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        G[np.diag_indices(X.shape[1])] -= sigma2
    return DenseSymmetric(G)


def mad(values):
    """Median absolute deviation about the median.

    Even-length medians are the midpoint of the two central order statistics
    (numpy's convention).
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise EmptyInput("mad of an empty list")
    return float(np.median(np.abs(values - np.median(values))))


def _apply_sign_convention(vector):
    i = int(np.argmax(np.abs(vector)))
    if vector[i] < 0:
        return -vector
    return vector


def _dense_top_r(M, r, tol):
    dense = M.to_dense()
    values, vectors = np.linalg.eigh(dense)
    pairs = []
    for j in range(r):
        value = values[-1 - j]
        vector = _apply_sign_convention(vectors[:, -1 - j])
        residual = float(np.linalg.norm(M.matvec(vector) - value * vector))
        pairs.append(EigenPair(value, vector, residual))
    return pairs


def _lanczos_top_r(M, r, tol, max_iter):
    """Lanczos with full reorthogonalization; restarts on breakdown.

    Builds an orthonormal Krylov basis Q and tridiagonal T; Ritz pairs of T
    approximate the extremal eigenpairs. The basis is capped at `dim`, where
    the factorization is exact.
    """
    dim = M.dim
    m_max = min(dim, max_iter)
    rng = FrozenRng(_LANCZOS_START_SEED)

    Q = np.zeros((dim, m_max))
    alphas = np.zeros(m_max)
    betas = np.zeros(m_max)  # betas[j] links q_j and q_{j+1}; 0 marks a block boundary

    q = _fresh_start_vector(rng, Q, 0, dim)
    Q[:, 0] = q
    m = 0
    beta_prev = 0.0
    q_prev = np.zeros(dim)
    while m < m_max:
        w = M.matvec(Q[:, m])
        alpha = float(Q[:, m] @ w)
        alphas[m] = alpha
        w = w - alpha * Q[:, m] - beta_prev * q_prev
        # full reorthogonalization, twice for safety
        w -= Q[:, : m + 1] @ (Q[:, : m + 1].T @ w)
        w -= Q[:, : m + 1] @ (Q[:, : m + 1].T @ w)
        beta = float(np.linalg.norm(w))
        m += 1

        # tridiagonal eigensolves are O(m^3); space the checks out as m grows
        interval = 5 if m <= 100 else 20
        check_now = m >= r and (m % interval == 0 or m == m_max or beta <= 1e-13)
        if check_now:
            values, S = _tridiag_eigh(alphas[:m], betas[: m - 1])
            top = values[::-1][:r]
            bottom_row = S[-1, ::-1][:r]
            res_est = np.abs(beta * bottom_row)
            if np.all(res_est <= tol * np.maximum(1.0, np.abs(top))) or m == dim:
                return _ritz_pairs(M, Q[:, :m], values, S, r)

        if m == m_max:
            break
        if beta <= 1e-13:
            # invariant subspace: start a new block with a fresh vector
            betas[m - 1] = 0.0
            beta_prev = 0.0
            q_prev = np.zeros(dim)
            Q[:, m] = _fresh_start_vector(rng, Q, m, dim)
        else:
            betas[m - 1] = beta
            beta_prev = beta
            q_prev = Q[:, m - 1]
            Q[:, m] = w / beta

    values, S = _tridiag_eigh(alphas[:m], betas[: m - 1])
    pairs = _ritz_pairs(M, Q[:, :m], values, S, min(r, m))
    worst = max(p.residual for p in pairs) if pairs else np.inf
    best = pairs[0] if pairs else None
    raise ConvergenceFailure(
        f"Lanczos did not converge to tol={tol:g} within {max_iter} iterations "
        f"(best residual {worst:.3e})",
        best_value=None if best is None else best.value,
        best_vector=None if best is None else best.vector,
        residual=worst,
    )


def _fresh_start_vector(rng, Q, m, dim):
    for _ in range(100):
        v = rng.normals(dim)
        if m:
            v -= Q[:, :m] @ (Q[:, :m].T @ v)
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            return v / nrm
    raise ConvergenceFailure("could not generate a start vector orthogonal to the basis")


def _tridiag_eigh(alphas, offdiag):
    T = np.diag(alphas)
    if offdiag.size:
        T += np.diag(offdiag, 1) + np.diag(offdiag, -1)
    return np.linalg.eigh(T)


def _ritz_pairs(M, Q, values, S, r):
    pairs = []
    for j in range(r):
        value = values[-1 - j]
        vector = Q @ S[:, -1 - j]
        vector /= np.linalg.norm(vector)
        vector = _apply_sign_convention(vector)
        residual = float(np.linalg.norm(M.matvec(vector) - value * vector))
        pairs.append(EigenPair(value, vector, residual))
    return pairs


def top_r_eigenpairs(M, r, tol=1e-9, max_iter=None, solver="auto"):
    """Top-r eigenpairs by algebraic value, descending.

    Sign convention: the entry of largest absolute value of each vector is
    made nonnegative (first such entry on ties), so output is deterministic.

    solver: "auto" uses Lanczos with a dense fallback for dim <= 128 or on
    non-convergence; "lanczos"/"dense" force a path (forcing "lanczos"
    propagates ConvergenceFailure instead of falling back).
    """
    if r < 1 or r > M.dim:
        raise ValueError(f"r={r} out of range for dim={M.dim}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * M.dim

    if solver == "dense":
        return _dense_top_r(M, r, tol)
    if solver == "lanczos":
        return _lanczos_top_r(M, r, tol, max_iter)
    if solver != "auto":
        raise ValueError(f"unknown solver {solver!r}")
    if M.dim <= DENSE_FALLBACK_DIM:
        return _dense_top_r(M, r, tol)
    try:
        return _lanczos_top_r(M, r, tol, max_iter)
    except ConvergenceFailure:
        return _dense_top_r(M, r, tol)


def spectral_norm(M, tol=1e-9):
    """max(|lambda_max|, |lambda_min|) via extremal eigenpairs of M and -M."""
    top = top_r_eigenpairs(M, 1, tol=tol)[0].value
    bottom = top_r_eigenpairs(M.negated(), 1, tol=tol)[0].value
    return max(top, bottom, 0.0)
