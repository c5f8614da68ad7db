"""Sparse-PCA estimators with a scikit-learn style surface.

All estimators take a plain (rows = observations) float matrix in fit(),
validate it, and expose fitted state through trailing-underscore attributes.
They are deterministic given (X, params): eigensolver start vectors are
frozen and the only randomized piece (the noise-resampled spectrum edge of
DataDrivenThresholding) is driven by an explicit random_state.
"""

import math
import time
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import linalg
from .exceptions import DegenerateInput, InvalidConfig
from .rng import FrozenRng, derive_seed


def _as_sample_matrix(X, min_rows=1, min_cols=1):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidConfig(f"expected a 2-d sample matrix, got ndim={X.ndim}")
    if X.shape[0] < min_rows or X.shape[1] < min_cols:
        raise InvalidConfig(
            f"sample matrix of shape {X.shape} is smaller than "
            f"({min_rows}, {min_cols})"
        )
    if not np.all(np.isfinite(X)):
        raise InvalidConfig("sample matrix contains non-finite entries")
    return X


def default_rho(betas, theta, ks):
    """Cleaning threshold min_q beta_q * theta / (4 sqrt(k_q))."""
    betas = np.asarray(betas, dtype=float)
    ks = np.asarray(ks, dtype=float)
    if betas.shape != ks.shape or betas.size == 0:
        raise InvalidConfig("betas and ks must be equal-length and nonempty")
    if np.any(betas <= 0) or theta <= 0 or np.any(ks <= 0):
        raise InvalidConfig("default_rho needs positive betas, theta and ks")
    return float(np.min(betas * theta / (4.0 * np.sqrt(ks))))


@lru_cache(maxsize=64)
def _unit_bulk_edge(m, p, unit_level, trials, seed):
    """Max top eigenvalue of eta(W'W/m - I) over `trials` unit-noise draws."""
    edge = 0.0
    for t in range(trials):
        rng = FrozenRng(derive_seed(seed, t))
        W = rng.normal_matrix(m, p)
        sigma = linalg.gram_centered(W, subtract_identity=True, sigma2=1.0)
        thresholded = linalg.soft_threshold_matrix(sigma, unit_level)
        if thresholded.nnz == 0:
            continue
        top = linalg.top_r_eigenpairs(thresholded, 1)[0].value
        edge = max(edge, top)
    return edge


def estimate_bulk_edge(m, p, sigma_hat, tau, trials=5, seed=0, safety=1.05):
    """Empirical upper edge of the pure-noise thresholded spectrum.

    Resamples `trials` noise matrices N(0, sigma_hat^2) of shape m x p, forms
    eta(Z'Z/m - sigma_hat^2 I) at entrywise level tau/sqrt(m) and returns the
    largest top eigenvalue seen, inflated by `safety`. Internally the noise is
    drawn at unit variance and rescaled through the exact identity
    eta(c^2 A; c^2 t) = c^2 eta(A; t), which makes the sigma^2-equivariance of
    the result exact and the unit computation reusable across fits.
    """
    if trials < 1:
        raise InvalidConfig("trials must be >= 1")
    if sigma_hat <= 0:
        raise DegenerateInput("sigma_hat must be positive")
    level = tau / math.sqrt(m)
    unit_level = level / (sigma_hat * sigma_hat)
    edge = _unit_bulk_edge(int(m), int(p), float(unit_level), int(trials), int(seed))
    return sigma_hat * sigma_hat * edge * safety


def _fit_half_covariances(X):
    """Split rows in half; Sigma-hat from the first, Sigma-hat' from the second."""
    m = X.shape[0]
    if m % 2 != 0:
        raise InvalidConfig(f"need an even number of rows (2n), got {m}")
    n = m // 2
    sigma = linalg.gram_centered(X[:n], subtract_identity=True, sigma2=1.0)
    sigma_prime = linalg.gram_centered(X[n:], subtract_identity=True, sigma2=1.0)
    return n, sigma, sigma_prime


class CovarianceThresholding(BaseEstimator, TransformerMixin):
    """Support recovery by soft-thresholding the sample covariance.

    Rows of X are split in half. The first half yields Sigma-hat = G - I,
    which is entrywise soft-thresholded at level tau/sqrt(n); the leading
    eigenvectors v_q of the result are cleaned against a magnitude cutoff
    and scored against the independent second-half covariance: coordinate i
    enters the support when |(Sigma-hat' s_q)_i| >= rho for some q.

    Parameters
    ----------
    tau : rescaled entrywise threshold; the applied level is tau/sqrt(n).
    rho : cleaning threshold on the second-half scores.
    support_sizes : list of assumed spike support sizes k_q (one per
        component); the cleaning cutoff for component q is
        theta / (2 sqrt(k_q)) with a >= comparison.
    k0 : single ballpark support-size bound replacing support_sizes; the
        cutoff becomes theta / (2 sqrt(k0)) with a strict > comparison for
        every component. Exactly one of support_sizes/k0 must be given.
    n_components : number of leading eigenvectors r (defaults to
        len(support_sizes), required with k0).
    theta : spike-magnitude floor parameter.
    eig_tol, eig_max_iter : eigensolver controls.

    Attributes
    ----------
    support_ : sorted int array, the recovered support.
    components_ : (r, p) leading eigenvectors of the thresholded matrix.
    cleaned_components_ : (r, p) vectors s_q after the magnitude cutoff.
    scores_ : (r, p) cleaning scores |(Sigma-hat' s_q)_i|.
    eigenvalues_ : (r,) leading eigenvalues.
    diagnostics_ : dict with nnz, eigensolver residuals and timings.
    """

    def __init__(self, tau=4.0, rho=0.0, support_sizes=None, k0=None,
                 n_components=None, theta=1.0, eig_tol=1e-9, eig_max_iter=None):
        self.tau = tau
        self.rho = rho
        self.support_sizes = support_sizes
        self.k0 = k0
        self.n_components = n_components
        self.theta = theta
        self.eig_tol = eig_tol
        self.eig_max_iter = eig_max_iter

    def _resolve(self, p):
        if (self.support_sizes is None) == (self.k0 is None):
            raise InvalidConfig("give exactly one of support_sizes or k0")
        if self.tau < 0 or self.rho < 0:
            raise InvalidConfig("tau and rho must be nonnegative")
        if self.support_sizes is not None:
            ks = [int(k) for k in self.support_sizes]
            r = self.n_components if self.n_components is not None else len(ks)
            if r != len(ks):
                raise InvalidConfig("n_components must match len(support_sizes)")
            if any(k < 1 or k > p for k in ks):
                raise InvalidConfig("every support size must lie in [1, p]")
            cutoffs = [self.theta / (2.0 * math.sqrt(k)) for k in ks]
            strict = False
        else:
            if self.n_components is None:
                raise InvalidConfig("n_components is required with k0")
            r = int(self.n_components)
            k0 = int(self.k0)
            if k0 < 1:
                raise InvalidConfig("k0 must be >= 1")
            cutoffs = [self.theta / (2.0 * math.sqrt(k0))] * r
            strict = True
        if r < 1 or r > p:
            raise InvalidConfig(f"n_components={r} out of range for p={p}")
        return r, cutoffs, strict

    def fit(self, X, y=None):
        X = _as_sample_matrix(X, min_rows=2)
        p = X.shape[1]
        r, cutoffs, strict = self._resolve(p)

        t0 = time.perf_counter()
        n, sigma, sigma_prime = _fit_half_covariances(X)
        level = self.tau / math.sqrt(n)
        thresholded = linalg.soft_threshold_matrix(sigma, level)
        t_gram = time.perf_counter()

        pairs = linalg.top_r_eigenpairs(
            thresholded, r, tol=self.eig_tol,
            max_iter=self.eig_max_iter if self.eig_max_iter is not None else 10 * p,
        )
        t_eig = time.perf_counter()

        components = np.vstack([pair.vector for pair in pairs])
        cleaned = np.zeros_like(components)
        for q in range(r):
            mag = np.abs(components[q])
            keep = mag > cutoffs[q] if strict else mag >= cutoffs[q]
            cleaned[q, keep] = components[q, keep]

        scores = np.abs(cleaned @ sigma_prime.to_dense())
        support = np.flatnonzero((scores >= self.rho).any(axis=0))

        self.n_samples_half_ = n
        self.components_ = components
        self.cleaned_components_ = cleaned
        self.scores_ = scores
        self.eigenvalues_ = np.array([pair.value for pair in pairs])
        self.support_ = support
        # the guarantee regime k <= k0 <= 20k is not enforced; record a proxy
        # test against the cleaned support size, which estimates k
        cleaned_size = int(np.count_nonzero((cleaned != 0.0).any(axis=0)))
        self.diagnostics_ = {
            "nnz": thresholded.nnz,
            "residuals": [pair.residual for pair in pairs],
            "level": level,
            "cutoffs": cutoffs,
            "k0_regime_ok": None if self.k0 is None
            else bool(cleaned_size <= self.k0 <= 20 * max(cleaned_size, 1)),
            "wall_gram_s": t_gram - t0,
            "wall_eig_s": t_eig - t_gram,
        }
        return self

    def transform(self, X):
        X = _as_sample_matrix(X)
        return X @ self.components_.T


class DiagonalThresholding(BaseEstimator, TransformerMixin):
    """Baseline: keep the k largest diagonal entries of the Gram matrix.

    Uses all rows of X (no sample splitting). Ties in the diagonal ordering
    break toward the lowest index. The component is the principal eigenvector
    of the Gram matrix restricted to the selected block, zero-padded.
    """

    def __init__(self, k=1, eig_tol=1e-9):
        self.k = k
        self.eig_tol = eig_tol

    def fit(self, X, y=None):
        X = _as_sample_matrix(X)
        p = X.shape[1]
        if not 1 <= self.k <= p:
            raise InvalidConfig(f"k={self.k} out of range for p={p}")
        diag = np.einsum("ij,ij->j", X, X) / X.shape[0]
        # stable sort on negated values -> descending with lowest-index ties
        order = np.argsort(-diag, kind="stable")
        selected = np.sort(order[: self.k])

        sub = linalg.gram_centered(X[:, selected])
        pair = linalg.top_r_eigenpairs(sub, 1, tol=self.eig_tol)[0]
        component = np.zeros(p)
        component[selected] = pair.vector

        self.gram_diagonal_ = diag
        self.support_ = selected
        self.components_ = component[None, :]
        self.eigenvalues_ = np.array([pair.value])
        return self

    def transform(self, X):
        X = _as_sample_matrix(X)
        return X @ self.components_.T


class VanillaPCA(BaseEstimator, TransformerMixin):
    """Classical PCA: leading eigenvectors of the full-sample Gram matrix."""

    def __init__(self, n_components=1, eig_tol=1e-9):
        self.n_components = n_components
        self.eig_tol = eig_tol

    def fit(self, X, y=None):
        X = _as_sample_matrix(X)
        if not 1 <= self.n_components <= X.shape[1]:
            raise InvalidConfig("n_components out of range")
        gram = linalg.gram_centered(X)
        pairs = linalg.top_r_eigenpairs(gram, self.n_components, tol=self.eig_tol)
        self.components_ = np.vstack([pair.vector for pair in pairs])
        self.eigenvalues_ = np.array([pair.value for pair in pairs])
        return self

    def transform(self, X):
        X = _as_sample_matrix(X)
        return X @ self.components_.T


class DataDrivenThresholding(BaseEstimator, TransformerMixin):
    """Fully data-driven covariance thresholding.

    No model parameters are assumed. The pipeline: center columns; estimate
    the noise scale sigma from the MAD of all centered entries; soft-threshold
    the centered covariance at nu_prime * sigma^2 / sqrt(m); count components
    as eigenvalues above a noise-resampled spectrum edge; denoise each kept
    eigenvector by hard-thresholding its entries at nu_prime times a MAD-based
    per-vector noise scale, then renormalize.

    Parameters
    ----------
    nu_prime : threshold multiplier (the paper-scale "a few sigmas").
    edge_trials : noise resamples used for the spectrum edge.
    edge_safety : multiplier applied to the observed edge.
    random_state : seed for the edge resampling (results are deterministic).
    max_components : cap on how many eigenvalues are examined.

    Attributes
    ----------
    mean_ : (p,) column means.
    sigma_ : robust noise-scale estimate.
    bulk_edge_ : estimated spectrum edge.
    n_components_ : number of eigenvalues found above the edge.
    eigenvalues_ : the examined leading eigenvalues (descending).
    components_ : (n_components_, p) denoised unit eigenvectors.
    raw_components_ : same shape, eigenvectors before hard thresholding.
    support_ : union of the nonzero coordinates of components_.
    """

    def __init__(self, nu_prime=4.0, edge_trials=5, edge_safety=1.05,
                 random_state=0, max_components=32, eig_tol=1e-9):
        self.nu_prime = nu_prime
        self.edge_trials = edge_trials
        self.edge_safety = edge_safety
        self.random_state = random_state
        self.max_components = max_components
        self.eig_tol = eig_tol

    def fit(self, X, y=None):
        X = _as_sample_matrix(X, min_rows=2, min_cols=2)
        m, p = X.shape
        if self.nu_prime <= 0:
            raise InvalidConfig("nu_prime must be positive")

        mean = X.mean(axis=0)
        centered = X - mean[None, :]
        sigma = linalg.mad(centered) / linalg.NORMAL_MAD
        if sigma == 0.0:
            raise DegenerateInput("constant data: MAD-based scale estimate is zero")

        tau = self.nu_prime * sigma * sigma  # rescaled; entrywise level tau/sqrt(m)
        level = tau / math.sqrt(m)
        covariance = linalg.gram_centered(
            centered, subtract_identity=True, sigma2=sigma * sigma
        )
        thresholded = linalg.soft_threshold_matrix(covariance, level)

        edge = estimate_bulk_edge(
            m, p, sigma, tau,
            trials=self.edge_trials, seed=self.random_state, safety=self.edge_safety,
        )

        values, vectors = self._leading_spectrum(thresholded, edge, p)
        n_components = int(np.sum(values > edge))
        raw = vectors[:n_components]
        components = np.vstack([self._denoise(v) for v in raw]) if n_components else (
            np.empty((0, p))
        )

        self.mean_ = mean
        self.sigma_ = sigma
        self.tau_ = tau
        self.bulk_edge_ = edge
        self.eigenvalues_ = values
        self.n_components_ = n_components
        self.raw_components_ = raw
        self.components_ = components
        self.support_ = np.flatnonzero((components != 0.0).any(axis=0)) if n_components \
            else np.empty(0, dtype=int)
        return self

    def _leading_spectrum(self, thresholded, edge, p):
        """Expand the examined spectrum until one eigenvalue falls below edge."""
        if thresholded.nnz == 0:
            return np.zeros(1), np.zeros((1, p))
        want = 4
        while True:
            want = min(want, p, self.max_components)
            pairs = linalg.top_r_eigenpairs(thresholded, want, tol=self.eig_tol)
            values = np.array([pair.value for pair in pairs])
            if values.min() <= edge or want >= min(p, self.max_components):
                return values, np.vstack([pair.vector for pair in pairs])
            want *= 2

    def _denoise(self, vector):
        noise_scale = linalg.mad(vector) / linalg.NORMAL_MAD
        keep = np.abs(vector) >= self.nu_prime * noise_scale
        if not keep.any():
            # denoising wiped the vector; fall back to its largest coordinate
            keep = np.zeros_like(keep)
            keep[int(np.argmax(np.abs(vector)))] = True
        out = np.where(keep, vector, 0.0)
        return out / np.linalg.norm(out)

    def transform(self, X):
        X = _as_sample_matrix(X)
        return (X - self.mean_[None, :]) @ self.components_.T
