"""Estimator-quality metrics and covariance-block diagnostics."""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import IndexOutOfRange, MissingTruth, NotUnitNorm


@dataclass(frozen=True)
class SupportMetrics:
    exact: bool
    fraction: float
    symdiff: int
    false_pos: int
    false_neg: int


def support_metrics(estimated, truth, p):
    """Compare an estimated support against the true one inside [0, p)."""
    est = frozenset(int(i) for i in estimated)
    tru = frozenset(int(i) for i in truth)
    for s in (est, tru):
        if s and (min(s) < 0 or max(s) >= p):
            raise IndexOutOfRange(f"support index outside [0, {p})")
    inter = est & tru
    false_pos = len(est - tru)
    false_neg = len(tru - est)
    if tru:
        fraction = len(inter) / len(tru)
    else:
        fraction = 1.0 if not est else 0.0
    symdiff = false_pos + false_neg
    return SupportMetrics(
        exact=symdiff == 0,
        fraction=fraction,
        symdiff=symdiff,
        false_pos=false_pos,
        false_neg=false_neg,
    )


def vector_loss(vhat, v, norm_tol=1e-6):
    """Sign-agnostic l2 loss min(||vhat - v||, ||vhat + v||)."""
    vhat = np.asarray(vhat, dtype=float)
    v = np.asarray(v, dtype=float)
    for name, x in (("vhat", vhat), ("v", v)):
        err = abs(np.linalg.norm(x) - 1.0)
        if err > norm_tol:
            raise NotUnitNorm(f"{name} deviates from unit norm by {err:.2e}")
    return float(min(np.linalg.norm(vhat - v), np.linalg.norm(vhat + v)))


@dataclass(frozen=True)
class DecompDiagnostics:
    """Spectral norms of the four blocks of the thresholded covariance.

    The entries of eta(Sigma-hat) are partitioned by index: the in-support
    blocks (signal), the off-diagonal outside every support (pure noise),
    the cross terms, and the out-of-support diagonal.
    """

    norm_S_minus_signal: float
    norm_N: float
    norm_R1: float
    norm_R2: float


def _block_masks(p, supports):
    union = np.zeros(p, dtype=bool)
    e_mask = np.zeros((p, p), dtype=bool)
    for support in supports:
        ind = np.zeros(p, dtype=bool)
        ind[list(support)] = True
        union |= ind
        e_mask |= np.outer(ind, ind)
    eye = np.eye(p, dtype=bool)
    d_mask = eye & ~np.outer(union, union)
    f_mask = np.outer(~union, ~union) & ~d_mask
    g_mask = ~(d_mask | e_mask | f_mask)
    return e_mask, f_mask, g_mask, d_mask


def _masked_norm(dense, mask, tol):
    block = np.where(mask, dense, 0.0)
    sparse = linalg.SparseSymmetric.from_dense(block)
    if sparse.nnz == 0:
        return 0.0
    return linalg.spectral_norm(sparse, tol=tol)


def decomposition_diagnostics(dataset, tau, eig_tol=1e-9):
    """Block norms of eta(Sigma-hat) for a synthetic dataset.

    Sigma-hat is built from the first n rows, exactly as the estimator sees
    it. Coordinates outside the union of supports carry no signal, so the
    out-of-support blocks are identically the pure-noise blocks.
    """
    if dataset.truth is None:
        raise MissingTruth("decomposition diagnostics need a dataset with truth")
    truth = dataset.truth
    n = dataset.n
    p = dataset.p
    sigma = linalg.gram_centered(dataset.X[:n], subtract_identity=True, sigma2=1.0)
    level = tau / math.sqrt(n)
    eta = linalg.soft_threshold_matrix(sigma, level).to_dense()

    e_mask, f_mask, g_mask, d_mask = _block_masks(p, truth.supports)

    signal = np.zeros((p, p))
    for beta, vector in zip(truth.betas, truth.vectors):
        signal += beta * np.outer(vector, vector)
    s_minus = np.where(e_mask, eta, 0.0) - signal

    return DecompDiagnostics(
        norm_S_minus_signal=float(
            linalg.spectral_norm(linalg.SparseSymmetric.from_dense(s_minus), tol=eig_tol)
        ) if np.any(s_minus) else 0.0,
        norm_N=_masked_norm(eta, f_mask, eig_tol),
        norm_R1=_masked_norm(eta, g_mask, eig_tol),
        norm_R2=float(np.max(np.abs(np.where(d_mask, eta, 0.0)))),
    )


def decomposition_blocks(dataset, tau):
    """The four dense blocks themselves (test hook: they must sum to eta)."""
    if dataset.truth is None:
        raise MissingTruth("decomposition diagnostics need a dataset with truth")
    n = dataset.n
    p = dataset.p
    sigma = linalg.gram_centered(dataset.X[:n], subtract_identity=True, sigma2=1.0)
    eta = linalg.soft_threshold_matrix(sigma, tau / math.sqrt(n)).to_dense()
    masks = _block_masks(p, dataset.truth.supports)
    return tuple(np.where(m, eta, 0.0) for m in masks), eta
