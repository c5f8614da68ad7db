"""Orthonormal Haar transform and the block-constant demo signal."""

import numpy as np

from .exceptions import LengthNotPowerOfTwo

_SQRT2 = np.sqrt(2.0)


def _levels(n):
    m = n.bit_length() - 1
    if n < 1 or (1 << m) != n:
        raise LengthNotPowerOfTwo(f"length {n} is not a power of two")
    return m


def haar_forward(signal):
    """Full orthonormal Haar decomposition.

    Output layout: [scaling coefficient, coarsest details, ..., finest
    details]; preserves the l2 norm exactly up to rounding.
    """
    x = np.asarray(signal, dtype=float)
    m = _levels(x.size)
    out = np.empty(x.size)
    approx = x.copy()
    for _ in range(m):
        half = approx.size // 2
        detail = (approx[0::2] - approx[1::2]) / _SQRT2
        approx = (approx[0::2] + approx[1::2]) / _SQRT2
        out[half : 2 * half] = detail
    out[0] = approx[0]
    return out


def haar_inverse(coeffs):
    """Inverse of haar_forward."""
    w = np.asarray(coeffs, dtype=float)
    m = _levels(w.size)
    approx = w[:1].copy()
    for _ in range(m):
        half = approx.size
        detail = w[half : 2 * half]
        up = np.empty(2 * half)
        up[0::2] = (approx + detail) / _SQRT2
        up[1::2] = (approx - detail) / _SQRT2
        approx = up
    return approx


def block_constant_signal(p, boundaries=(0.3, 0.7), levels=(1.0, 3.0, 2.0)):
    """Piecewise-constant signal over [0, p); sparse in the Haar basis.

    Defaults give three blocks with distinct levels. A signal with B blocks
    has at most B*log2(p) + 1 nonzero Haar coefficients.
    """
    _levels(p)
    if len(levels) != len(boundaries) + 1:
        raise ValueError("need one level per block")
    cuts = [0] + [int(round(b * p)) for b in boundaries] + [p]
    signal = np.empty(p)
    for lo, hi, level in zip(cuts, cuts[1:], levels):
        signal[lo:hi] = level
    return signal
