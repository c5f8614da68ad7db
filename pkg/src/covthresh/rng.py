"""Frozen, portable random number generation.

Every random quantity in this package comes from one fixed stack so that a
seed reproduces the same bytes on any platform and any library version:

* bit stream: Philox4x64-10 counter-based generator (``numpy.random.Philox``
  with an explicit 64-bit ``key``; the raw outputs are the published Philox
  algorithm, not a numpy distribution method, so they are stable),
* uniforms on [0, 1): the top 53 bits of each raw word, ``(x >> 11) * 2**-53``,
* standard normals: Marsaglia's polar method with batched rejection (pairs
  are consumed from the uniform stream in order; leftovers of a batch are
  discarded, so the amount of stream consumed is a deterministic function of
  the request sequence),
* substreams: ``derive_seed(base, *indices)`` chains the SplitMix64
  finalizer, giving independent, order-free per-trial seeds.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x):
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(base, *indices):
    """Hash (base, i1, i2, ...) into a 64-bit substream seed."""
    s = _splitmix64(int(base) & _MASK64)
    for ix in indices:
        s = _splitmix64(s ^ _splitmix64(int(ix) & _MASK64))
    return s


class FrozenRng:
    """Deterministic generator over a Philox4x64 stream (see module docs)."""

    def __init__(self, seed):
        self.seed = int(seed) & _MASK64
        self._bitgen = np.random.Philox(key=self.seed)

    def uniforms(self, count):
        """`count` doubles uniform on [0, 1)."""
        if count == 0:
            return np.empty(0)
        raw = self._bitgen.random_raw(int(count))
        return (raw >> np.uint64(11)) * 2.0**-53

    def normals(self, count):
        """`count` standard normals via the polar method."""
        count = int(count)
        out = np.empty(count)
        filled = 0
        while filled < count:
            # expected acceptance is pi/4; 1.4x oversampling keeps the
            # number of refill rounds small without wasting much stream
            npairs = max(256, int((count - filled) * 0.72) + 16)
            u = self.uniforms(2 * npairs)
            x = 2.0 * u[0::2] - 1.0
            y = 2.0 * u[1::2] - 1.0
            s = x * x + y * y
            keep = (s > 0.0) & (s < 1.0)
            x, y, s = x[keep], y[keep], s[keep]
            f = np.sqrt(-2.0 * np.log(s) / s)
            z = np.empty(2 * x.size)
            z[0::2] = x * f
            z[1::2] = y * f
            take = min(z.size, count - filled)
            out[filled : filled + take] = z[:take]
            filled += take
        return out

    def normal_matrix(self, rows, cols):
        """rows x cols standard normal matrix, filled in row-major order."""
        return self.normals(rows * cols).reshape(rows, cols)

    def signs(self, count):
        """`count` entries from {-1.0, +1.0}, +1 when the uniform is >= 1/2."""
        return np.where(self.uniforms(count) >= 0.5, 1.0, -1.0)
