"""Synthetic low-rank-plus-noise data generation.

A dataset of 2n rows follows x_i = sum_q sqrt(beta_q) u_{q,i} v_q + z_i with
u, z i.i.d. standard normal and v_q unit-norm sparse spikes. Generation order
is frozen (see sample_dataset) so a seed reproduces the matrix bit-for-bit.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InfeasibleSpec, InvalidConfig
from .rng import FrozenRng

SPIKE_KINDS = ("uniform-magnitude", "signed-uniform", "explicit")


@dataclass(frozen=True)
class SpikeSpec:
    """Recipe for one sparse unit-norm spike.

    Entries on `support` are bounded below in magnitude by theta/sqrt(k);
    `values` is required for kind="explicit" (entries listed in support order,
    normalized on construction of the spike).
    """

    p: int
    support: tuple
    kind: str = "uniform-magnitude"
    theta: float = 1.0
    values: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(i) for i in self.support))
        if self.kind not in SPIKE_KINDS:
            raise InvalidConfig(f"unknown spike kind {self.kind!r}")
        if len(self.support) < 1:
            raise InvalidConfig("spike support must be nonempty")
        if len(set(self.support)) != len(self.support):
            raise InvalidConfig("spike support indices must be distinct")
        if min(self.support) < 0 or max(self.support) >= self.p:
            raise InvalidConfig("spike support index out of range")
        if not (0.0 < self.theta <= 1.0):
            raise InvalidConfig("theta must lie in (0, 1]")
        if self.kind == "explicit":
            if self.values is None or len(self.values) != len(self.support):
                raise InvalidConfig("explicit spike needs one value per support index")
        elif self.values is not None:
            raise InvalidConfig("values are only allowed for explicit spikes")

    @property
    def k(self):
        return len(self.support)


@dataclass(frozen=True)
class Truth:
    """Realized spikes behind a synthetic dataset."""

    betas: tuple
    vectors: np.ndarray  # r x p, rows unit norm
    supports: tuple      # tuple of tuples of ints

    @property
    def support_union(self):
        out = set()
        for s in self.supports:
            out.update(s)
        return frozenset(out)

    @property
    def r(self):
        return len(self.betas)


@dataclass(frozen=True)
class ModelParams:
    p: int
    betas: tuple
    spikes: tuple
    gamma: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "spikes", tuple(self.spikes))
        if len(self.betas) != len(self.spikes):
            raise InvalidConfig("need one beta per spike")
        if any(b < 0 for b in self.betas):
            raise InvalidConfig("betas must be nonnegative")
        if any(b > 0 for b in self.betas):
            # A1: strictly decreasing, distinct (all-zero betas allowed in test builds)
            for a, b in zip(self.betas, self.betas[1:]):
                if not a > b:
                    raise InvalidConfig("betas must be strictly decreasing")
        for spec in self.spikes:
            if spec.p != self.p:
                raise InvalidConfig("spike dimension disagrees with model dimension")
        kinds = {s.kind for s in self.spikes}
        if len(self.spikes) > 1 and kinds != {"explicit"}:
            supports = [set(s.support) for s in self.spikes]
            for i in range(len(supports)):
                for j in range(i + 1, len(supports)):
                    if supports[i] & supports[j]:
                        raise InvalidConfig(
                            "generated spikes must have disjoint supports; "
                            "use explicit spikes for overlapping supports"
                        )

    @property
    def r(self):
        return len(self.betas)


@dataclass
class Dataset:
    """2n x p sample matrix with its generating seed and (optional) truth."""

    X: np.ndarray
    n: int
    seed: int = None
    truth: Truth = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise InvalidConfig("dataset matrix must be 2-d")
        if self.X.shape[0] != 2 * self.n:
            raise InvalidConfig(
                f"dataset must have exactly 2n={2 * self.n} rows, got {self.X.shape[0]}"
            )

    @property
    def p(self):
        return self.X.shape[1]


def make_spike(spec, rng):
    """Draw one unit-norm spike vector according to its spec.

    uniform-magnitude: entries are +-1/sqrt(k), signs from the rng (one
    uniform per support index, in support order; u >= 1/2 gives +).
    signed-uniform: magnitudes uniform on [theta/sqrt(k), 1/sqrt(k)] (one
    uniform per index), then signs (one uniform per index), then normalize;
    the theta bound is re-checked after normalization.
    explicit: user-supplied values, normalized.
    """
    k = spec.k
    v = np.zeros(spec.p)
    root_k = math.sqrt(k)
    if spec.kind == "uniform-magnitude":
        signs = rng.signs(k)
        v[list(spec.support)] = signs / root_k
    elif spec.kind == "signed-uniform":
        lo = spec.theta / root_k
        hi = 1.0 / root_k
        mags = lo + rng.uniforms(k) * (hi - lo)
        signs = rng.signs(k)
        entries = signs * mags
        entries /= np.linalg.norm(entries)
        if np.min(np.abs(entries)) < spec.theta / root_k - 1e-12:
            raise InfeasibleSpec(
                "normalization violated the theta lower bound; "
                f"theta={spec.theta} is infeasible for k={k}"
            )
        v[list(spec.support)] = entries
    else:  # explicit
        entries = np.asarray(spec.values, dtype=float)
        nrm = np.linalg.norm(entries)
        if nrm == 0:
            raise InfeasibleSpec("explicit spike values are all zero")
        entries = entries / nrm
        if np.min(np.abs(entries)) < spec.theta / root_k - 1e-12:
            raise InfeasibleSpec("explicit spike violates the theta magnitude bound")
        v[list(spec.support)] = entries
    return v


def _validate_realized(params, vectors):
    """Orthogonality always (the model demands orthonormal spikes); the gamma
    entry-ratio bound additionally on any shared support."""
    for i in range(params.r):
        for j in range(i + 1, params.r):
            shared = set(params.spikes[i].support) & set(params.spikes[j].support)
            for idx in shared:
                ratio = abs(vectors[i, idx] / vectors[j, idx])
                if max(ratio, 1.0 / ratio) > params.gamma:
                    raise InfeasibleSpec(
                        f"entry ratio at shared index {idx} exceeds gamma={params.gamma}"
                    )
            dot = abs(float(vectors[i] @ vectors[j]))
            if dot > 1e-10:
                raise InfeasibleSpec(f"spikes {i} and {j} are not orthogonal (|dot|={dot:.2e})")


def sample_dataset(params, n, seed):
    """Sample a Dataset of 2n rows from the spiked model.

    Draw order (frozen): spikes in order q = 0..r-1, then the 2n x r factor
    matrix U (row-major), then the 2n x p noise matrix Z (row-major), all
    from a single FrozenRng(seed) stream. The signal is accumulated with
    elementwise outer products (no BLAS), so the bytes of X depend only on
    the seed and the parameters.
    """
    if n < 1:
        raise InvalidConfig("n must be >= 1")
    rng = FrozenRng(seed)
    vectors = np.vstack([make_spike(spec, rng) for spec in params.spikes])
    _validate_realized(params, vectors)
    m = 2 * n
    U = rng.normal_matrix(m, params.r)
    X = rng.normal_matrix(m, params.p)
    for q, beta in enumerate(params.betas):
        if beta > 0:
            X += math.sqrt(beta) * U[:, q][:, None] * vectors[q][None, :]
    truth = Truth(
        betas=params.betas,
        vectors=vectors,
        supports=tuple(spec.support for spec in params.spikes),
    )
    return Dataset(X=X, n=n, seed=int(seed), truth=truth)


def single_spike_params(p, k, beta, theta=1.0, kind="uniform-magnitude"):
    """Rank-one model on the first k coordinates (the sweep harness default)."""
    spec = SpikeSpec(p=p, support=tuple(range(k)), kind=kind, theta=theta)
    return ModelParams(p=p, betas=(beta,), spikes=(spec,))
