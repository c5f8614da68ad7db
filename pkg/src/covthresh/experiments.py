"""Monte Carlo harness: single trials, phase-transition sweeps, wavelet demo.

Determinism contract: every trial's seed is derive_seed(base_seed, trial_index),
so results do not depend on execution order or worker count. Trials always run
with BLAS pinned to one thread (both inline and in worker processes), which
makes the per-trial floats bitwise identical whatever --threads is.
"""

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import multiprocessing

import numpy as np
from threadpoolctl import threadpool_limits

from .estimators import (
    CovarianceThresholding,
    DataDrivenThresholding,
    DiagonalThresholding,
    VanillaPCA,
    default_rho,
)
from .exceptions import InvalidConfig
from .metrics import support_metrics, vector_loss
from .model import ModelParams, SpikeSpec, sample_dataset, single_spike_params
from .rng import derive_seed
from .wavelets import block_constant_signal, haar_forward, haar_inverse

METHODS = ("ct", "ct-k0", "dt", "data-driven")

MAX_LOSS = math.sqrt(2.0)  # loss of an orthogonal estimate; sentinel for "no component"


@dataclass(frozen=True)
class SweepConfig:
    method: str
    ps: tuple
    ratios: tuple
    beta: float
    theta: float = 1.0
    tau: float = 4.0
    rho_mode: str = "auto"
    rho: float = None
    trials: int = 100
    base_seed: int = 1
    spike_kind: str = "uniform-magnitude"
    k0_mult: float = 10.0
    nu_prime: float = 4.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidConfig(f"unknown method {self.method!r}")
        if self.trials < 1:
            raise InvalidConfig("trials must be >= 1")
        if not self.ps or not self.ratios:
            raise InvalidConfig("ps and ratios grids must be nonempty")
        if self.rho_mode not in ("auto", "explicit"):
            raise InvalidConfig("rho_mode must be auto or explicit")
        if self.rho_mode == "explicit" and self.rho is None:
            raise InvalidConfig("rho_mode=explicit requires rho")


@dataclass(frozen=True)
class Cell:
    method: str
    p: int
    n: int
    k: int
    ratio: float
    beta: float
    theta: float
    tau: float
    rho: float
    spike_kind: str = "uniform-magnitude"
    k0: int = None
    nu_prime: float = 4.0


@dataclass
class TrialResult:
    seed: int
    method: str
    p: int
    n: int
    k: int
    success: bool
    fraction: float
    loss: float
    wall_ms: float
    failed: bool = False
    error: str = None
    diag: object = None


def grid_k(ratio, n):
    """k = max(1, floor(ratio*sqrt(n) + 0.5)) — half-up, never banker's."""
    return max(1, int(math.floor(ratio * math.sqrt(n) + 0.5)))


def resolve_cells(cfg):
    """Expand a SweepConfig into concrete cells, ordered by (p, ratio)."""
    cells = []
    for p in cfg.ps:
        n = p  # Figure-style sweeps run at n = p
        for ratio in cfg.ratios:
            k = grid_k(ratio, n)
            if k > p:
                raise InvalidConfig(f"cell ratio {ratio} gives k={k} > p={p}")
            rho = cfg.rho if cfg.rho_mode == "explicit" else default_rho(
                [cfg.beta], cfg.theta, [k]
            )
            cells.append(Cell(
                method=cfg.method, p=p, n=n, k=k, ratio=float(ratio),
                beta=cfg.beta, theta=cfg.theta, tau=cfg.tau, rho=float(rho),
                spike_kind=cfg.spike_kind,
                k0=int(round(cfg.k0_mult * k)) if cfg.method == "ct-k0" else None,
                nu_prime=cfg.nu_prime,
            ))
    return cells


def _estimate_support(cell, data):
    """Run the cell's method; return (support set, leading component or None)."""
    if cell.method == "ct":
        est = CovarianceThresholding(
            tau=cell.tau, rho=cell.rho, support_sizes=[cell.k], theta=cell.theta,
        ).fit(data.X)
        return set(est.support_.tolist()), est.components_[0]
    if cell.method == "ct-k0":
        est = CovarianceThresholding(
            tau=cell.tau, rho=cell.rho, k0=cell.k0, n_components=1, theta=cell.theta,
        ).fit(data.X)
        return set(est.support_.tolist()), est.components_[0]
    if cell.method == "dt":
        est = DiagonalThresholding(k=cell.k).fit(data.X)
        return set(est.support_.tolist()), est.components_[0]
    if cell.method == "data-driven":
        est = DataDrivenThresholding(nu_prime=cell.nu_prime).fit(data.X)
        component = est.components_[0] if est.n_components_ else None
        return set(est.support_.tolist()), component
    raise InvalidConfig(f"unknown method {cell.method!r}")


def run_trial(cell, trial_index, base_seed):
    """One seeded trial of one cell; estimator errors become failed records."""
    seed = derive_seed(base_seed, trial_index)
    t0 = time.perf_counter()
    params = single_spike_params(
        cell.p, cell.k, cell.beta, theta=cell.theta, kind=cell.spike_kind
    )
    data = sample_dataset(params, cell.n, seed)
    truth_support = set(data.truth.support_union)
    try:
        support, component = _estimate_support(cell, data)
    except Exception as exc:  # noqa: BLE001 - failed trials are recorded, not raised
        return TrialResult(
            seed=seed, method=cell.method, p=cell.p, n=cell.n, k=cell.k,
            success=False, fraction=0.0, loss=float("nan"),
            wall_ms=(time.perf_counter() - t0) * 1e3,
            failed=True, error=f"{type(exc).__name__}: {exc}",
        )
    sm = support_metrics(support, truth_support, cell.p)
    if component is None:
        loss = MAX_LOSS
    else:
        loss = vector_loss(component, data.truth.vectors[0])
    return TrialResult(
        seed=seed, method=cell.method, p=cell.p, n=cell.n, k=cell.k,
        success=sm.exact, fraction=sm.fraction, loss=loss,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )


@dataclass(frozen=True)
class CellSummary:
    method: str
    p: int
    n: int
    k: int
    ratio: float
    beta: float
    tau: float
    rho: float
    trials: int
    success_rate: float
    success_se: float
    mean_fraction: float
    mean_loss: float
    failed_trials: int


def summarize_cell(cell, results):
    trials = len(results)
    successes = sum(1 for r in results if r.success)
    rate = successes / trials
    losses = [r.loss for r in results if not r.failed]
    return CellSummary(
        method=cell.method, p=cell.p, n=cell.n, k=cell.k, ratio=cell.ratio,
        beta=cell.beta, tau=cell.tau, rho=cell.rho, trials=trials,
        success_rate=rate,
        success_se=math.sqrt(rate * (1.0 - rate) / trials),
        mean_fraction=sum(r.fraction for r in results) / trials,
        mean_loss=sum(losses) / len(losses) if losses else float("nan"),
        failed_trials=sum(1 for r in results if r.failed),
    )


_WORKER_LIMITER = None


def _limit_worker_blas():
    global _WORKER_LIMITER
    _WORKER_LIMITER = threadpool_limits(limits=1, user_api="blas")


def _pool_task(args):
    cell, trial_index, base_seed = args
    return run_trial(cell, trial_index, base_seed)


def run_cells(cells, trials, base_seed, threads=1, progress=None):
    """Run `trials` trials for every cell; returns {cell_index: [TrialResult]}.

    Results are keyed and ordered by (cell index, trial index), never by
    completion order.
    """
    tasks = [
        (ci, ti) for ci in range(len(cells)) for ti in range(trials)
    ]
    out = {ci: [None] * trials for ci in range(len(cells))}
    done = 0
    if threads <= 1:
        with threadpool_limits(limits=1, user_api="blas"):
            for ci, ti in tasks:
                out[ci][ti] = run_trial(cells[ci], ti, base_seed)
                done += 1
                if progress:
                    progress(done, len(tasks))
    else:
        os.environ["OPENBLAS_NUM_THREADS"] = "1"
        os.environ["MKL_NUM_THREADS"] = "1"
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(
            max_workers=threads, mp_context=ctx, initializer=_limit_worker_blas
        ) as pool:
            args = [(cells[ci], ti, base_seed) for ci, ti in tasks]
            for (ci, ti), result in zip(tasks, pool.map(_pool_task, args, chunksize=1)):
                out[ci][ti] = result
                done += 1
                if progress:
                    progress(done, len(tasks))
    return out


def sweep_phase_transition(cfg, threads=1, progress=None):
    """Run the full (p, ratio) grid; one CellSummary per cell, in grid order."""
    cells = resolve_cells(cfg)
    results = run_cells(cells, cfg.trials, cfg.base_seed, threads=threads,
                        progress=progress)
    return [summarize_cell(cell, results[ci]) for ci, cell in enumerate(cells)]


SWEEP_CSV_HEADER = (
    "method,p,n,k,ratio,beta,tau,rho,trials,success_rate,success_se,"
    "mean_fraction,mean_loss,failed_trials"
)


def _g6(x):
    return f"{x:.6g}"


def sweep_rows_to_csv(rows):
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.method},{r.p},{r.n},{r.k},{_g6(r.ratio)},{_g6(r.beta)},"
            f"{_g6(r.tau)},{_g6(r.rho)},{r.trials},{_g6(r.success_rate)},"
            f"{_g6(r.success_se)},{_g6(r.mean_fraction)},{_g6(r.mean_loss)},"
            f"{r.failed_trials}"
        )
    return "\n".join(lines) + "\n"


def write_sweep_csv(rows, path):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(sweep_rows_to_csv(rows))


# --- wavelet reconstruction demo ---

DEMO_METHODS = ("pca", "dt", "data-driven")


@dataclass
class ReconRecord:
    method: str
    n: int
    seed: int
    reconstruction: np.ndarray  # signal-domain estimate, unit norm
    correlation: float          # |cos| against the normalized clean signal


def wavelet_demo(p, n, beta, nu_prime, seed, dt_k=None):
    """One seeded reconstruction comparison on a block-constant signal.

    The clean signal is normalized and transformed to the Haar domain, where
    it is sparse; spiked data with 2n rows is generated there; each method's
    leading component is transformed back to the signal domain. `n` is the
    Dataset half-size, i.e. every method sees 2n observations.
    """
    signal = block_constant_signal(p)
    signal_unit = signal / np.linalg.norm(signal)
    spike = haar_forward(signal_unit)
    support = tuple(int(i) for i in np.flatnonzero(spike != 0.0))
    theta = float(np.min(np.abs(spike[list(support)])) * math.sqrt(len(support)))
    spec = SpikeSpec(p=p, support=support, kind="explicit",
                     theta=min(1.0, theta), values=tuple(spike[list(support)]))
    params = ModelParams(p=p, betas=(float(beta),), spikes=(spec,))
    data = sample_dataset(params, n, seed)

    k = dt_k if dt_k is not None else len(support)
    records = []
    for method in DEMO_METHODS:
        if method == "pca":
            est = VanillaPCA(n_components=1).fit(data.X)
            component = est.components_[0]
        elif method == "dt":
            est = DiagonalThresholding(k=k).fit(data.X)
            component = est.components_[0]
        else:
            est = DataDrivenThresholding(nu_prime=nu_prime).fit(data.X)
            component = est.components_[0] if est.n_components_ else np.zeros(p)
        recon = haar_inverse(component)
        nrm = np.linalg.norm(recon)
        corr = abs(float(recon @ signal_unit) / nrm) if nrm > 0 else 0.0
        records.append(ReconRecord(
            method=method, n=n, seed=seed, reconstruction=recon, correlation=corr,
        ))
    return records


def _demo_task(args):
    p, n, beta, nu_prime, seed, dt_k = args
    return wavelet_demo(p, n, beta, nu_prime, seed, dt_k=dt_k)


def wavelet_demo_batch(p, n, beta, nu_prime, base_seed, trials, threads=1, dt_k=None):
    """`trials` seeded demo runs; list of per-seed record lists, seed order."""
    seeds = [derive_seed(base_seed, t) for t in range(trials)]
    args = [(p, n, beta, nu_prime, s, dt_k) for s in seeds]
    if threads <= 1:
        with threadpool_limits(limits=1, user_api="blas"):
            return [_demo_task(a) for a in args]
    os.environ["OPENBLAS_NUM_THREADS"] = "1"
    os.environ["MKL_NUM_THREADS"] = "1"
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=threads, mp_context=ctx,
                             initializer=_limit_worker_blas) as pool:
        return list(pool.map(_demo_task, args, chunksize=1))
