"""Monte Carlo over complex Brownian endpoints with a determinantal weight.

Each sample draws Z_k = V_k + i W_k at time 1/t with V_k ~ N(nu_hat_k, 1/t),
W_k ~ N(0, 1/t), and scores det[delta_jk - Phi_j(Z_k) 1(V_k < h t)].
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TooFewSamples
from .kernel import POLE_TOL, DriftSpec, ObservablePoint, _log_phi
from .numkit import RngStream, complex_det, pairwise_sum


@dataclass(frozen=True)
class CbmSample:
    """Endpoints; V and W have shape (N,) for one sample or (n, N) for a batch."""

    V: np.ndarray
    W: np.ndarray

    @property
    def Z(self) -> np.ndarray:
        return self.V + 1j * self.W


@dataclass(frozen=True)
class MCConfig:
    sample_count: int
    batch_size: int = 4096
    seed: int = 0
    estimator: str = "mean"
    groups: int = 32
    workers: int = 1

    def __post_init__(self):
        if self.sample_count < 100:
            raise TooFewSamples(f"need at least 100 samples, got {self.sample_count}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.estimator not in ("mean", "median_of_means"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if not 1 <= self.groups <= self.sample_count:
            raise ConfigError("groups must be between 1 and sample_count")


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    imag_residual: float
    imag_std_error: float
    n: int
    rejected: int = 0
    mean: float = float("nan")
    median_of_means: float = float("nan")


def sample_endpoints(drift: DriftSpec, t: float, rng: RngStream, size: int | None = None) -> CbmSample:
    """Draw endpoints from one stream; ``size=None`` gives a single sample."""
    if not t > 0:
        raise ConfigError("t must be positive")
    n = 1 if size is None else int(size)
    g = rng.normals((n, 2 * drift.N))
    scale = 1.0 / np.sqrt(t)
    V = np.array(drift.nu_hat)[None, :] + scale * g[:, :drift.N]
    W = scale * g[:, drift.N:]
    if size is None:
        return CbmSample(V[0], W[0])
    return CbmSample(V, W)


def _near_pole(drift: DriftSpec, Z: np.ndarray) -> np.ndarray:
    """Mask over samples with some Z_k within POLE_TOL of a pole of some Phi_j."""
    bad = np.zeros(Z.shape[0], dtype=bool)
    a = drift.a
    for j, nj in enumerate(drift.nu_hat):
        n = np.maximum(np.round((nj - Z.real) * a), 1.0)
        bad |= np.any(np.abs(Z - (nj - n / a)) < POLE_TOL, axis=1)
    return bad


def weights_batch(drift: DriftSpec, obs: ObservablePoint, sample: CbmSample):
    """Weights for a batch plus a mask of rejected (near-pole) samples."""
    V = np.atleast_2d(sample.V)
    Z = V + 1j * np.atleast_2d(sample.W)
    active = V < obs.h * obs.t
    rejected = _near_pole(drift, Z) & np.any(active, axis=1)
    n, N = Z.shape
    M = np.broadcast_to(np.eye(N, dtype=complex), (n, N, N)).copy()
    for j in range(N):
        logs, zero = _log_phi(drift, j, Z)
        phi = np.where(zero | ~active, 0.0, np.exp(np.where(active, logs, 0.0)))
        M[:, j, :] -= phi
    w = complex_det(M)
    w = np.atleast_1d(w)
    w[rejected] = 0.0
    return w, rejected


def determinantal_weight(sample: CbmSample, drift: DriftSpec, obs: ObservablePoint) -> complex:
    """det[delta_jk - Phi_j(Z_k) 1(V_k < h t)] for a single sample."""
    from .errors import NearPole

    w, rejected = weights_batch(drift, obs, CbmSample(np.atleast_2d(sample.V), np.atleast_2d(sample.W)))
    if rejected[0]:
        raise NearPole("sample endpoint within 1e-8 of a pole")
    return complex(w[0])


@dataclass(frozen=True)
class _Summary:
    count: int
    mean_re: float
    m2_re: float
    mean_im: float
    m2_im: float
    rejected: int
    group_sums: np.ndarray
    group_counts: np.ndarray

    def merge(self, other: "_Summary") -> "_Summary":
        n = self.count + other.count
        if n == 0:
            return _Summary(0, 0.0, 0.0, 0.0, 0.0, self.rejected + other.rejected,
                            self.group_sums + other.group_sums,
                            self.group_counts + other.group_counts)
        d_re = other.mean_re - self.mean_re
        d_im = other.mean_im - self.mean_im
        f = other.count / n
        return _Summary(
            n,
            self.mean_re + d_re * f,
            self.m2_re + other.m2_re + d_re * d_re * self.count * f,
            self.mean_im + d_im * f,
            self.m2_im + other.m2_im + d_im * d_im * self.count * f,
            self.rejected + other.rejected,
            self.group_sums + other.group_sums,
            self.group_counts + other.group_counts,
        )

    def __add__(self, other):
        return self.merge(other)


def _run_batch(drift, obs, mc: MCConfig, b: int) -> _Summary:
    start = b * mc.batch_size
    size = min(mc.batch_size, mc.sample_count - start)
    sample = sample_endpoints(drift, obs.t, RngStream(mc.seed, b), size)
    w, rejected = weights_batch(drift, obs, sample)
    keep = ~rejected
    wk = w[keep]
    idx = np.arange(start, start + size)[keep]
    group = (idx * mc.groups) // mc.sample_count
    gs = np.bincount(group, weights=wk.real, minlength=mc.groups)
    gc = np.bincount(group, minlength=mc.groups).astype(float)
    cnt = int(keep.sum())
    if cnt == 0:
        return _Summary(0, 0.0, 0.0, 0.0, 0.0, int(rejected.sum()), gs, gc)
    mr, mi = float(np.mean(wk.real)), float(np.mean(wk.imag))
    return _Summary(
        cnt,
        mr,
        float(np.sum((wk.real - mr) ** 2)),
        mi,
        float(np.sum((wk.imag - mi) ** 2)),
        int(rejected.sum()),
        gs,
        gc,
    )


def cbm_estimate(drift: DriftSpec, obs: ObservablePoint, mc: MCConfig) -> Estimate:
    """Sample mean (or median of group means) of the determinantal weight.

    Batch b always uses stream (seed, b), and batch summaries are merged in a
    fixed binary tree, so the result does not depend on ``mc.workers``.
    """
    n_batches = -(-mc.sample_count // mc.batch_size)
    batches = range(n_batches)
    if mc.workers > 1:
        with ThreadPoolExecutor(max_workers=mc.workers) as ex:
            summaries = list(ex.map(lambda b: _run_batch(drift, obs, mc, b), batches))
    else:
        summaries = [_run_batch(drift, obs, mc, b) for b in batches]
    tot = pairwise_sum(summaries)
    n = max(tot.count, 1)
    var_re = tot.m2_re / max(n - 1, 1)
    var_im = tot.m2_im / max(n - 1, 1)
    with np.errstate(invalid="ignore"):
        gmeans = tot.group_sums / tot.group_counts
    mom = float(np.median(gmeans[tot.group_counts > 0]))
    value = tot.mean_re if mc.estimator == "mean" else mom
    return Estimate(
        value=float(value),
        std_error=float(np.sqrt(var_re / n)),
        imag_residual=float(tot.mean_im),
        imag_std_error=float(np.sqrt(var_im / n)),
        n=mc.sample_count,
        rejected=tot.rejected,
        mean=float(tot.mean_re),
        median_of_means=mom,
    )
