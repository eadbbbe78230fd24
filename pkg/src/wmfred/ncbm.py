"""Noncolliding Brownian motion: Karlin-McGregor densities, drifted and
driftless transition densities, the lowest-particle tail probability and
the GUE eigenvalue density."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, gamma

import numpy as np
from scipy.special import log_ndtr

from .errors import ConfigError, DegenerateStart, NonConvergent, UnsupportedN
from .numkit import QuadConfig, composite_gauss_legendre, gaussian_density


@dataclass(frozen=True)
class WeylPoint:
    coords: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in self.coords)
        object.__setattr__(self, "coords", c)
        if any(c[i + 1] - c[i] < 1e-12 for i in range(len(c) - 1)):
            raise ConfigError(f"coordinates must be strictly increasing with gaps >= 1e-12: {c}")

    @property
    def N(self) -> int:
        return len(self.coords)

    def array(self) -> np.ndarray:
        return np.array(self.coords)


def _coords(p) -> np.ndarray:
    return p.array() if isinstance(p, WeylPoint) else np.asarray(p, dtype=float)


def _vander(y: np.ndarray) -> np.ndarray:
    """prod_{j<l}(y_l - y_j) over the last axis."""
    out = np.ones(y.shape[:-1])
    n = y.shape[-1]
    for j in range(n):
        for l in range(j + 1, n):
            out = out * (y[..., l] - y[..., j])
    return out


def _check_n(n: int):
    if n > 3:
        raise UnsupportedN(f"noncolliding oracles implemented for N <= 3, got {n}")


def km_density(t: float, y, x) -> np.ndarray:
    """det[p(t, y_j | x_k)]; ``y`` may carry leading batch axes."""
    y, x = _coords(y), _coords(x)
    _check_n(x.shape[-1])
    P = gaussian_density(t, y[..., :, None], x[..., None, :])
    with np.errstate(divide="ignore", under="ignore"):
        return np.linalg.det(P)


def ncbm_density(t: float, y, x):
    """(h(y)/h(x)) det[p(t, y_j|x_k)]."""
    y, x = _coords(y), _coords(x)
    hx = _vander(x)
    if np.any(hx == 0):
        raise DegenerateStart("start has coinciding coordinates; use gue_density")
    return _vander(y) / hx * km_density(t, y, x)


def ncbm_drift_density(t: float, y, x, nu):
    """e^{-t|nu|^2/2} det[e^{nu_j y_k}] / det[e^{nu_j x_k}] det[p(t, y_j|x_k)]."""
    y, x, nu = _coords(y), _coords(x), np.asarray(nu, dtype=float)
    if np.any(np.diff(nu) < 0):
        raise ConfigError("nu must be nondecreasing")
    den = np.linalg.det(np.exp(np.multiply.outer(nu, x)))
    if np.any(den == 0):
        raise DegenerateStart("det[e^{nu_j x_k}] vanishes at this start")
    num = np.linalg.det(np.exp(nu[:, None] * y[..., None, :]))
    return np.exp(-t * np.dot(nu, nu) / 2.0) * num / den * km_density(t, y, x)


def ncbm_drift_density_origin(t: float, y, nu):
    """Density at time t of the drifted process started from the origin:
    (h(y/t)/h(nu)) det[p(1/t, y_j/t | nu_k)] t^{-N}."""
    y, nu = _coords(y), np.asarray(nu, dtype=float)
    hn = _vander(nu)
    if hn == 0:
        raise DegenerateStart("drifts must be distinct")
    n = len(nu)
    return _vander(y / t) / hn * km_density(1.0 / t, y / t, nu) * t ** (-n)


def gue_density(t: float, x):
    """t^{-N^2/2}(2pi)^{-N/2}(prod Gamma(j))^{-1} e^{-|x|^2/2t} h(x)^2."""
    x = _coords(x)
    n = x.shape[-1]
    _check_n(n)
    norm = t ** (-n * n / 2.0) * (2.0 * np.pi) ** (-n / 2.0) / np.prod([gamma(j) for j in range(1, n + 1)])
    return norm * np.exp(-np.sum(x * x, axis=-1) / (2.0 * t)) * _vander(x) ** 2


# ---------------------------------------------------------------- gap probability

def _box_rule(lo: float, hi: float, sigma: float, refine: int):
    panels = max(2, int(np.ceil((hi - lo) / sigma)))
    return composite_gauss_legendre(lo, hi, panels, 8 * refine)


def _symmetric_box_integral(density, n: int, lo: float, hi: float, sigma: float, refine: int) -> float:
    """(1/n!) * integral over [lo, hi]^n of a symmetric function.

    The densities here are antisymmetric Karlin-McGregor determinants times
    antisymmetric Vandermonde factors, so the product is symmetric and the
    ordered-region integral is 1/n! of the box integral.
    """
    r = _box_rule(lo, hi, sigma, refine)
    return _box_sum(density, n, r, ordered=False) / factorial(n)


def _box_sum(density, n: int, r, ordered: bool) -> float:
    """Tensor-rule sum over [lo, hi]^n, evaluated in slabs along the first
    axis to keep memory bounded for N=3 at fine resolution."""
    nodes, w = r.nodes, r.weights
    rest = np.stack(np.meshgrid(*([nodes] * (n - 1)), indexing="ij"), axis=-1) if n > 1 else None
    W_rest = np.ones(())
    for _ in range(n - 1):
        W_rest = np.multiply.outer(W_rest, w)
    chunk = max(1, 400_000 // max(1, W_rest.size))
    total = 0.0
    for i0 in range(0, len(nodes), chunk):
        head = nodes[i0:i0 + chunk]
        if n == 1:
            pts = head[:, None]
        else:
            pts = np.concatenate([np.broadcast_to(head.reshape((-1,) + (1,) * n), (len(head),) + rest.shape[:-1] + (1,)),
                                  np.broadcast_to(rest, (len(head),) + rest.shape)], axis=-1)
        vals = density(pts)
        if ordered:
            vals = np.where(np.all(np.diff(pts, axis=-1) > 0, axis=-1), vals, 0.0)
        total += float(np.sum(vals * (w[i0:i0 + chunk].reshape((-1,) + (1,) * (n - 1)) * W_rest)))
    return total


def gap_probability(start, t: float, h: float, quad: QuadConfig | None = None) -> float:
    """P[X_1(1/t) > h t] for driftless noncolliding BM from ``start`` (distinct)."""
    quad = quad or QuadConfig()
    x = _coords(start)
    n = len(x)
    _check_n(n)
    s = 1.0 / t
    sigma = np.sqrt(s)
    lo = h * t
    hi = max(np.max(x), lo) + quad.tail_sigmas * sigma
    if lo < np.min(x) - quad.tail_sigmas * sigma:
        lo = np.min(x) - quad.tail_sigmas * sigma
        if n == 1:
            return 1.0
    if lo >= hi:
        return 0.0
    f = lambda y: ncbm_density(s, y, x)
    v1 = _symmetric_box_integral(f, n, lo, hi, sigma, 1)
    v2 = _symmetric_box_integral(f, n, lo, hi, sigma, quad.refine_factor)
    if abs(v2 - v1) > 1e-9:
        raise NonConvergent(f"gap probability refinement gap {abs(v2 - v1):.2e}")
    return float(min(max(v2, 0.0), 1.0)) if abs(v2 - np.clip(v2, 0, 1)) < 1e-8 else v2


def gap_probability_drifted(nu, t: float, h: float, quad: QuadConfig | None = None) -> float:
    """P[X_1(t) > h] for the drifted noncolliding BM started at the origin."""
    quad = quad or QuadConfig()
    nu = np.asarray(nu, dtype=float)
    n = len(nu)
    _check_n(n)
    sigma = np.sqrt(t)
    lo = max(h, t * np.min(nu) - quad.tail_sigmas * sigma)
    hi = max(t * np.max(nu), lo) + quad.tail_sigmas * sigma
    if lo >= hi:
        return 0.0
    f = lambda y: ncbm_drift_density_origin(t, y, nu)
    v1 = _symmetric_box_integral(f, n, lo, hi, sigma, 1)
    v2 = _symmetric_box_integral(f, n, lo, hi, sigma, quad.refine_factor)
    if abs(v2 - v1) > 1e-9:
        raise NonConvergent(f"gap probability refinement gap {abs(v2 - v1):.2e}")
    return float(v2)


def gap_probability_det(start, t: float, h: float) -> float:
    """Same probability as an n x n determinant of one-dimensional integrals.

    Pairing the Vandermonde rows with the Karlin-McGregor columns reduces the
    n-fold integral to det[int_{ht}^inf y^(j-1) p(1/t, y|x_k) dy] / h(x); the
    entries are truncated Gaussian moments in closed form.
    """
    x = _coords(start)
    n = len(x)
    s = 1.0 / t
    sd = np.sqrt(s)
    M = np.empty((n, n))
    for k in range(n):
        c = (h * t - x[k]) / sd
        # E[Y^m 1(Y > ht)] for Y ~ N(x_k, s) via the standard-normal tail moments
        tail = [np.exp(log_ndtr(-c))]
        pdf = np.exp(-c * c / 2.0) / np.sqrt(2.0 * np.pi)
        tail.append(pdf)
        for m in range(2, n):
            tail.append(c ** (m - 1) * pdf + (m - 1) * tail[m - 2])
        for j in range(n):
            acc = 0.0
            for m in range(j + 1):
                binom = factorial(j) / (factorial(m) * factorial(j - m))
                acc += binom * x[k] ** (j - m) * sd ** m * tail[m]
            M[j, k] = acc
    return float(np.linalg.det(M) / _vander(x))


def _ordered_mass(density, n, lo, hi, sigma, refine):
    """Integral of a density over the ordered region, via the box and an
    explicit order indicator; used only for normalisation checks."""
    return _box_sum(density, n, _box_rule(lo, hi, sigma, refine), ordered=True)


def ordered_mass(density, n: int, lo: float, hi: float, sigma: float, refine: int = 1,
                 symmetric: bool = True) -> float:
    """Mass of ``density`` over the Weyl chamber intersected with [lo, hi]^n."""
    if symmetric:
        return _symmetric_box_integral(density, n, lo, hi, sigma, refine)
    return _ordered_mass(density, n, lo, hi, sigma, refine)
