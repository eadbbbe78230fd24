"""Numerical foundation: complex log-gamma, Bessel K, quadrature rules,
Gaussian kernel, determinants and reproducible random streams."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite, roots_legendre

from .errors import (
    BadOrder,
    ConfigError,
    NonPositiveArg,
    NonPositiveTime,
    NonSquare,
    PoleArgument,
)

LOG_2PI = float(np.log(2.0 * np.pi))
LOG_PI = float(np.log(np.pi))


@dataclass(frozen=True)
class QuadConfig:
    """Every quadrature, truncation and contour knob, with defaults.

    ``circle_radius`` of ``None`` lets the contour routines pick a radius
    that satisfies their geometric constraints.
    """

    gh_order: int = 64
    gl_order: int = 200
    tail_sigmas: float = 12.0
    circle_points: int = 128
    circle_radius: float | None = None
    sline_halfwidth_sigmas: float = 10.0
    refine_factor: int = 2

    def __post_init__(self):
        if self.gh_order < 4 or self.gh_order % 2:
            raise ConfigError(f"gh_order must be even and >= 4, got {self.gh_order}")
        if self.gl_order < 4:
            raise ConfigError(f"gl_order must be >= 4, got {self.gl_order}")
        if self.circle_points < 4:
            raise ConfigError(f"circle_points must be >= 4, got {self.circle_points}")
        if self.tail_sigmas <= 0 or self.sline_halfwidth_sigmas <= 0:
            raise ConfigError("tail_sigmas and sline_halfwidth_sigmas must be positive")
        if self.circle_radius is not None and self.circle_radius <= 0:
            raise ConfigError("circle_radius must be positive")
        if self.refine_factor < 2:
            raise ConfigError("refine_factor must be >= 2")

    def refined(self) -> "QuadConfig":
        f = self.refine_factor
        return QuadConfig(
            gh_order=self.gh_order * f,
            gl_order=self.gl_order * f,
            tail_sigmas=self.tail_sigmas,
            circle_points=self.circle_points * f,
            circle_radius=self.circle_radius,
            sline_halfwidth_sigmas=self.sline_halfwidth_sigmas,
            refine_factor=f,
        )


# ---------------------------------------------------------------- log gamma

# Lanczos coefficients for g = 607/128 (15 terms).
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = np.array([
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
])


def _lanczos(z: np.ndarray) -> np.ndarray:
    zm = z - 1.0
    acc = np.full(zm.shape, _LANCZOS_C[0], dtype=complex)
    for k in range(1, len(_LANCZOS_C)):
        acc = acc + _LANCZOS_C[k] / (zm + k)
    tt = zm + _LANCZOS_G + 0.5
    return 0.5 * LOG_2PI + (zm + 0.5) * np.log(tt) - tt + np.log(acc)


def log_gamma(z):
    """Log-gamma on the branch that is continuous off the negative real axis.

    Matches the usual ``loggamma`` convention (imaginary part not reduced
    mod 2pi).  Accepts scalars or arrays.
    """
    z_arr = np.asarray(z, dtype=complex)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    nearest = np.round(z_arr.real)
    at_pole = (nearest <= 0) & (np.abs(z_arr - nearest) < 1e-14)
    if np.any(at_pole):
        raise PoleArgument(f"log_gamma evaluated at a pole: {z_arr[at_pole][0]}")
    out = np.empty_like(z_arr)
    right = z_arr.real >= 0.5
    if np.any(right):
        out[right] = _lanczos(z_arr[right])
    left = ~right
    if np.any(left):
        zl = z_arr[left]
        lg = _lanczos(1.0 - zl)
        sgn = np.where(zl.imag < 0, -1.0, 1.0)
        branch = 2j * np.pi * sgn * np.floor(0.5 * zl.real + 0.25)
        out[left] = LOG_PI - np.log(np.sin(np.pi * zl)) - lg + branch
    return out[0] if scalar else out


# ---------------------------------------------------------------- Bessel K

_BESSEL_DROP = 45.0
_BESSEL_NODES = 16


def _bessel_cutoff(nu_abs_re: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Upper limit U where |Re nu| u - z cosh u has dropped 45 below its peak."""
    ustar = np.arcsinh(nu_abs_re / z)
    peak = nu_abs_re * ustar - z * np.cosh(ustar)
    target = peak - _BESSEL_DROP

    def g(u):
        return nu_abs_re * u - z * np.cosh(u) - target

    lo = ustar.copy()
    hi = ustar + 1.0
    for _ in range(200):
        more = g(hi) > 0
        if not np.any(more):
            break
        hi = np.where(more, ustar + 2.0 * (hi - ustar), hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        pos = g(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return hi


def _bessel_panels(nu: np.ndarray, z: np.ndarray, upper: np.ndarray) -> int:
    scale = 1.0 + np.abs(nu.imag) + np.sqrt(z) + 0.25 * np.abs(nu.real)
    return int(np.clip(np.ceil(np.max(upper * scale) / 1.5), 4, 2000))


def _bessel_integral(nu, z, upper, panels, nodes=_BESSEL_NODES):
    s, w = _gl_unit(nodes)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    sn = (mid[:, None] + half[:, None] * s[None, :]).ravel()
    sw = (half[:, None] * w[None, :]).ravel()
    u = upper[:, None] * sn[None, :]
    base = -z[:, None] * np.cosh(u)
    nu_u = nu[:, None] * u
    vals = 0.5 * (np.exp(base + nu_u) + np.exp(base - nu_u))
    return upper * (vals @ sw)


def bessel_k(order, arg, panels: int | None = None):
    """Modified Bessel function K_order(arg) from its cosh integral.

    ``order`` may be complex. Scalars or broadcastable arrays are accepted.
    """
    nu = np.asarray(order, dtype=complex)
    z = np.asarray(arg, dtype=float)
    if np.any(~(z > 0)):
        raise NonPositiveArg("bessel_k needs a positive argument")
    scalar = nu.ndim == 0 and z.ndim == 0
    nu, z = np.broadcast_arrays(nu, z)
    shape = nu.shape
    nu = nu.ravel()
    z = z.ravel()
    upper = _bessel_cutoff(np.abs(nu.real), z)
    out = np.empty(nu.shape, dtype=complex)
    # sort by resolution need so each chunk gets a tight panel count
    need = upper * (1.0 + np.abs(nu.imag) + np.sqrt(z) + 0.25 * np.abs(nu.real))
    order = np.argsort(need, kind="stable")
    step = 4096
    for i0 in range(0, len(order), step):
        idx = order[i0:i0 + step]
        p = panels if panels is not None else _bessel_panels(nu[idx], z[idx], upper[idx])
        out[idx] = _bessel_integral(nu[idx], z[idx], upper[idx], p)
    out = out.reshape(shape)
    return out[()] if scalar else out


# ---------------------------------------------------------------- elementary

def gaussian_density(t, y, x):
    """Heat kernel p(t, y|x) = exp(-(x-y)^2/2t)/sqrt(2 pi t)."""
    if np.any(np.asarray(t) <= 0):
        raise NonPositiveTime("gaussian_density needs t > 0")
    d = np.asarray(x) - np.asarray(y)
    return np.exp(-d * d / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


def vandermonde(points) -> float:
    """prod_{j<l} (x_l - x_j)."""
    p = list(points)
    out = 1.0
    for j in range(len(p)):
        for l in range(j + 1, len(p)):
            out *= p[l] - p[j]
    return out


def complex_det(matrix):
    """Determinant of a square (or stacked square) complex matrix by pivoted LU."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise NonSquare(f"complex_det needs a square matrix, got shape {m.shape}")
    if m.shape[-1] == 0:
        return np.ones(m.shape[:-2], dtype=complex)[()]
    d = np.linalg.det(m)
    d = np.where(np.abs(d) < 1e-300, 0.0, d)
    return d[()] if d.ndim == 0 else d


# ---------------------------------------------------------------- rules

@dataclass(frozen=True)
class Rule:
    nodes: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, values) -> complex | float:
        return np.asarray(values) @ self.weights


@lru_cache(maxsize=64)
def _gh_unit(order: int):
    return roots_hermite(order)


@lru_cache(maxsize=256)
def _gl_unit(order: int):
    return roots_legendre(order)


def gauss_hermite(order: int) -> Rule:
    """Rule for the weight exp(-u^2) on the real line."""
    if order < 2:
        raise BadOrder("gauss_hermite order must be >= 2")
    x, w = _gh_unit(int(order))
    return Rule(x.copy(), w.copy())


def gauss_legendre(order: int, lo: float, hi: float) -> Rule:
    if order < 2:
        raise BadOrder("gauss_legendre order must be >= 2")
    x, w = _gl_unit(int(order))
    half = 0.5 * (hi - lo)
    return Rule(0.5 * (hi + lo) + half * x, half * w)


def composite_gauss_legendre(lo: float, hi: float, panels: int, order: int = 16) -> Rule:
    """Gauss-Legendre on ``panels`` equal subintervals of [lo, hi]."""
    if order < 2 or panels < 1:
        raise BadOrder("need order >= 2 and panels >= 1")
    x, w = _gl_unit(int(order))
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return Rule(nodes, weights)


def circle_rule(center: complex, radius: float, points: int) -> Rule:
    """Trapezoid rule for contour integrals dz around a circle.

    Weights include dz = i r e^{i phi} dphi, so ``rule.integrate(f(nodes))``
    approximates the counter-clockwise integral of f dz.
    """
    if points < 2:
        raise BadOrder("circle_rule needs at least 2 points")
    if radius <= 0:
        raise BadOrder("circle_rule radius must be positive")
    phi = 2.0 * np.pi * (np.arange(points) + 0.5) / points
    e = np.exp(1j * phi)
    nodes = center + radius * e
    weights = 1j * radius * e * (2.0 * np.pi / points)
    return Rule(nodes, weights)


def pairwise_sum(values):
    """Tree summation over the first axis; the result does not depend on
    how the inputs were produced, only on their order."""
    vals = list(values)
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


# ---------------------------------------------------------------- RNG

@dataclass(frozen=True)
class RngStream:
    """Counter-based stream: (seed, stream_id) fixes the whole sequence."""

    seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        key = (int(self.seed) & 0xFFFFFFFFFFFFFFFF) | (
            (int(self.stream_id) & 0xFFFFFFFFFFFFFFFF) << 64
        )
        return np.random.Generator(np.random.Philox(key=key))

    def normals(self, shape) -> np.ndarray:
        return self.generator().standard_normal(shape)
