"""Oracles at positive a: the Whittaker-measure density for N <= 2, the
expectation of the soft indicator by direct quadrature, and contour/residue
formulas for the exponential moments E[exp(-kappa X_1(t)/a)]."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from math import factorial

import numpy as np
from scipy.special import gammaln, hyp1f1

from .errors import ConfigError, DegenerateDrift, NearPole, NonConvergent, SingularShift, UnsupportedN
from .kernel import DriftSpec, ObservablePoint, theta_soft
from .numkit import QuadConfig, bessel_k, circle_rule, composite_gauss_legendre, gauss_hermite


# ------------------------------------------------------------------ partitions

@dataclass(frozen=True)
class Partition:
    parts: tuple[int, ...]

    def __post_init__(self):
        p = tuple(int(v) for v in self.parts)
        if any(v <= 0 for v in p) or any(p[i] < p[i + 1] for i in range(len(p) - 1)):
            raise ConfigError(f"parts must be positive and nonincreasing: {p}")
        object.__setattr__(self, "parts", p)

    @property
    def size(self) -> int:
        return sum(self.parts)

    @property
    def length(self) -> int:
        return len(self.parts)

    @property
    def multiplicities(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for v in self.parts:
            out[v] = out.get(v, 0) + 1
        return out

    @classmethod
    def all_of(cls, n: int) -> list["Partition"]:
        """All partitions of n, largest first part first."""
        out = []

        def rec(rest, cap, acc):
            if rest == 0:
                out.append(cls(tuple(acc)))
                return
            for p in range(min(rest, cap), 0, -1):
                rec(rest - p, p, acc + [p])

        rec(n, n, [])
        return out


# ------------------------------------------------------- Whittaker measure

def _check_n2(drift: DriftSpec):
    if drift.N > 2:
        raise UnsupportedN("the measure-level oracles are implemented for N <= 2")


def _theta_n1(t: float, x: np.ndarray, quad: QuadConfig) -> np.ndarray:
    """int e^{-t k^2/2} e^{-i k x} dk / 2pi by Gauss-Hermite in k."""
    # in u = k sqrt(t/2) the integrand oscillates at |x| sqrt(2/t); a rule of
    # order n resolves frequencies up to about sqrt(2n)
    omega = float(np.max(np.abs(x))) * np.sqrt(2.0 / t)
    rule = gauss_hermite(max(quad.gh_order, int(0.6 * omega * omega) + 48))
    k = np.sqrt(2.0 / t) * rule.nodes
    vals = np.exp(-1j * np.multiply.outer(np.atleast_1d(x), k)) @ rule.weights
    vals = vals * np.sqrt(2.0 / t) / (2.0 * np.pi)
    if np.max(np.abs(vals.imag)) > 1e-10 * max(1.0, np.max(np.abs(vals.real))):
        raise NonConvergent("theta has a non-negligible imaginary part")
    return vals.real


def _delta_rule(a: float, t: float, D: float, quad: QuadConfig, refine: int):
    """Half-line rule in delta for the difference-variable Fourier integral."""
    top = 2.0 * quad.tail_sigmas / np.sqrt(t) + np.pi * a / t
    # K_{i a delta}(2 e^{-D/2a}) oscillates like cos(delta (D/2) + ...)
    freq = 0.5 * abs(D) + a * (1.0 + np.log1p(abs(D) / a)) + 1.0
    width = min(1.0, 1.5 / freq, 0.5 * np.sqrt(t))
    return composite_gauss_legendre(0.0, top, int(np.ceil(top / width)), 8 * refine)


def _theta_difference_bessel(a: float, t: float, D, quad: QuadConfig, refine: int = 1) -> np.ndarray:
    """I(D) = int_R e^{-t d^2/4} K_{i a d}(2 e^{-D/2a}) a d sinh(pi a d) dd,
    evaluated directly with imaginary-order Bessel values (slow)."""
    D = np.atleast_1d(np.asarray(D, dtype=float))
    out = np.empty(D.shape)
    for i, d0 in enumerate(D):
        r = _delta_rule(a, t, d0, quad, refine)
        d = r.nodes
        z = 2.0 * np.exp(-d0 / (2.0 * a))
        k = bessel_k(1j * a * d, np.full(d.shape, z)).real
        out[i] = 2.0 * np.sum(r.weights * np.exp(-t * d * d / 4.0) * k * a * d * np.sinh(np.pi * a * d))
    return out


def _exp_remainder(order: int, x: np.ndarray) -> np.ndarray:
    """e^{-x} - sum_{n<order} (-x)^n/n! for x >= 0, without cancellation.

    Moderate x use (-x)^order/order! e^{-x} 1F1(order; order+1; x), whose
    series has positive terms; very large x use the polynomial directly,
    where e^{-x} is negligible and the top-degree term dominates.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    big = x > 500.0
    xs = x[~big]
    with np.errstate(divide="ignore"):
        logs = order * np.log(xs) - gammaln(order + 1) - xs
    out[~big] = (-1.0) ** order * np.exp(logs) * hyp1f1(order, order + 1, xs)
    xb = x[big]
    poly = np.zeros(xb.shape)
    term = np.ones(xb.shape)
    for n in range(order):
        poly += term
        term = term * (-xb) / (n + 1)
    out[big] = -poly
    return out


def _theta_difference(a: float, t: float, D, quad: QuadConfig, refine: int = 1) -> np.ndarray:
    """Same I(D) with the Bessel integral K_{i mu}(z) = int_0^inf e^{-z cosh u}
    cos(mu u) du swapped outside; the delta integral is then Gaussian:

        I(D) = int_0^inf e^{-z cosh u} J(u) du,
        J(u) = (2a^2/t) sqrt(4pi/t) e^{a^2(pi^2 - u^2)/t}
               * (pi cos(2 pi a^2 u/t) - u sin(2 pi a^2 u/t)).

    Every power cosh(u)^n integrates to zero against J, so e^{-z cosh u} may
    be replaced by its Taylor remainder of any order.  Order ~ aD/t puts the
    integrand on the same scale as I(D) itself, which is Gaussian-small for
    large D and would otherwise be lost to cancellation.
    """
    D = np.atleast_1d(np.asarray(D, dtype=float))
    z = 2.0 * np.exp(-D / (2.0 * a))
    c = a * a / t
    orders = np.maximum(1, np.round(a * D / t)).astype(int)
    u_cut = float(np.max(np.maximum(D, 0.0))) / (2.0 * a)
    top = max(np.sqrt((45.0 + c * np.pi ** 2) / c), u_cut + 10.0 / np.sqrt(c))
    width = 0.2 * min(1.0, 1.0 / np.sqrt(c), 1.0 / (2.0 * np.pi * c))
    r = composite_gauss_legendre(0.0, top, int(np.ceil(top / width)), 8 * refine)
    u = r.nodes
    wJ = r.weights * (2.0 * c * np.sqrt(4.0 * np.pi / t) * np.exp(c * (np.pi ** 2 - u * u))
                      * (np.pi * np.cos(2.0 * np.pi * c * u) - u * np.sin(2.0 * np.pi * c * u)))
    cu = np.cosh(u)
    out = np.empty(D.shape)
    for m in np.unique(orders):
        rows = orders == m
        out[rows] = _exp_remainder(int(m), np.multiply.outer(z[rows], cu)) @ wJ
    return out


def _theta_n2(a: float, t: float, S, D, quad: QuadConfig, refine: int = 1):
    """The k-integral for N=2 in centre/difference variables.

    The centre frequency integrates to a Gaussian in S = x1 + x2; the
    difference frequency is left as a one-dimensional integral in D = x2 - x1.
    """
    S = np.asarray(S, dtype=float)
    I = _theta_difference(a, t, D, quad, refine)
    return 0.5 * np.sqrt(4.0 * np.pi / t) * np.exp(-S * S / (4.0 * t)) / (4.0 * np.pi ** 3) * I


def theta_entrance(drift: DriftSpec, t: float, x, quad: QuadConfig | None = None) -> float:
    """int e^{-t|k|^2/2} psi_{-iak}(x/a) s_N(ak) dk."""
    quad = quad or QuadConfig()
    _check_n2(drift)
    x = np.asarray(x, dtype=float)
    if drift.N == 1:
        return float(_theta_n1(t, x[0], quad)[0])
    S, D = x[0] + x[1], x[1] - x[0]
    v1 = float(_theta_n2(drift.a, t, S, D, quad, 1)[0])
    v2 = float(_theta_n2(drift.a, t, S, D, quad, quad.refine_factor)[0])
    if abs(v2 - v1) > 1e-8 * max(abs(v2), 1e-300) and abs(v2 - v1) > 1e-14:
        raise NonConvergent(f"theta refinement gap {abs(v2 - v1):.2e}")
    return v2


def _centre_factor(drift: DriftSpec, t: float, S):
    """S-dependent part of the N=2 density, including all constants."""
    nh = np.array(drift.nu_hat)
    S = np.asarray(S, dtype=float)
    return (np.exp(-t * np.dot(nh, nh) / 2.0 + 0.5 * nh.sum() * S - S * S / (4.0 * t))
            * 0.5 * np.sqrt(4.0 * np.pi / t) / (4.0 * np.pi ** 3))


def _difference_factor(drift: DriftSpec, t: float, D, quad: QuadConfig, refine: int = 1):
    """D-dependent part: 2 K_{a dnu}(2 e^{-D/2a}) I(D)."""
    a = drift.a
    D = np.atleast_1d(np.asarray(D, dtype=float))
    dn = drift.nu_hat[1] - drift.nu_hat[0]
    k = bessel_k(np.full(D.shape, a * dn + 0j), 2.0 * np.exp(-D / (2.0 * a))).real
    return 2.0 * k * _theta_difference(a, t, D, quad, refine)


def wm_density(drift: DriftSpec, t: float, x, quad: QuadConfig | None = None) -> float:
    """e^{-t|nu|^2/2a^2} psi_nu(x/a) theta(t, x), nu = a nu_hat."""
    quad = quad or QuadConfig()
    _check_n2(drift)
    x = np.asarray(x, dtype=float)
    if drift.N == 1:
        nh = drift.nu_hat[0]
        return float(np.exp(-t * nh * nh / 2.0 + nh * x[0]) * theta_entrance(drift, t, x, quad))
    S, D = x[0] + x[1], x[1] - x[0]
    return float(_centre_factor(drift, t, S) * _difference_factor(drift, t, D, quad)[0])


@dataclass(frozen=True)
class DensityGrid:
    """Separable N=2 density on a tensor grid in (S, D); dx = dS dD / 2."""

    S: np.ndarray
    wS: np.ndarray
    fS: np.ndarray
    D: np.ndarray
    wD: np.ndarray
    gD: np.ndarray

    def integrate(self, func=None) -> float:
        """Integral of func(x1, x2) * density; func=None gives the mass."""
        if func is None:
            return float(0.5 * (self.wS @ self.fS) * (self.wD @ self.gD))
        S, D = np.meshgrid(self.S, self.D, indexing="ij")
        vals = func((S - D) / 2.0, (S + D) / 2.0)
        return float(0.5 * np.einsum("i,j,i,j,ij->", self.wS, self.wD, self.fS, self.gD, vals))


def _windows(drift: DriftSpec, t: float, quad: QuadConfig, tilt: float = 0.0):
    """S and D windows; ``tilt`` shifts them for the moment integrands."""
    nh = drift.nu_hat
    a = drift.a
    w = quad.tail_sigmas * np.sqrt(2.0 * t)
    s_mid = t * (nh[0] + nh[1]) - tilt
    d_top = t * (nh[1] - nh[0]) + tilt + w
    d_lo = -2.0 * a * np.log(40.0 + quad.tail_sigmas) - a
    return (s_mid - w, s_mid + w), (d_lo, d_top)


def density_grid(drift: DriftSpec, t: float, quad: QuadConfig | None = None,
                 refine: int = 1, tilt: float = 0.0) -> DensityGrid:
    quad = quad or QuadConfig()
    _check_n2(drift)
    if drift.N != 2:
        raise UnsupportedN("density_grid is the N=2 tensor form")
    (s0, s1), (d0, d1) = _windows(drift, t, quad, tilt)
    hS = 0.5 * np.sqrt(t)
    rS = composite_gauss_legendre(s0, s1, int(np.ceil((s1 - s0) / hS)), 8 * refine)
    hD = 0.5 * min(np.sqrt(t), 4.0 * drift.a)
    rD = composite_gauss_legendre(d0, d1, int(np.ceil((d1 - d0) / hD)), 8 * refine)
    return DensityGrid(
        rS.nodes, rS.weights, _centre_factor(drift, t, rS.nodes),
        rD.nodes, rD.weights, _difference_factor(drift, t, rD.nodes, quad, refine),
    )


def _refined_pair(fn, tol: float, what: str):
    v1, v2 = fn(1), fn(2)
    if abs(v2 - v1) > tol * max(1.0, abs(v2)):
        raise NonConvergent(f"{what} refinement gap {abs(v2 - v1):.2e}")
    return v2


def wm_mass(drift: DriftSpec, t: float, quad: QuadConfig | None = None) -> float:
    """Total mass of the Whittaker-measure density over the truncated plane."""
    quad = quad or QuadConfig()
    if drift.N == 1:
        nh = drift.nu_hat[0]
        lo, hi = t * nh - quad.tail_sigmas * np.sqrt(t), t * nh + quad.tail_sigmas * np.sqrt(t)
        r = composite_gauss_legendre(lo, hi, int(np.ceil(2 * quad.tail_sigmas)), 16)
        x = r.nodes
        dens = np.exp(-t * nh * nh / 2.0 + nh * x) * _theta_n1(t, x, quad)
        return float(r.weights @ dens)
    return _refined_pair(lambda rf: density_grid(drift, t, quad, rf).integrate(), 1e-6, "density mass")


def direct_observable(drift: DriftSpec, obs: ObservablePoint, quad: QuadConfig | None = None) -> float:
    """E[Theta^a(X_1(t) - h)] by integrating the soft indicator against the density."""
    quad = quad or QuadConfig()
    _check_n2(drift)
    a, t, h = drift.a, obs.t, obs.h
    if drift.N == 1:
        nh = drift.nu_hat[0]
        lo, hi = t * nh - quad.tail_sigmas * np.sqrt(t), t * nh + quad.tail_sigmas * np.sqrt(t)

        def one(rf):
            cuts = sorted({lo, hi, min(max(h, lo), hi)})
            tot = 0.0
            for c0, c1 in zip(cuts[:-1], cuts[1:]):
                panels = int(np.ceil((c1 - c0) / min(a, np.sqrt(t)) * 2)) + 1
                r = composite_gauss_legendre(c0, c1, panels, 8 * rf)
                dens = np.exp(-t * nh * nh / 2.0 + nh * r.nodes) * _theta_n1(t, r.nodes, quad)
                tot += float(r.weights @ (theta_soft(r.nodes - h, a) * dens))
            return tot

        return _refined_pair(one, 1e-9, "direct observable")

    def two(rf):
        g = density_grid(drift, t, quad, rf)
        return g.integrate(lambda x1, x2: theta_soft(x1 - h, a))

    return _refined_pair(two, 1e-7, "direct observable")


def gumbel_gaussian(nu_hat: float, a: float, t: float, h: float, quad: QuadConfig | None = None) -> float:
    """E[exp(-e^{-(X-h)/a})] for X ~ N(t nu_hat, t), by Gauss-Hermite."""
    quad = quad or QuadConfig()
    rule = gauss_hermite(max(quad.gh_order, 200))
    x = t * nu_hat + np.sqrt(2.0 * t) * rule.nodes
    return float(rule.weights @ theta_soft(x - h, a) / np.sqrt(np.pi))


# ------------------------------------------------------------------- moments

def f_factor(drift: DriftSpec, t: float, v):
    """e^{t v/a^2} prod_l 1/(v + nu_l)."""
    nu = drift.nu
    v = np.asarray(v, dtype=complex)
    den = np.ones(v.shape, dtype=complex)
    for n in nu:
        d = v + n
        if np.any(np.abs(d) < 1e-12):
            raise NearPole("f_factor evaluated at a pole")
        den = den * d
    return np.exp(t * v / drift.a ** 2) / den


def f_residue(drift: DriftSpec, t: float, j: int) -> float:
    nu = drift.nu
    out = np.exp(-t * nu[j] / drift.a ** 2)
    for l, n in enumerate(nu):
        if l != j:
            out /= n - nu[j]
    return float(out)


def moment_circle(drift: DriftSpec, points: int | None = None):
    """Circle around all -nu_j, small enough that shifted poles stay outside
    and any two contour points are closer than 1."""
    nu = drift.nu
    spread = float(np.max(nu) - np.min(nu))
    if not spread < 1.0:
        raise ConfigError("moment contours need a drift spread below 1")
    r = 0.5 * (spread / 2.0 + 0.5)
    return circle_rule(float(-np.mean(nu)), r, points or 128)


@dataclass(frozen=True)
class MomentRoutes:
    residue: float
    contour: float

    @property
    def rel_gap(self) -> float:
        return abs(self.residue - self.contour) / max(abs(self.residue), 1e-300)


def moment_first(drift: DriftSpec, t: float, quad: QuadConfig | None = None) -> MomentRoutes:
    """E[e^{-X_1(t)/a}] by residues and by circle quadrature of f_factor."""
    quad = quad or QuadConfig()
    a = drift.a
    pre = np.exp(t / (2.0 * a * a))
    A = pre * sum(f_residue(drift, t, j) for j in range(drift.N))
    circ = moment_circle(drift, quad.circle_points)
    B = pre * circ.integrate(f_factor(drift, t, circ.nodes)) / (2j * np.pi)
    if abs(B.imag) > 1e-10 * max(1.0, abs(B.real)):
        raise NonConvergent("contour moment has an imaginary part")
    return MomentRoutes(float(A), float(B.real))


def _partition_term(drift: DriftSpec, t: float, lam: Partition, circ) -> complex:
    """prod oint dv/(2 pi i) det[1/(v_j + lam_j - v_k)] prod_j f(v_j)...f(v_j + lam_j - 1)."""
    L = lam.length
    v1 = circ.nodes
    w1 = circ.weights / (2j * np.pi)
    grids = np.meshgrid(*([v1] * L), indexing="ij")
    V = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.ones(V.shape[0], dtype=complex)
    for wg in np.meshgrid(*([w1] * L), indexing="ij"):
        W = W * wg.ravel()
    lp = np.array(lam.parts)
    M = 1.0 / (V[:, :, None] + lp[None, :, None] - V[:, None, :])
    det = np.linalg.det(M)
    prod = np.ones(V.shape[0], dtype=complex)
    for j in range(L):
        for m in range(lam.parts[j]):
            prod = prod * f_factor(drift, t, V[:, j] + m)
    mult = 1
    for c in lam.multiplicities.values():
        mult *= factorial(c)
    return complex(np.sum(W * det * prod) / mult)


def moment_kappa(drift: DriftSpec, t: float, kappa: int, quad: QuadConfig | None = None) -> float:
    """E[e^{-kappa X_1(t)/a}] as kappa! e^{kappa t/2a^2} times a sum over
    partitions of kappa of multiple circle integrals."""
    if not 1 <= kappa <= 3:
        raise ConfigError("kappa must be 1, 2 or 3")
    quad = quad or QuadConfig()
    nu = drift.nu
    if np.min(np.abs(np.subtract.outer(nu, nu)) + np.eye(drift.N)) < 1e-12:
        raise DegenerateDrift("drift entries must be distinct")
    circ = moment_circle(drift, quad.circle_points if kappa < 3 else min(quad.circle_points, 96))
    total = sum(_partition_term(drift, t, lam, circ) for lam in Partition.all_of(kappa))
    val = factorial(kappa) * np.exp(kappa * t / (2.0 * drift.a ** 2)) * total
    if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
        raise NonConvergent("contour moment has an imaginary part")
    return float(val.real)


def moment_second_residue(drift: DriftSpec, t: float) -> float:
    """E[e^{-2 X_1(t)/a}] from the two residue sums (pair term and shifted term)."""
    nu = drift.nu
    a = drift.a
    R = [f_residue(drift, t, j) for j in range(drift.N)]
    pair = 0.0
    for j1 in range(drift.N):
        for j2 in range(drift.N):
            d = nu[j2] - nu[j1]
            pair += d / (d + 1.0) * R[j1] * R[j2]
    shifted = 0.0
    for j in range(drift.N):
        g = np.exp(t * (1.0 - nu[j]) / a ** 2)
        for n in nu:
            g /= 1.0 - nu[j] + n
        shifted += R[j] * g
    return float(np.exp(t / a ** 2) * (pair + shifted))


def density_moment(drift: DriftSpec, t: float, kappa: int, quad: QuadConfig | None = None) -> float:
    """int e^{-kappa x_1/a} wm_density dx on a window tilted toward the
    moment's mass."""
    quad = quad or QuadConfig()
    _check_n2(drift)
    a = drift.a
    if drift.N == 1:
        nh = drift.nu_hat[0]
        return float(np.exp(-kappa * t * nh / a + kappa ** 2 * t / (2 * a * a)))
    tilt = kappa * t / a

    def one(rf):
        g = density_grid(drift, t, quad, rf, tilt)
        # e^{-kappa x1/a} = e^{-kappa S/2a} e^{kappa D/2a} is separable
        s_part = g.wS @ (g.fS * np.exp(-kappa * g.S / (2.0 * a)))
        d_part = g.wD @ (g.gD * np.exp(kappa * g.D / (2.0 * a)))
        return float(0.5 * s_part * d_part)

    v1, v2 = one(1), one(2)
    if abs(v2 - v1) > 1e-6 * abs(v2):
        raise NonConvergent(f"density moment refinement gap {abs(v2 - v1) / abs(v2):.2e}")
    return v2


# ----------------------------------------------------------------- identities

def identity_det_size2(v1: complex, v2: complex) -> tuple[complex, complex]:
    """(det[[1, 1/(v1+1-v2)], [1/(v2+1-v1), 1]], -(v1-v2)^2/(1-(v1-v2)^2))."""
    d = complex(v1) - complex(v2)
    if abs(abs(d) - 1.0) < 1e-10 and (abs(d - 1) < 1e-10 or abs(d + 1) < 1e-10):
        raise SingularShift("v1 - v2 = +-1")
    lhs = 1.0 - 1.0 / ((d + 1.0) * (1.0 - d))
    rhs = -d * d / (1.0 - d * d)
    return lhs, rhs


def identity_symmetrization(v) -> tuple[complex, complex]:
    """(symmetrised product of (v_q - v_p)/(v_q - v_p + 1), det[1/(v_j + 1 - v_l)])."""
    v = [complex(z) for z in v]
    k = len(v)
    if not 1 <= k <= 4:
        raise ConfigError("identity_symmetrization supports 1 to 4 variables")
    for p in range(k):
        for q in range(k):
            if p != q and abs(v[q] - v[p] + 1.0) < 1e-10:
                raise SingularShift("some v_q - v_p equals -1")
    lhs = 0j
    for sigma in permutations(range(k)):
        term = 1 + 0j
        for p in range(k):
            for q in range(p + 1, k):
                d = v[sigma[q]] - v[sigma[p]]
                term *= d / (d + 1.0)
        lhs += term
    lhs /= factorial(k)
    M = np.array([[1.0 / (v[j] + 1.0 - v[l]) for l in range(k)] for j in range(k)])
    return lhs, complex(np.linalg.det(M))
