"""The lifted function Phi, its a -> 0 limit, and the rank-N correlation kernel.

Two versions of the kernel are available through ``contour``:

``"real"``
    the y-integral taken literally along the real axis, as written in the
    kernel formula.
``"shifted"``
    the analytic continuation obtained from a vertical line to the right of
    every pole of Phi_j.  It differs from ``"real"`` only for
    x' < t (nu_hat_j - 1/a), by the residues of the poles the real axis
    crosses there.

Every line integral is computed on a line kept at least ``_eta`` away from
the poles; residues are then added or removed in closed form, so both
versions are exact to quadrature accuracy everywhere, including near poles.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np

from .errors import ConfigError, DegenerateDrift, NearPole, NonConvergent, RPrimeNotInConfig
from .numkit import QuadConfig, composite_gauss_legendre, gauss_hermite, gaussian_density, log_gamma

CONTOURS = ("real", "shifted")
POLE_TOL = 1e-8


@dataclass(frozen=True)
class DriftSpec:
    """Lifted drifts ``nu_hat`` and lifting scale ``a``; the drift is a*nu_hat."""

    nu_hat: tuple[float, ...]
    a: float

    def __post_init__(self):
        nh = tuple(float(v) for v in self.nu_hat)
        object.__setattr__(self, "nu_hat", nh)
        object.__setattr__(self, "a", float(self.a))
        if len(nh) < 1:
            raise ConfigError("nu_hat must be nonempty")
        if not self.a > 0:
            raise ConfigError(f"a must be positive, got {self.a}")
        for j in range(len(nh)):
            for k in range(j + 1, len(nh)):
                if abs(nh[j] - nh[k]) < 1e-3:
                    raise DegenerateDrift(f"nu_hat entries {j} and {k} closer than 1e-3")
        if max(abs(v) for v in nh) >= 1.0 / (2.0 * self.a):
            raise ConfigError(
                f"max |nu_hat| = {max(abs(v) for v in nh)} must be below 1/(2a) = {0.5 / self.a}"
            )

    @property
    def N(self) -> int:
        return len(self.nu_hat)

    @property
    def nu(self) -> np.ndarray:
        return self.a * np.array(self.nu_hat)

    @property
    def spread(self) -> float:
        return max(self.nu_hat) - min(self.nu_hat)

    def permuted(self, perm) -> "DriftSpec":
        return DriftSpec(tuple(self.nu_hat[p] for p in perm), self.a)


@dataclass(frozen=True)
class ObservablePoint:
    t: float
    h: float

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "h", float(self.h))
        if not self.t > 0:
            raise ConfigError(f"t must be positive, got {self.t}")


def theta_soft(x, a: float):
    """exp(-exp(-x/a)), a smoothed step of width a."""
    with np.errstate(over="ignore"):
        return np.exp(-np.exp(-np.asarray(x, dtype=float) / a))


def phi_entire(config, rprime: float, z):
    """prod_{r != r'} (r - z)/(r - r')."""
    config = [float(r) for r in config]
    if not any(r == rprime for r in config):
        raise RPrimeNotInConfig(f"{rprime} is not one of {config}")
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    for r in config:
        if r != rprime:
            out = out * (r - z) / (r - rprime)
    return out[()] if out.ndim == 0 else out


def pole_locations(drift: DriftSpec, j: int, n_max: int) -> np.ndarray:
    """Poles nu_hat_j - n/a, n = 1..n_max, of Phi_j (j is 0-based)."""
    n = np.arange(1, n_max + 1)
    return drift.nu_hat[j] - n / drift.a


def _log_phi(drift: DriftSpec, j: int, z: np.ndarray):
    """log Phi_j(z) and a mask of points where a 1/Gamma factor vanishes."""
    a, nh = drift.a, drift.nu_hat
    logs = log_gamma(1.0 - a * (nh[j] - z))
    zero = np.zeros(z.shape, dtype=bool)
    for l in range(len(nh)):
        if l == j:
            continue
        w = a * (nh[l] - z)
        nearest = np.round(w.real)
        at = (nearest <= 0) & (np.abs(w - nearest) < 1e-14)
        zero |= at
        w = np.where(at, 0.5, w)
        logs = logs + log_gamma(complex(a * (nh[l] - nh[j]))) - log_gamma(w)
    return logs, zero


def phi_lifted(drift: DriftSpec, j: int, z, check_poles: bool = True):
    """Gamma(1 - a(nu_hat_j - z)) prod_{l != j} Gamma(a(nu_hat_l - nu_hat_j)) / Gamma(a(nu_hat_l - z)).

    ``j`` is 0-based.  Raises NearPole when z is within 1e-8 of a pole.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    # poles: 1 - a(nu_hat_j - z) = -m  <=>  z = nu_hat_j - (m+1)/a
    m = (drift.nu_hat[j] - z.real) * drift.a - 1.0
    near_n = np.maximum(np.round(m), 0.0)
    zp = drift.nu_hat[j] - (near_n + 1.0) / drift.a
    dist = np.abs(z - zp)
    if check_poles and np.any(dist < POLE_TOL):
        k = int(np.argmax(dist < POLE_TOL))
        raise NearPole(
            f"z={z[k]} within {POLE_TOL} of pole {zp[k]}", pole_index=int(near_n[k]) + 1
        )
    logs, zero = _log_phi(drift, j, z)
    out = np.where(zero, 0.0, np.exp(logs))
    return out[0] if scalar else out


def phi_residue(drift: DriftSpec, j: int, n: int) -> float:
    """Residue of Phi_j at its n-th pole nu_hat_j - n/a."""
    a, nh = drift.a, drift.nu_hat
    log_r = -lgamma(n) - np.log(a)
    sign = (-1.0) ** (n - 1)
    val = complex(sign * np.exp(log_r))
    for l in range(len(nh)):
        if l == j:
            continue
        d = a * (nh[l] - nh[j])
        val *= np.exp(log_gamma(complex(d)) - log_gamma(complex(d + n)))
    return val.real


def _eta(drift: DriftSpec, t: float) -> float:
    return min(0.25 / drift.a, 0.5 * np.sqrt(t))


def _line_abscissa(drift: DriftSpec, j: int, xp: np.ndarray, t: float) -> np.ndarray:
    """Real part of the integration line for each x': x' itself unless a pole
    is closer than eta, in which case the line steps eta past that pole."""
    a, nh = drift.a, drift.nu_hat[j]
    eta = _eta(drift, t)
    n = np.maximum(np.round((nh - xp) * a), 1.0)
    zp = nh - n / a
    near = np.abs(xp - zp) < eta
    c = np.where(near, np.where(xp >= zp, zp + eta, zp - eta), xp)
    return c


def _y_rule(drift: DriftSpec, t: float, refine: int, tail_sigmas: float):
    growth = max(drift.N - 2, 0) * np.pi * drift.a / 2.0
    ymax = growth * t + tail_sigmas * np.sqrt(t)
    width = min(_eta(drift, t), np.sqrt(t))
    panels = 2 * int(np.ceil(ymax / width))
    return composite_gauss_legendre(-ymax, ymax, panels, 8 * refine)


def _residue_table(drift: DriftSpec, j: int, lowest: float):
    """(z_n, Res_n) for every pole of Phi_j above ``lowest``."""
    a, nh = drift.a, drift.nu_hat[j]
    n_max = int(np.floor((nh - lowest) * a))
    if n_max < 1:
        return np.empty(0), np.empty(0)
    n = np.arange(1, n_max + 1)
    return nh - n / a, np.array([phi_residue(drift, j, int(k)) for k in n])


def b_values(drift: DriftSpec, j: int, t: float, xprime, contour: str = "real",
             quad: QuadConfig | None = None, log_gauge=None, refine: int = 1):
    """e^{-log_gauge} * integral over y of p(t, y|0) Phi_j(x' + iy).

    Returns a complex array over ``xprime``.  ``log_gauge`` (same shape as
    xprime, default 0) is subtracted in the exponent before exponentiating,
    which keeps far-left values representable.
    """
    if contour not in CONTOURS:
        raise ConfigError(f"contour must be one of {CONTOURS}")
    quad = quad or QuadConfig()
    xp = np.atleast_1d(np.asarray(xprime, dtype=float))
    gauge = np.zeros_like(xp) if log_gauge is None else np.broadcast_to(log_gauge, xp.shape)
    c = _line_abscissa(drift, j, xp, t)
    rule = _y_rule(drift, t, refine, quad.tail_sigmas)
    y = rule.nodes
    out = np.empty(xp.shape, dtype=complex)
    step = max(1, 200000 // len(y))
    for i0 in range(0, len(xp), step):
        sl = slice(i0, i0 + step)
        cc, xx, gg = c[sl, None], xp[sl, None], gauge[sl, None]
        z = cc + 1j * y[None, :]
        logs, zero = _log_phi(drift, j, z)
        expo = ((z - xx) ** 2) / (2.0 * t) - gg + logs
        vals = np.where(zero, 0.0, np.exp(expo))
        out[sl] = (vals @ rule.weights) / np.sqrt(2.0 * np.pi * t)
    # residue bookkeeping between the line and the target contour
    lowest = float(min(np.min(c), np.min(xp))) - 1.0
    zs, rs = _residue_table(drift, j, lowest)
    if len(zs):
        Z, X = zs[None, :], xp[:, None]
        add = (Z > c[:, None]).astype(float)
        if contour == "real":
            add = add - (Z > X).astype(float)
        # poles the bookkeeping does not touch may be far out; skip their exponentials
        expo = np.where(add != 0, (Z - X) ** 2 / (2.0 * t) - gauge[:, None], -np.inf)
        term = rs[None, :] * np.exp(expo) * np.sqrt(2.0 * np.pi / t)
        out = out + np.sum(term * add, axis=1)
    return out


def b_matrix(drift: DriftSpec, t: float, xprime, contour: str = "real",
             quad: QuadConfig | None = None, log_gauge=None, refine: int = 1):
    return np.array([
        b_values(drift, j, t, xprime, contour, quad, log_gauge, refine)
        for j in range(drift.N)
    ])


def _assert_real(vals, what: str):
    vals = np.asarray(vals)
    bad = np.abs(vals.imag) > 1e-10 * (1.0 + np.abs(vals.real))
    if np.any(bad):
        raise NonConvergent(f"{what}: imaginary residual {np.max(np.abs(vals.imag)):.2e}")


def kernel_bK_grid(drift: DriftSpec, t: float, x, xprime, quad: QuadConfig | None = None,
                   contour: str = "real", check: bool = True) -> np.ndarray:
    """Matrix [bK(t; x_p, x'_q)] for 1-D arrays x and x'."""
    quad = quad or QuadConfig()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xp = np.atleast_1d(np.asarray(xprime, dtype=float))
    A = np.array([gaussian_density(t, x, t * 0 + v) for v in drift.nu_hat])
    B = b_matrix(drift, t, xp, contour, quad)
    K = A.T @ B
    if check:
        K2 = A.T @ b_matrix(drift, t, xp, contour, quad, refine=quad.refine_factor)
        gap = np.max(np.abs(K2 - K)) / max(np.max(np.abs(K2)), 1e-300)
        if gap > 1e-8:
            raise NonConvergent(f"kernel refinement gap {gap:.2e}")
        K = K2
    _assert_real(K, "kernel")
    return K.real


def kernel_bK(drift: DriftSpec, t: float, x: float, xprime: float,
              quad: QuadConfig | None = None, contour: str = "real") -> float:
    """sum_j p(t, x|nu_hat_j) int p(t, y|0) Phi_j(x' + iy) dy."""
    return float(kernel_bK_grid(drift, t, [x], [xprime], quad, contour)[0, 0])


def kernel_calK(drift: DriftSpec, obs: ObservablePoint, x: float, xprime: float,
                quad: QuadConfig | None = None, contour: str = "real") -> float:
    """Reciprocal-time kernel (1/t) bK(1/t; x/t, x'/t)."""
    t = obs.t
    return kernel_bK(drift, 1.0 / t, x / t, xprime / t, quad, contour) / t


def kernel_calK_grid(drift: DriftSpec, obs: ObservablePoint, x, xprime,
                     quad: QuadConfig | None = None, contour: str = "real",
                     check: bool = True) -> np.ndarray:
    t = obs.t
    return kernel_bK_grid(drift, 1.0 / t, np.asarray(x) / t, np.asarray(xprime) / t,
                          quad, contour, check) / t


def kernel_limit(config, t: float, x: float, xprime: float,
                 quad: QuadConfig | None = None) -> float:
    """Equal-time kernel with the polynomial Phi of the a -> 0 limit.

    Gauss-Hermite is exact here once gh_order exceeds the number of points.
    """
    quad = quad or QuadConfig()
    config = [float(r) for r in config]
    rule = gauss_hermite(quad.gh_order)
    y = np.sqrt(2.0 * t) * rule.nodes
    total = 0.0
    for r in config:
        vals = phi_entire(config, r, xprime + 1j * y)
        total += gaussian_density(t, x, r) * (rule.integrate(vals) / np.sqrt(np.pi))
    _assert_real(total, "limit kernel")
    return float(np.real(total))
