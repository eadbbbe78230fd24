"""Class-one GL(N) Whittaker functions for N <= 3.

psi_nu(x) is the integral of exp(F_nu(T)) over the interior entries of a
triangular array whose bottom row is x.  N=2 also has a Bessel-K closed
form which the tests pin against the array integral.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import factorial

import numpy as np

from .errors import DegenerateIndex, NonConvergent, SizeMismatch, UnsupportedN
from .numkit import (
    QuadConfig,
    _bessel_cutoff,
    bessel_k,
    composite_gauss_legendre,
    log_gamma,
    vandermonde,
)


@dataclass(frozen=True)
class WhittakerIndex:
    nu: tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, "nu", tuple(complex(v) for v in self.nu))
        if self.N not in (1, 2, 3):
            raise UnsupportedN(f"Whittaker functions implemented for N <= 3, got {self.N}")

    @property
    def N(self) -> int:
        return len(self.nu)


@dataclass(frozen=True)
class GiventalArray:
    """Triangular array. ``interior`` lists T[j][k] row by row for
    j = 1..N-1, k = 1..j; ``boundary`` is the bottom row x."""

    interior: tuple[float, ...]
    boundary: tuple[float, ...]

    def rows(self):
        n = len(self.boundary)
        if len(self.interior) != n * (n - 1) // 2:
            raise SizeMismatch(
                f"{len(self.interior)} interior entries for a bottom row of length {n}"
            )
        out, pos = [], 0
        for j in range(1, n):
            out.append(list(self.interior[pos:pos + j]))
            pos += j
        out.append(list(self.boundary))
        return out


def _exponent(nu, rows):
    """F_nu on arrays; ``rows[j]`` holds row j+1 as a list of ndarrays/floats."""
    n = len(rows)
    val = 0.0
    prev_sum = 0.0
    for j in range(n):
        s = sum(rows[j])
        val = val + nu[j] * (s - prev_sum)
        prev_sum = s
    for j in range(n - 1):
        for k in range(j + 1):
            val = val - np.exp(-(rows[j][k] - rows[j + 1][k]))
            val = val - np.exp(-(rows[j + 1][k + 1] - rows[j][k]))
    return val


def givental_exponent(index: WhittakerIndex, arr: GiventalArray) -> complex:
    if len(arr.boundary) != index.N:
        raise SizeMismatch("index and array sizes differ")
    return complex(_exponent(index.nu, arr.rows()))


def _n2_window(nu, x):
    mid = 0.5 * (x[0] + x[1])
    c = np.exp(-0.5 * (x[1] - x[0]))
    mu = nu[0] - nu[1]
    upper = float(_bessel_cutoff(np.array([abs(mu.real)]), np.array([2.0 * c]))[0])
    return mid - upper, mid + upper, abs(mu.imag)


def _givental_n2(nu, x, refine: int) -> complex:
    lo, hi, osc = _n2_window(nu, x)
    panels = int(np.ceil((hi - lo) * (1.0 + osc) / 2.0)) + 2
    rule = composite_gauss_legendre(lo, hi, panels * refine, 16)
    T = rule.nodes
    F = _exponent(nu, [[T], [x[0], x[1]]])
    shift = np.max(F.real)
    return np.exp(shift) * (np.exp(F - shift) @ rule.weights)


def _axis(lo, hi, per_unit, refine):
    panels = int(np.ceil((hi - lo) / 1.0))
    return composite_gauss_legendre(lo, hi, panels, per_unit * refine)


def _givental_n3(nu, x, refine: int, per_unit: int = 6) -> complex:
    margin = 4.0 + np.log(50.0) + max(abs(v.real) for v in nu)
    x1, x2, x3 = x
    r21 = _axis(min(x1, x2) - margin, max(x1, x2) + margin, per_unit, refine)
    r22 = _axis(min(x2, x3) - margin, max(x2, x3) + margin, per_unit, refine)
    r11 = _axis(min(x) - 2 * margin, max(x) + 2 * margin, per_unit, refine)
    T21, T22 = np.meshgrid(r21.nodes, r22.nodes, indexing="ij")
    W2 = np.outer(r21.weights, r22.weights)
    # exponent is evaluated chunk by chunk over T11 with a running rescale
    chunks = []
    for i0 in range(0, len(r11.nodes), 16):
        t11 = r11.nodes[i0:i0 + 16][:, None, None]
        F = _exponent(nu, [[t11], [T21[None], T22[None]], [x1, x2, x3]])
        s = np.max(F.real)
        part = np.einsum("kab,ab,k->", np.exp(F - s), W2, r11.weights[i0:i0 + 16])
        chunks.append((s, part))
    top = max(s for s, _ in chunks)
    return np.exp(top) * sum(np.exp(s - top) * p for s, p in chunks)


def whittaker_givental(index: WhittakerIndex, x, quad: QuadConfig | None = None,
                       with_error: bool = False, tol: float = 1e-6):
    """Array-integral evaluation of psi_nu(x) with an order-refinement error estimate."""
    quad = quad or QuadConfig()
    x = tuple(float(v) for v in x)
    if len(x) != index.N:
        raise SizeMismatch("x and index sizes differ")
    nu = index.nu
    if index.N == 1:
        val, err = np.exp(nu[0] * x[0]), 0.0
    else:
        fn = _givental_n2 if index.N == 2 else _givental_n3
        coarse = fn(nu, x, 1)
        val = fn(nu, x, quad.refine_factor)
        err = abs(val - coarse) / max(abs(val), 1e-300)
        if err > tol:
            raise NonConvergent(f"Givental quadrature refinement gap {err:.2e}")
    return (val, err) if with_error else val


def whittaker_n2(nu1, nu2, x1, x2):
    """Closed form 2 exp((nu1+nu2)(x1+x2)/2) K_{nu1-nu2}(2 exp(-(x2-x1)/2)).

    Broadcasts over array inputs."""
    nu1 = np.asarray(nu1, dtype=complex)
    nu2 = np.asarray(nu2, dtype=complex)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    k = bessel_k(nu1 - nu2, 2.0 * np.exp(-0.5 * (x2 - x1)))
    return 2.0 * np.exp(0.5 * (nu1 + nu2) * (x1 + x2)) * k


def whittaker(nu, x, quad: QuadConfig | None = None):
    """psi_nu(x) using the fastest available route."""
    nu = tuple(nu)
    if len(nu) == 1:
        return np.exp(complex(nu[0]) * x[0])
    if len(nu) == 2:
        return complex(whittaker_n2(nu[0], nu[1], x[0], x[1]))
    return whittaker_givental(WhittakerIndex(nu), x, quad)


def sklyanin_density(mu) -> float:
    """(2pi)^-N (N!)^-1 prod_{j<l} (mu_l - mu_j) sinh(pi (mu_l - mu_j)) / pi."""
    mu = list(mu)
    n = len(mu)
    out = 1.0 / ((2.0 * np.pi) ** n * factorial(n))
    for j, l in combinations(range(n), 2):
        d = mu[l] - mu[j]
        out *= d * np.sinh(np.pi * d) / np.pi
    return out


def sklyanin_density_gamma(mu) -> float:
    """Same density written with prod |Gamma(i(mu_l - mu_j))|^-2."""
    mu = list(mu)
    n = len(mu)
    logs = 0.0
    for j, l in combinations(range(n), 2):
        d = mu[l] - mu[j]
        if d == 0:
            return 0.0
        logs -= 2.0 * log_gamma(1j * d).real
    return float(np.exp(logs) / ((2.0 * np.pi) ** n * factorial(n)))


def check_recurrence(nu, x) -> float:
    """Relative residual of the first-order index recurrence for N=2."""
    nu = [float(v) for v in nu]
    if len(nu) != 2 or len(x) != 2:
        raise UnsupportedN("check_recurrence is implemented for N=2")
    if abs(nu[0] - nu[1]) < 1e-12:
        raise DegenerateIndex("indices must be distinct")
    lhs = 0.0
    for j in range(2):
        k = 1 - j
        shifted = [1j * v for v in nu]
        shifted[j] = shifted[j] - 1.0
        coef = 1.0 / (1j * (nu[k] - nu[j]))
        lhs = lhs + coef * whittaker_n2(shifted[0], shifted[1], x[0], x[1])
    rhs = np.exp(-x[0]) * whittaker_n2(1j * nu[0], 1j * nu[1], x[0], x[1])
    return float(abs(lhs - rhs) / abs(rhs))


def check_asymptotic(nu, x, a_values) -> list[float]:
    """Relative gaps |a psi_{a nu}(x/a) - det[e^{x_j nu_l}]/h(nu)| for N=2."""
    nu = [float(v) for v in nu]
    x = [float(v) for v in x]
    if len(nu) != 2:
        raise UnsupportedN("check_asymptotic is implemented for N=2")
    if abs(nu[0] - nu[1]) < 1e-12:
        raise DegenerateIndex("indices must be distinct")
    target = np.linalg.det(np.exp(np.outer(x, nu))) / vandermonde(nu)
    gaps = []
    for a in a_values:
        val = a * whittaker_n2(a * nu[0], a * nu[1], x[0] / a, x[1] / a).real
        gaps.append(float(abs(val - target) / abs(target)))
    return gaps
