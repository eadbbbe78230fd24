"""E[Theta^a(X_1(t) - h)] as a Fredholm determinant, three ways.

* ``fredholm_rank_det``: the kernel has rank N, so the determinant collapses
  to det(I_N - G) with an N x N Gram matrix.  G is computed with the
  x-integral done in closed form and a single vertical-line integral left.
* ``fredholm_series_direct``: the N+1-term series from pointwise kernel
  values on an x-grid.
* ``bc_fredholm_det``: the double-contour (circle x vertical line) kernel
  and its Fredholm series, truncated at L <= 3.

``contour="shifted"`` (default) uses the analytically continued kernel and
gives the expectation.  ``contour="real"`` evaluates the literal real-axis
kernel; it agrees with ``"shifted"`` only when every pole threshold
t (nu_hat_j - 1/a) is far below the bulk of the Gaussian factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContourViolation, NonConvergent
from .kernel import (
    CONTOURS,
    DriftSpec,
    ObservablePoint,
    _log_phi,
    b_matrix,
    kernel_bK_grid,
    phi_residue,
)
from .numkit import QuadConfig, circle_rule, composite_gauss_legendre, log_gamma


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    h: float
    contour: str
    method: str
    warnings: tuple[str, ...] = ()
    error: float = 0.0


# ------------------------------------------------------------------ Gram route

def _gram_line(drift: DriftSpec, obs: ObservablePoint, quad: QuadConfig, refine: int):
    """Gram matrix of the continued kernel with the x-integral done exactly.

    G_jk = (1/2pi) int dtau Phi_j(nu_j - s) exp(t((s-nu_j)^2 - nu_k^2)/2)
           * exp(h (s - nu_j + nu_k)) / (s - nu_j + nu_k),   s = sigma_j + i tau,
    with spread < sigma_j < 1/a.  The integrand has no singularities left of
    the Cauchy poles s = nu_j - nu_k, whose residues are Phi_j(nu_k) = delta_jk,
    so a row may instead use a line left of all of them and add delta_jk.
    """
    nh = np.array(drift.nu_hat)
    a, t, h = drift.a, obs.t, obs.h
    # each row's line goes as close to the Gaussian saddle nu_j - h/t as the
    # Cauchy poles (nu_j - nu_k) and the Gamma poles (s >= 1/a) allow
    margin = min(0.5, 0.25 * (1.0 / a - drift.spread))
    growth = max(drift.N - 2, 0) * np.pi * a / 2.0
    tmax = growth / t + quad.tail_sigmas / np.sqrt(t)
    G = np.empty((drift.N, drift.N), dtype=complex)
    for j in range(drift.N):
        saddle = nh[j] - h / t
        right = float(np.clip(saddle, drift.spread + margin, 1.0 / a - margin))
        left = float(min(saddle, np.min(nh[j] - nh) - margin))
        sigma = left if abs(left - saddle) < abs(right - saddle) else right
        freq = abs(h) + t * (abs(sigma) + np.max(np.abs(nh))) + 1.0
        width = min(margin, 1.0 / np.sqrt(t), 2.0 / freq)
        panels = 2 * int(np.ceil(tmax / width))
        rule = composite_gauss_legendre(-tmax, tmax, panels, 8 * refine)
        s = sigma + 1j * rule.nodes
        logphi, zero = _log_phi(drift, j, nh[j] - s)
        for k in range(drift.N):
            c = s - nh[j] + nh[k]
            expo = logphi + t * ((s - nh[j]) ** 2 - nh[k] ** 2) / 2.0 + h * c
            vals = np.where(zero, 0.0, np.exp(expo) / c)
            G[j, k] = (vals @ rule.weights) / (2.0 * np.pi)
            if sigma == left:
                G[j, k] += float(j == k)
    return G


def _real_axis_correction(drift: DriftSpec, obs: ObservablePoint) -> np.ndarray:
    """Continued minus literal Gram matrix: residues of the poles that the
    real-axis contour crosses, integrated against the Gaussian factor."""
    nh = drift.nu_hat
    a, t, h = drift.a, obs.t, obs.h
    C = np.zeros((drift.N, drift.N))
    for j in range(drift.N):
        for k in range(drift.N):
            total = 0.0
            for n in range(1, 2000):
                z = nh[j] - n / a
                m = min(h, t * z)
                rate = nh[k] - z
                res = phi_residue(drift, j, n)
                if res == 0.0:
                    continue
                log_mag = np.log(abs(res)) + t * (z * z - nh[k] ** 2) / 2.0 + m * rate - np.log(rate)
                term = np.sign(res) * np.exp(log_mag)
                total += term
                if t * z < h and log_mag < np.log(1e-18 * max(abs(total), 1e-300)):
                    break
            C[j, k] = total
    return C


def _x_window(drift: DriftSpec, obs: ObservablePoint, quad: QuadConfig):
    t, h = obs.t, obs.h
    rate = 1.0 / drift.a - drift.spread
    top = min(h, t * min(drift.nu_hat))
    lo = top - max(quad.tail_sigmas * np.sqrt(t), 36.0 / rate)
    return lo, h


def _x_rule(drift: DriftSpec, obs: ObservablePoint, quad: QuadConfig, contour: str, refine: int):
    """Composite Gauss-Legendre on [lo, h], split at the literal kernel's jumps."""
    lo, hi = _x_window(drift, obs, quad)
    if hi <= lo:
        return None
    cuts = {lo, hi}
    if contour == "real":
        t = obs.t
        for j in range(drift.N):
            n = 1
            while True:
                z = t * (drift.nu_hat[j] - n / drift.a)
                if z <= lo:
                    break
                if z < hi:
                    cuts.add(z)
                n += 1
    cuts = sorted(cuts)
    width = 0.5 * min(np.sqrt(obs.t), 1.0)
    nodes, weights = [], []
    for a0, b0 in zip(cuts[:-1], cuts[1:]):
        panels = max(1, int(np.ceil((b0 - a0) / width)))
        r = composite_gauss_legendre(a0, b0, panels, 8 * refine)
        nodes.append(r.nodes)
        weights.append(r.weights)
    return np.concatenate(nodes), np.concatenate(weights)


def _gauged_factors(drift: DriftSpec, obs: ObservablePoint, x, contour, quad, refine):
    """A_j(x) e^{x^2/2t} and B_j(x) e^{-x^2/2t}; their product is the kernel."""
    t = obs.t
    nh = np.array(drift.nu_hat)
    A = np.exp(np.outer(nh, x) - t * nh[:, None] ** 2 / 2.0) / np.sqrt(2.0 * np.pi * t)
    u = x / t
    B = b_matrix(drift, 1.0 / t, u, contour, quad, log_gauge=u * u * t / 2.0, refine=refine)
    return A, B


def _gram_quadrature(drift, obs, quad, contour, refine):
    rule = _x_rule(drift, obs, quad, contour, refine)
    if rule is None:
        return np.zeros((drift.N, drift.N), dtype=complex)
    x, w = rule
    A, B = _gauged_factors(drift, obs, x, contour, quad, refine)
    return (B * w) @ A.T


def gram_matrix(drift: DriftSpec, obs: ObservablePoint, quad: QuadConfig | None = None,
                contour: str = "shifted", method: str = "line") -> GramMatrix:
    """G_jk = int_{-inf}^h B_j(x) A_k(x) dx for the factorised kernel.

    ``method="line"`` integrates x in closed form (production);
    ``method="quadrature"`` integrates pointwise kernel factors over x.
    """
    quad = quad or QuadConfig()
    if contour not in CONTOURS:
        raise ConfigError(f"contour must be one of {CONTOURS}")
    if method not in ("line", "quadrature"):
        raise ConfigError(f"unknown Gram method {method!r}")
    warnings = []
    if contour == "real":
        thr = obs.t * (max(drift.nu_hat) - 1.0 / drift.a)
        warnings.append(f"RealAxisContour(below x'={thr:.6g})")
    if obs.h < obs.t * min(drift.nu_hat) - quad.tail_sigmas * np.sqrt(obs.t):
        # every Gaussian factor A_k is below e^{-tail^2/2} on (-inf, h]
        return GramMatrix(np.zeros((drift.N, drift.N)), obs.h, contour, method, tuple(warnings))
    if method == "line":
        G1 = _gram_line(drift, obs, quad, 1)
        G2 = _gram_line(drift, obs, quad, quad.refine_factor)
    elif method == "quadrature":
        G1 = _gram_quadrature(drift, obs, quad, contour, 1)
        G2 = _gram_quadrature(drift, obs, quad, contour, quad.refine_factor)
    gap = np.max(np.abs(G2 - G1)) / max(1.0, np.max(np.abs(G2)))
    if gap > 1e-8:
        raise NonConvergent(f"Gram refinement gap {gap:.2e}")
    imag = np.max(np.abs(G2.imag))
    if imag > 1e-10 * max(1.0, np.max(np.abs(G2.real))):
        raise NonConvergent(f"Gram matrix imaginary residual {imag:.2e}")
    G = G2.real
    if contour == "real" and method == "line":
        G = G - _real_axis_correction(drift, obs)
    return GramMatrix(G, obs.h, contour, method, tuple(warnings), float(gap))


def fredholm_rank_det(drift: DriftSpec, obs: ObservablePoint, quad: QuadConfig | None = None,
                      contour: str = "shifted", method: str = "line") -> float:
    """det(I_N - G): the full Fredholm determinant of the rank-N kernel."""
    G = gram_matrix(drift, obs, quad, contour, method).entries
    return float(np.linalg.det(np.eye(drift.N) - G))


# ------------------------------------------------------------- direct series

def _elementary_from_matrix(M: np.ndarray, L: int) -> list[complex]:
    """e_0..e_L of the eigenvalues of M via Newton's identities on traces.

    For a Nystrom matrix M_pq = K(x_p, x_q) w_q, e_L equals the L-fold tensor
    quadrature of det[K(x_i, x_j)] / L!, term for term.
    """
    p = []
    P = np.eye(M.shape[0], dtype=M.dtype)
    for _ in range(L):
        P = P @ M
        p.append(np.trace(P))
    e = [1.0 + 0j]
    for k in range(1, L + 1):
        acc = 0j
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * p[i - 1]
        e.append(acc / k)
    return e


def _series_terms(drift, obs, quad, contour, refine, L):
    rule = _x_rule(drift, obs, quad, contour, refine)
    if rule is None:
        return [1.0] + [0.0] * L
    x, w = rule
    A, B = _gauged_factors(drift, obs, x, contour, quad, refine)
    K = A.T @ B  # K[p, q] = e^{(x_p^2 - x_q^2)/2t} calK(x_p, x_q)
    return _elementary_from_matrix(K * w[None, :], L)


def fredholm_series_direct(drift: DriftSpec, obs: ObservablePoint, quad: QuadConfig | None = None,
                           max_terms: int | None = None, contour: str = "shifted") -> float:
    """sum_{L=0}^{max_terms} (-1)^L / L! int_{(-inf,h)^L} det[calK(x_i, x_j)] dx."""
    quad = quad or QuadConfig()
    L = drift.N if max_terms is None else int(max_terms)
    if L > drift.N:
        raise ConfigError("max_terms cannot exceed N (higher terms vanish)")
    e1 = _series_terms(drift, obs, quad, contour, 1, L)
    e2 = _series_terms(drift, obs, quad, contour, quad.refine_factor, L)
    v1 = sum((-1) ** k * e1[k] for k in range(L + 1))
    v2 = sum((-1) ** k * e2[k] for k in range(L + 1))
    if abs(v2 - v1) > 1e-7 * max(1.0, abs(v2)):
        raise NonConvergent(f"series refinement gap {abs(v2 - v1):.2e}")
    if abs(np.imag(v2)) > 1e-10:
        raise NonConvergent(f"series imaginary residual {abs(np.imag(v2)):.2e}")
    return float(np.real(v2))


# ----------------------------------------------------------- contour route

@dataclass(frozen=True)
class ContourSpec:
    """Circle around the points -nu_j and a vertical s-line Re s = sline_re
    (v/s variables, drift nu = a * nu_hat)."""

    circle_center: float
    circle_radius: float
    sline_re: float
    sline_halfwidth: float
    points: int = 128
    s_panel_width: float = 0.05
    s_nodes: int = 16

    def validate(self, drift: DriftSpec):
        nu = drift.nu
        r, d = self.circle_radius, self.sline_re
        far = np.max(np.abs(-nu - self.circle_center))
        if not far < r:
            raise ContourViolation(f"circle radius {r} does not enclose all -nu_j (needs > {far})")
        if not 2 * r < 1:
            raise ContourViolation("circle too large: need |v - v'| < 1 on the contour")
        if not 0 < d < 1:
            raise ContourViolation(f"s-line abscissa {d} must lie in (0, 1)")
        if not d > 2 * np.max(np.abs(nu)):
            raise ContourViolation(f"s-line abscissa {d} must exceed 2 max|nu|")
        if not d > 2 * r:
            raise ContourViolation("s-line must stay right of v' - v for all circle points")


def default_contour(drift: DriftSpec, obs: ObservablePoint, quad: QuadConfig | None = None) -> ContourSpec:
    """Balance the four gaps: circle to enclosed poles, line to the
    denominator pole, line to s=1, line to 2 max|nu|."""
    quad = quad or QuadConfig()
    nu = drift.nu
    spread = float(np.max(nu) - np.min(nu))
    # the s-integrand grows like exp(t d (d + 2r) / 2a^2), so the contour
    # shrinks with a once a is small
    g = min((1.0 - spread) / 4.0, drift.a / 4.0)
    r = quad.circle_radius if quad.circle_radius is not None else spread / 2.0 + g
    d = max(2.0 * r + g, 2.0 * float(np.max(np.abs(nu))) + g)
    if d >= 1.0:
        d = 0.5 * (max(2.0 * r, 2.0 * float(np.max(np.abs(nu)))) + 1.0)
    gaps = [d - 2.0 * r, 1.0 - d, d - 2.0 * float(np.max(np.abs(nu)))]
    sigma = drift.a / np.sqrt(obs.t)
    growth = max(drift.N - 2, 0) * np.pi * drift.a ** 2 / (2.0 * obs.t)
    half = quad.sline_halfwidth_sigmas * sigma + r + growth
    freq = abs(obs.h) / drift.a + obs.t * (abs(np.mean(nu)) + r) / drift.a ** 2 + 1.0
    width = min(0.5 * min(gaps), 0.5 * sigma, 2.0 / freq)
    return ContourSpec(
        circle_center=float(-np.mean(nu)),
        circle_radius=float(r),
        sline_re=float(d),
        sline_halfwidth=float(half),
        points=quad.circle_points,
        s_panel_width=float(width),
    )


def _s_rule(contour: ContourSpec, refine: int = 1):
    W = contour.sline_halfwidth
    panels = 2 * int(np.ceil(W / contour.s_panel_width))
    return composite_gauss_legendre(-W, W, panels, contour.s_nodes * refine)


def _ku_factor(drift: DriftSpec, obs: ObservablePoint, v: np.ndarray, s: np.ndarray):
    """Everything in the s-integrand except 1/(v + s - v'), on a (v, s) grid."""
    a, t = drift.a, obs.t
    V, S = v[:, None], s[None, :]
    logs = log_gamma(-s) + log_gamma(1.0 + s)
    L = np.broadcast_to(logs[None, :], (len(v), len(s))).copy()
    for n in drift.nu:
        L += log_gamma(V + n) - log_gamma(S + V + n)
    L += S * (obs.h / a) + t * V * S / a ** 2 + t * S * S / (2.0 * a ** 2)
    return np.exp(L)


def bc_kernel_Ku(drift: DriftSpec, obs: ObservablePoint, v: complex, vprime: complex,
                 contour: ContourSpec | None = None, refine: int = 1) -> complex:
    """(1/2 pi i) int ds Gamma(-s)Gamma(1+s) prod Gamma(v+nu)/Gamma(s+v+nu)
    u^s e^{t v s/a^2 + t s^2/2a^2} / (v + s - v'),  u = e^{h/a}."""
    contour = contour or default_contour(drift, obs)
    contour.validate(drift)
    rule = _s_rule(contour, refine)
    s = contour.sline_re + 1j * rule.nodes
    F = _ku_factor(drift, obs, np.array([complex(v)]), s)[0]
    return complex(np.sum(F * rule.weights / (complex(v) + s - complex(vprime))) / (2.0 * np.pi))


def bc_kernel_matrix(drift: DriftSpec, obs: ObservablePoint, contour: ContourSpec, refine: int = 1):
    """Kernel on the circle nodes, already multiplied by dv/(2 pi i)."""
    contour.validate(drift)
    circ = circle_rule(contour.circle_center, contour.circle_radius, contour.points)
    v = circ.nodes
    rule = _s_rule(contour, refine)
    s = contour.sline_re + 1j * rule.nodes
    F = _ku_factor(drift, obs, v, s) * (rule.weights / (2.0 * np.pi))[None, :]
    K = np.empty((len(v), len(v)), dtype=complex)
    for i in range(len(v)):
        K[i] = np.sum(F[i][None, :] / (v[i] + s[None, :] - v[:, None]), axis=1)
    return K * (circ.weights / (2j * np.pi))[None, :]


@dataclass(frozen=True)
class BCResult:
    partial_sums: tuple[float, ...]
    term_magnitudes: tuple[float, ...]
    imag_parts: tuple[float, ...] = field(default=())

    @property
    def value(self) -> float:
        return self.partial_sums[-1]


def bc_fredholm_det(drift: DriftSpec, obs: ObservablePoint, contour: ContourSpec | None = None,
                    L_max: int = 3) -> BCResult:
    """Partial sums sum_{L<=L_max} (1/L!) oint...oint det[K_u(v_i, v_j)]."""
    if not 0 <= L_max <= 3:
        raise ConfigError("L_max must be between 0 and 3")
    contour = contour or default_contour(drift, obs)
    Kw = bc_kernel_matrix(drift, obs, contour)
    e = _elementary_from_matrix(Kw, L_max)
    sums, mags, imags = [], [], []
    acc = 0j
    for L in range(L_max + 1):
        acc += e[L]
        sums.append(float(acc.real))
        imags.append(float(acc.imag))
        mags.append(float(abs(e[L])))
    return BCResult(tuple(sums), tuple(mags), tuple(imags))


# ------------------------------------------------------------ proof chain

def khat_double_contour(drift: DriftSpec, obs: ObservablePoint, x: float, xprime: float,
                        quad: QuadConfig | None = None, refine: int = 1) -> complex:
    """The h-independent kernel as a w-circle times s-line double integral.

    Circle around the nu_hat_j of radius 1/(2a); line Re s = (2 max|nu_hat| + 1/a)/2.
    """
    quad = quad or QuadConfig()
    a, t = drift.a, obs.t
    nh = np.array(drift.nu_hat)
    center = float(np.mean(nh))
    radius = 0.5 / a
    if not (np.max(np.abs(nh - center)) < radius < 1.0 / a - np.max(np.abs(nh - center))):
        raise ContourViolation("w-circle cannot separate nu_hat from nu_hat + 1/a")
    dhat = 0.5 * (2.0 * np.max(np.abs(nh)) + 1.0 / a)
    circ = circle_rule(center, radius, quad.circle_points * refine)
    w = circ.nodes
    growth = max(drift.N - 2, 0) * np.pi * a / 2.0
    tmax = growth / t + radius + quad.tail_sigmas / np.sqrt(t)
    freq = abs(xprime) + t * (abs(center) + radius) + abs(x) + 1.0
    width = min(0.5 * min(dhat, 1.0 / a - dhat), 1.0 / np.sqrt(t), 2.0 / freq)
    rule = composite_gauss_legendre(-tmax, tmax, 2 * int(np.ceil(tmax / width)), 8 * refine)
    s = dhat + 1j * rule.nodes
    W, S = w[:, None], s[None, :]
    L = (log_gamma(-a * s) + log_gamma(1.0 + a * s))[None, :]
    for n in nh:
        L = L + log_gamma(a * (n - W)) - log_gamma(a * (S + n - W))
    L = L + (xprime - t * W) * S + t * S * S / 2.0 + W * (x - xprime)
    inner = np.exp(L) @ rule.weights / (2.0 * np.pi)  # ds/(2 pi i) = dtau/(2 pi)
    return complex(-a * np.sum(inner * circ.weights) / (2j * np.pi))


def check_prop1_chain(drift: DriftSpec, obs: ObservablePoint, x: float, xprime: float,
                      quad: QuadConfig | None = None, contour: str = "real") -> float:
    """Relative gap between the double-contour kernel and
    -(1/t) e^{(x^2 - x'^2)/2t} bK(1/t; x/t, x'/t)."""
    quad = quad or QuadConfig()
    t = obs.t
    k1 = khat_double_contour(drift, obs, x, xprime, quad)
    k2 = khat_double_contour(drift, obs, x, xprime, quad, refine=quad.refine_factor)
    if abs(k2 - k1) > 1e-9 * max(abs(k2), 1e-300):
        raise NonConvergent(f"double contour refinement gap {abs(k2 - k1):.2e}")
    bk = kernel_bK_grid(drift, 1.0 / t, [x / t], [xprime / t], quad, contour)[0, 0]
    rhs = -np.exp((x * x - xprime * xprime) / (2.0 * t)) * bk / t
    scale = max(abs(k2), abs(rhs), 1e-300)
    return float(abs(k2 - rhs) / scale)
