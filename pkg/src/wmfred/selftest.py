"""Fast invariant suite behind ``wmfred selftest``.

Each check raises AssertionError with a message on failure; the runner stops
at the first failure and reports its name.
"""

from __future__ import annotations

import sys
import time

import numpy as np

from .numkit import RngStream

CHECKS = []


def check(fn):
    CHECKS.append(fn)
    return fn


def _close(x, y, tol, what):
    err = abs(x - y) / max(1.0, abs(y))
    assert err < tol, f"{what}: {x!r} vs {y!r} (gap {err:.3e} >= {tol:.1e})"


def _rng(k: int):
    return RngStream(12345, k).generator()


@check
def gamma_reflection():
    from .numkit import log_gamma

    g = _rng(1)
    z = g.uniform(-4, 4, 100) + 1j * g.uniform(-4, 4, 100)
    lhs = np.exp(log_gamma(z) + log_gamma(1 - z))
    rhs = np.pi / np.sin(np.pi * z)
    assert np.max(np.abs(lhs / rhs - 1)) < 1e-11, "Gamma(z)Gamma(1-z) != pi/sin(pi z)"


@check
def gamma_recurrence():
    from .numkit import log_gamma

    g = _rng(2)
    z = g.uniform(0.1, 6, 50) + 1j * g.uniform(-6, 6, 50)
    gap = np.abs(np.exp(log_gamma(z + 1) - log_gamma(z)) / z - 1)
    assert np.max(gap) < 1e-12, "Gamma(z+1) != z Gamma(z)"


@check
def bessel_half_order():
    from .numkit import bessel_k

    x = np.array([0.1, 1.0, 5.0])
    exact = np.sqrt(np.pi / (2 * x)) * np.exp(-x)
    assert np.max(np.abs(bessel_k(0.5, x).real / exact - 1)) < 1e-12, "K_{1/2} closed form"


@check
def circle_rule_winding():
    from .numkit import circle_rule

    r = circle_rule(0.3, 0.7, 64)
    val = r.integrate(1.0 / (r.nodes - 0.1)) / (2j * np.pi)
    _close(val.real, 1.0, 1e-13, "winding number")


@check
def rng_streams_reproducible():
    a = RngStream(7, 3).normals(5)
    b = RngStream(7, 3).normals(5)
    c = RngStream(7, 4).normals(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c), "RNG stream keying"


@check
def whittaker_n2_closed_vs_givental():
    from .whittaker import WhittakerIndex, whittaker_givental, whittaker_n2

    for nu, x in [((-0.4, 0.6), (0.0, 1.0)), ((0.3j, -0.3j), (-0.5, 0.7))]:
        q = whittaker_givental(WhittakerIndex(nu), x)
        c = complex(whittaker_n2(nu[0], nu[1], x[0], x[1]))
        assert abs(q - c) < 1e-8 * abs(c), f"Givental vs closed form at nu={nu}"


@check
def whittaker_recurrence():
    from .whittaker import check_recurrence

    g = _rng(3)
    for _ in range(5):
        nu = sorted(g.uniform(-2, 2, 2))
        if nu[1] - nu[0] < 0.2:
            nu[1] = nu[0] + 0.2
        assert check_recurrence(nu, g.uniform(-2, 2, 2)) < 1e-8, "index recurrence residual"


@check
def sklyanin_forms():
    from .whittaker import sklyanin_density, sklyanin_density_gamma

    g = _rng(4)
    for _ in range(20):
        mu = np.cumsum(g.uniform(0.1, 3, 2))
        _close(sklyanin_density(mu), sklyanin_density_gamma(mu), 1e-11, "Sklyanin forms")


@check
def kernel_reality_and_rank():
    from .kernel import DriftSpec, ObservablePoint, kernel_calK_grid

    d = DriftSpec((-0.5, 0.5), 0.5)
    pts = np.array([-0.7, 0.2, 1.1])
    K = kernel_calK_grid(d, ObservablePoint(1.0, 0.0), pts, pts)
    assert abs(np.linalg.det(K)) < 1e-8 * np.max(np.abs(K)) ** 3, "rank-2 kernel has nonzero 3x3 minor"


@check
def fredholm_routes_agree():
    from .fredholm import bc_fredholm_det, fredholm_rank_det
    from .kernel import DriftSpec, ObservablePoint

    d = DriftSpec((-0.5, 0.5), 0.5)
    o = ObservablePoint(1.0, 0.0)
    v = fredholm_rank_det(d, o)
    _close(bc_fredholm_det(d, o).value, v, 1e-8, "contour route vs Gram route")
    _close(fredholm_rank_det(d, o, method="quadrature"), v, 1e-8, "x-quadrature vs line route")


@check
def fredholm_monotone_in_h():
    from .fredholm import fredholm_rank_det
    from .kernel import DriftSpec, ObservablePoint

    d = DriftSpec((-0.5, 0.5), 0.5)
    vals = [fredholm_rank_det(d, ObservablePoint(1.0, h)) for h in np.linspace(-2, 2, 9)]
    assert all(-1e-6 <= v <= 1 + 1e-6 for v in vals), "value outside [0, 1]"
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:])), "not nonincreasing in h"


@check
def n1_three_routes():
    from .fredholm import fredholm_rank_det
    from .kernel import DriftSpec, ObservablePoint
    from .measure import direct_observable, gumbel_gaussian

    d = DriftSpec((0.3,), 0.5)
    for h in (-1.0, 0.0, 1.0):
        ref = gumbel_gaussian(0.3, 0.5, 1.0, h)
        _close(fredholm_rank_det(d, ObservablePoint(1.0, h)), ref, 1e-6, "N=1 Fredholm")
        _close(direct_observable(d, ObservablePoint(1.0, h)), ref, 1e-6, "N=1 direct")


@check
def cbm_trivial_weights():
    from .cbm import CbmSample, determinantal_weight
    from .kernel import DriftSpec, ObservablePoint

    d = DriftSpec((-0.5, 0.5), 0.5)
    s = CbmSample(np.array([2.0, 3.0]), np.array([0.1, -0.4]))
    assert determinantal_weight(s, d, ObservablePoint(1.0, 0.0)) == 1.0, "inactive sample weight"


@check
def ncbm_normalisation_and_gap():
    from .ncbm import gap_probability, gap_probability_det, ncbm_density, ordered_mass

    start = np.array([-0.5, 0.5])
    m = ordered_mass(lambda y: ncbm_density(1.0, y, start), 2, -13, 13, 1.0)
    _close(m, 1.0, 1e-6, "noncolliding density mass")
    _close(gap_probability(start, 1.0, 0.0), gap_probability_det(start, 1.0, 0.0), 1e-10, "gap routes")


@check
def gue_is_coincident_limit():
    from .ncbm import gue_density, ncbm_density

    y = np.array([-0.3, 0.8])
    e = 1e-4
    _close(ncbm_density(1.0, y, np.array([-e, e])), gue_density(1.0, y), 1e-4, "GUE limit")


@check
def moments_two_routes():
    from .kernel import DriftSpec
    from .measure import moment_first, moment_kappa, moment_second_residue

    d = DriftSpec((-0.5, 0.5), 0.5)
    m = moment_first(d, 1.0)
    assert m.rel_gap < 1e-10, "first moment residue vs contour"
    _close(moment_kappa(d, 1.0, 2) / moment_second_residue(d, 1.0), 1.0, 1e-8, "second moment")


@check
def combinatorial_identities():
    from .measure import identity_det_size2, identity_symmetrization

    g = _rng(5)
    for _ in range(20):
        v = g.normal(size=4) + 1j * g.normal(size=4)
        l, r = identity_det_size2(v[0], v[1])
        assert abs(l - r) < 1e-11 * max(1, abs(r)), "size-2 determinant identity"
        l, r = identity_symmetrization(v)
        assert abs(l - r) < 1e-11 * max(1, abs(r)), "symmetrisation identity"


def run_selftest(stream=None, stop_on_failure: bool = True, timing: bool = False) -> int:
    stream = stream or sys.stderr
    failed = 0
    for fn in CHECKS:
        t0 = time.perf_counter()
        try:
            fn()
        except AssertionError as exc:
            print(f"FAIL {fn.__name__}: {exc}", file=stream)
            failed += 1
            if stop_on_failure:
                return 3
            continue
        took = f" ({time.perf_counter() - t0:.2f}s)" if timing else ""
        print(f"ok   {fn.__name__}{took}", file=stream)
    return 3 if failed else 0
