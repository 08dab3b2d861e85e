"""Fourth-moment kernel quadrature and the variance bound."""

import numpy as np
import pytest

from gaplab.linalg import DensityMatrix, Observable
from gaplab.measures import sample_gap
from gaplab.moments import KmlKernel, QuadratureError, gap_fourth_moment, kml, kml_upper_bound, variance_bound
from gaplab.rng import stream


def dirichlet_spectrum(d, rng):
    p = rng.dirichlet(np.ones(d))
    return np.sort(p)[::-1].copy()


# ---------------------------------------------------------------------------
# kernel integral
# ---------------------------------------------------------------------------


def test_kml_uniform_closed_form():
    # for a flat spectrum the integrand is (1 + x/D)^(-D-2), integral D/(D+1)
    for d in (2, 4, 64, 512):
        p = np.full(d, 1.0 / d)
        value = kml(p, 0, min(1, d - 1))
        assert abs(value - d / (d + 1)) <= 1e-9 * (d / (d + 1))


def test_kml_two_level_partial_fraction_oracle():
    # off-diagonal: (a+b)/(a-b)^2 - 2ab ln(a/b)/(a-b)^3
    for a in (0.6, 0.75, 0.9):
        b = 1.0 - a
        expected = (a + b) / (a - b) ** 2 - 2 * a * b * np.log(a / b) / (a - b) ** 3
        assert kml([a, b], 0, 1) == pytest.approx(expected, rel=1e-10)
    # diagonal: b^2 ln(a/b)/(a-b)^3 - b/(a-b)^2 + 1/(2(a-b))
    a, b = 0.75, 0.25
    expected = b**2 * np.log(a / b) / (a - b) ** 3 - b / (a - b) ** 2 + 1.0 / (2.0 * (a - b))
    assert kml([a, b], 0, 0) == pytest.approx(expected, rel=1e-10)


def test_kml_symmetric_and_bounded_on_random_spectra():
    rng = stream(200, 0)
    for _ in range(100):
        d = int(rng.integers(2, 24))
        p = dirichlet_spectrum(d, rng)
        m, l = rng.integers(0, d, size=2)
        value = kml(p, int(m), int(l))
        assert value == pytest.approx(kml(p, int(l), int(m)), rel=1e-9)
        assert value <= kml_upper_bound(p) * (1.0 + 1e-9)


def test_kml_scaling_identity():
    # substituting x -> x/s shows the integral scales as 1/s when all
    # eigenvalues are scaled by s; check through a normalized equivalent
    p = np.array([0.5, 0.3, 0.2])
    base = kml(p, 0, 1)
    assert base <= 1.0 / (1.0 - 0.5) + 1e-12
    assert base > 0


def test_kml_input_validation():
    with pytest.raises(ValueError):
        kml([0.5, 0.5], 0, 2)
    with pytest.raises(ValueError):
        kml([0.7, 0.2], 0, 1)  # does not sum to one
    with pytest.raises(ValueError):
        kml([1.0, 0.0], 0, 1)  # zero eigenvalue


def test_kml_kernel_cache_symmetric():
    rng = stream(201, 0)
    kernel = KmlKernel(dirichlet_spectrum(6, rng))
    assert kernel.value(1, 4) == kernel.value(4, 1)
    assert len(kernel._cache) == 1


# ---------------------------------------------------------------------------
# fourth moments
# ---------------------------------------------------------------------------


def test_fourth_moment_uniform_sixteen():
    rho = DensityMatrix.uniform(16)
    assert gap_fourth_moment(rho, 0, 1) == pytest.approx(1.0 / 272.0, rel=1e-9)
    assert gap_fourth_moment(rho, 3, 3) == pytest.approx(2.0 / 272.0, rel=1e-9)


def test_fourth_moment_consistent_with_uniform_sphere_formula():
    for d in (4, 16):
        rho = DensityMatrix.uniform(d)
        assert gap_fourth_moment(rho, 0, 1) == pytest.approx(1.0 / (d * (d + 1)), rel=1e-9)
        assert gap_fourth_moment(rho, 0, 0) == pytest.approx(2.0 / (d * (d + 1)), rel=1e-9)


def test_fourth_moment_diagonal_bound():
    rng = stream(202, 0)
    p = dirichlet_spectrum(8, rng)
    for m in range(8):
        moment = gap_fourth_moment(p, m, m)
        assert moment <= 2.0 * p[m] ** 2 / (1.0 - p[0]) + 1e-12


def test_fourth_moment_monte_carlo_cross_check():
    rng = stream(203, 0)
    p = np.array([0.35, 0.3, 0.2, 0.15])
    rho = DensityMatrix.from_spectrum(p)
    kernel = KmlKernel(p)
    n = 200_000
    psi = sample_gap(rho, rng, size=n)
    sq = np.abs(psi) ** 2
    for m, l in ((0, 1), (2, 3), (1, 1), (3, 3)):
        emp = sq[:, m] * sq[:, l]
        se = emp.std(ddof=1) / np.sqrt(n)
        assert abs(emp.mean() - kernel.fourth_moment(m, l)) <= 4.0 * se


# ---------------------------------------------------------------------------
# variance bound
# ---------------------------------------------------------------------------


def test_variance_bound_plug_in_arithmetic():
    rho = DensityMatrix.uniform(100)
    # direct arithmetic: (0.01/0.99) (1 + (4*0.1 + 2*0.01) / (0.98*0.97))
    expected = (0.01 / 0.99) * (1.0 + (0.4 + 0.02) / (0.98 * 0.97))
    assert variance_bound(rho, 1.0) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.0145639, abs=5e-7)


def test_variance_bound_hypothesis_violations():
    with pytest.raises(ValueError):
        variance_bound(DensityMatrix.from_spectrum([0.3, 0.3, 0.2, 0.2]), 1.0)
    with pytest.raises(ValueError):
        variance_bound(DensityMatrix.uniform(3), 1.0)


def test_variance_bound_accepts_observable_and_matrix():
    rng = stream(204, 0)
    rho = DensityMatrix.uniform(8)
    a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    obs = Observable(a)
    assert variance_bound(rho, obs) == pytest.approx(variance_bound(rho, a), rel=1e-12)
    assert variance_bound(rho, obs) == pytest.approx(variance_bound(rho, obs.op_norm), rel=1e-12)


def test_variance_bound_dominates_uniform_measure_exact_variance():
    # for a flat spectrum the sphere variance of <psi|A|psi> is known exactly:
    # tr(A*A)/(D(D+1)) - |tr(A rho)|^2/(D+1)
    rng = stream(205, 0)
    d = 16
    rho = DensityMatrix.uniform(d)
    for _ in range(25):
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        exact = (np.trace(a.conj().T @ a).real / (d * (d + 1))
                 - abs(np.trace(a).real / d + 1j * np.trace(a).imag / d) ** 2 / (d + 1))
        assert variance_bound(rho, a) >= exact - 1e-12


def test_variance_bound_monte_carlo_small_scale():
    rng = stream(206, 0)
    d, n = 16, 50_000
    rho = DensityMatrix.uniform(d)
    for _ in range(3):
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        a /= np.linalg.norm(a, 2)
        psi = sample_gap(rho, rng, size=n)
        vals = np.sum(psi.conj() * (psi @ a.T), axis=1)
        mean = vals.mean()
        assert abs(mean.real - np.trace(a @ rho.matrix).real) <= 4.0 * vals.real.std(ddof=1) / np.sqrt(n)
        assert abs(mean.imag - np.trace(a @ rho.matrix).imag) <= 4.0 * vals.imag.std(ddof=1) / np.sqrt(n)
        var = np.mean(np.abs(vals - mean) ** 2)
        centered2 = np.abs(vals - mean) ** 2
        se_var = centered2.std(ddof=1) / np.sqrt(n)
        assert var - 3.0 * se_var <= variance_bound(rho, 1.0)


def test_quadrature_error_surfaced():
    # the kernel entry on the vanishing eigenvalue spreads over ~18 decades
    # of x and defeats the adaptive rule; this must be an explicit error
    with pytest.raises(QuadratureError):
        kml(np.array([1.0 - 1e-18, 1e-18]), 1, 1)
