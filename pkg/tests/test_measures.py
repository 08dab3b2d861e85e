"""Sampler statistics, sphere densities, truncation, conditional wave functions.

Statistical assertions use fixed seeds and four standard errors unless the
quantity is exact. Oracles are computed independently of the code under test
(direct formula arithmetic, brute-force quadrature on dense grids, importance
reweighting of plain Gaussian draws).
"""

import numpy as np
import numpy.linalg as npl
import pytest
from scipy import stats as sps

from gaplab.linalg import DensityMatrix, HilbertDim, PureState, haar_unitary, partial_trace_b, trace_norm
from gaplab.measures import (
    conditional_components,
    conditional_wavefunction,
    delta_mixture_density_matrix,
    gap_density,
    gap_log_density,
    sample_delta_mixture,
    sample_ga,
    sample_gap,
    sample_gaussian,
    sample_uniform_sphere,
    sample_vmf,
    truncate_density,
)
from gaplab.rng import stream


def _mean_within(values, target, sigmas=4.0):
    values = np.asarray(values, dtype=float)
    se = values.std(ddof=1) / np.sqrt(values.size)
    assert abs(values.mean() - target) <= sigmas * se, (values.mean(), target, se)


def _two_sample_close(a, b, sigmas=4.0):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    se = np.hypot(a.std(ddof=1) / np.sqrt(a.size), b.std(ddof=1) / np.sqrt(b.size))
    assert abs(a.mean() - b.mean()) <= sigmas * se, (a.mean(), b.mean(), se)


def random_rho(d, rng, shape=None):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = a @ a.conj().T
    return DensityMatrix.from_matrix(m / m.trace().real, shape)


# ---------------------------------------------------------------------------
# Gaussian measure
# ---------------------------------------------------------------------------


def test_gaussian_mean_square_norm_is_one():
    rng = stream(100, 0)
    rho = random_rho(12, rng)
    z = sample_gaussian(rho, rng, size=100_000)
    _mean_within(np.sum(np.abs(z) ** 2, axis=1), 1.0)


def test_gaussian_fourth_moment_per_coordinate():
    rng = stream(101, 0)
    p = np.array([0.4, 0.25, 0.2, 0.1, 0.05])
    rho = DensityMatrix.from_spectrum(p)
    z = sample_gaussian(rho, rng, size=100_000)
    fourth = np.abs(z) ** 4
    for n in range(5):
        _mean_within(fourth[:, n], 2.0 * p[n] ** 2)


def test_gaussian_pure_state_support():
    rng = stream(102, 0)
    rho = DensityMatrix.from_spectrum([1.0, 0.0, 0.0])
    z = sample_gaussian(rho, rng, size=500)
    assert np.all(z[:, 1:] == 0.0)
    assert np.all(z[:, 0] != 0.0)


# ---------------------------------------------------------------------------
# adjusted Gaussian measure
# ---------------------------------------------------------------------------


def test_ga_mean_square_norm_and_importance_cross_check():
    rng = stream(103, 0)
    rho = random_rho(10, rng)
    ga = sample_ga(rho, rng, size=100_000)
    norms2 = np.sum(np.abs(ga) ** 2, axis=1)
    _mean_within(norms2, 1.0 + rho.purity)
    # the same expectation via importance-weighted plain Gaussian draws
    g = sample_gaussian(rho, rng, size=100_000)
    w = np.sum(np.abs(g) ** 2, axis=1)
    est = np.sum(w * w) / np.sum(w)
    se = np.std(w * (w - est), ddof=1) / (w.mean() * np.sqrt(w.size))
    assert abs(norms2.mean() - est) <= 4.0 * (se + norms2.std(ddof=1) / np.sqrt(norms2.size))


def test_ga_small_norm_frequencies_below_closed_form_tail():
    rng = stream(104, 0)
    rho = DensityMatrix.uniform(64)
    ga = sample_ga(rho, rng, size=50_000)
    norms = npl.norm(ga, axis=1)
    for r in np.arange(1, 8) / 10.0:
        freq = np.mean(norms < r)
        bound = np.sqrt(2.0) * np.exp(-(0.5 - r * r) / (2.0 * rho.p_max))
        assert freq <= min(1.0, bound) + 4.0 * np.sqrt(freq * (1 - freq) / norms.size + 1e-12)


def test_ga_pure_state_radial_law_is_gamma():
    rng = stream(105, 0)
    rho = DensityMatrix.from_spectrum([1.0, 0.0])
    ga = sample_ga(rho, rng, size=20_000)
    assert np.all(ga[:, 1] == 0.0)
    radii2 = np.abs(ga[:, 0]) ** 2
    # size-biased exponential = Gamma(shape 2, scale 1)
    ks = sps.kstest(radii2, sps.gamma(a=2.0, scale=1.0).cdf)
    assert ks.pvalue > 0.01


def test_ga_matches_importance_weighting_on_bounded_functionals():
    rng = stream(106, 0)
    rho = random_rho(8, rng)
    n = 60_000
    ga = sample_ga(rho, rng, size=n)
    g = sample_gaussian(rho, rng, size=n)
    w = np.sum(np.abs(g) ** 2, axis=1)
    probes = sample_uniform_sphere(8, rng, size=10)
    for k in range(10):
        gvals_ga = np.exp(-np.abs(ga @ probes[k].conj()) ** 2)
        gvals_g = np.exp(-np.abs(g @ probes[k].conj()) ** 2)
        direct = gvals_ga.mean()
        weighted = np.sum(w * gvals_g) / np.sum(w)
        se_direct = gvals_ga.std(ddof=1) / np.sqrt(n)
        se_weighted = np.std(w * (gvals_g - weighted), ddof=1) / (w.mean() * np.sqrt(n))
        assert abs(direct - weighted) <= 4.0 * np.hypot(se_direct, se_weighted)


# ---------------------------------------------------------------------------
# projected measure on the sphere
# ---------------------------------------------------------------------------


def test_gap_samples_unit_norm():
    rng = stream(107, 0)
    rho = random_rho(9, rng)
    psi = sample_gap(rho, rng, size=2_000)
    assert np.abs(npl.norm(psi, axis=1) - 1.0).max() < 1e-12


def test_gap_empirical_density_matrix_converges():
    rng = stream(108, 0)
    rho = random_rho(16, rng)
    psi = sample_gap(rho, rng, size=100_000)
    emp = (psi.conj().T @ psi).T / psi.shape[0]
    assert trace_norm(emp - rho.matrix) < 0.05


def test_gap_of_projection_rho_is_uniform_on_subspace():
    rng = stream(129, 0)
    d, d_r, n = 12, 5, 50_000
    p = np.zeros(d)
    p[:d_r] = 1.0 / d_r
    rho = DensityMatrix.from_spectrum(p)
    psi = sample_gap(rho, rng, size=n)
    assert np.all(psi[:, d_r:] == 0.0)  # zero weights give exactly zero coordinates
    sq = np.abs(psi[:, :d_r]) ** 2
    for k in range(d_r):
        _mean_within(sq[:, k], 1.0 / d_r)
    _mean_within(sq[:, 0] * sq[:, 1], 1.0 / (d_r * (d_r + 1)))
    _mean_within(sq[:, 2] ** 2, 2.0 / (d_r * (d_r + 1)))


def test_gap_of_maximally_mixed_matches_uniform_moments():
    rng = stream(109, 0)
    d, n = 8, 100_000
    gap = sample_gap(DensityMatrix.uniform(d), rng, size=n)
    uni = sample_uniform_sphere(d, rng, size=n)
    for k in (0, 3, 7):
        _two_sample_close(np.abs(gap[:, k]) ** 2, np.abs(uni[:, k]) ** 2)
        _two_sample_close(np.abs(gap[:, k]) ** 4, np.abs(uni[:, k]) ** 4)
    _two_sample_close(np.abs(gap[:, 0] * gap[:, 1]) ** 2, np.abs(uni[:, 0] * uni[:, 1]) ** 2)


def test_gap_equivariance_under_unitaries():
    rng = stream(110, 0)
    d, n = 6, 40_000
    rho = random_rho(d, rng)
    u = haar_unitary(d, rng)
    rotated = DensityMatrix.from_matrix(u @ rho.matrix @ u.conj().T)
    psi = sample_gap(rho, rng, size=n)
    phi = sample_gap(rotated, rng, size=n)
    rotated_rows = psi @ u.T  # row-vector form of U psi
    for _ in range(5):
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        b = (a + a.conj().T) / 2.0
        f_pushforward = np.sum(rotated_rows.conj() * (rotated_rows @ b.T), axis=1).real
        f_direct = np.sum(phi.conj() * (phi @ b.T), axis=1).real
        _two_sample_close(f_pushforward, f_direct)


def test_uniform_sphere_moments_and_d1():
    rng = stream(111, 0)
    d, n = 8, 100_000
    u = sample_uniform_sphere(d, rng, size=n)
    sq = np.abs(u) ** 2
    for k in range(d):
        _mean_within(sq[:, k], 1.0 / d)
    _mean_within(sq[:, 0] * sq[:, 1], 1.0 / (d * (d + 1)))
    _mean_within(sq[:, 2] ** 2, 2.0 / (d * (d + 1)))
    single = sample_uniform_sphere(1, rng, size=200)
    assert np.abs(np.abs(single[:, 0]) - 1.0).max() < 1e-12


# ---------------------------------------------------------------------------
# density of the projected measure
# ---------------------------------------------------------------------------


def test_gap_density_uniform_rho_is_one():
    rng = stream(112, 0)
    d = 5
    rho = DensityMatrix.uniform(d)
    psi = sample_uniform_sphere(d, rng, size=50)
    assert np.abs(gap_density(psi, rho) - 1.0).max() < 1e-10


def test_gap_density_two_level_example():
    rho = DensityMatrix.from_spectrum([0.75, 0.25])
    psi = PureState(np.array([1.0, 0.0], dtype=complex), HilbertDim.flat(2))
    # direct arithmetic: (D / det) <psi|rho^-1|psi>^{-D-1} = (2/(3/16)) (4/3)^{-3}
    expected = (2.0 / (0.75 * 0.25)) * (4.0 / 3.0) ** (-3)
    assert expected == pytest.approx(4.5)
    assert gap_density(psi, rho) == pytest.approx(expected, rel=1e-12)


def test_gap_density_integrates_to_one():
    rng = stream(113, 0)
    rho = DensityMatrix.from_spectrum([0.75, 0.25])
    psi = sample_uniform_sphere(2, rng, size=1_000_000)
    vals = gap_density(psi, rho)
    assert abs(vals.mean() - 1.0) < 0.01


def test_gap_density_phase_invariant_and_rejects_singular():
    rng = stream(114, 0)
    rho = random_rho(4, rng)
    psi = sample_uniform_sphere(4, rng)
    a = gap_log_density(psi.amplitudes, rho)
    b = gap_log_density(np.exp(1j * 0.83) * psi.amplitudes, rho)
    assert abs(a - b) < 1e-10
    singular = DensityMatrix.from_spectrum([0.5, 0.5, 0.0])
    with pytest.raises(ValueError):
        gap_density(psi.amplitudes[:3] / npl.norm(psi.amplitudes[:3]), singular)


def test_gap_density_agrees_with_sampler_histogram():
    # chi^2 of |c_0|^2 under the projected measure against analytic bin masses
    rng = stream(115, 0)
    p1, p2 = 0.75, 0.25
    rho = DensityMatrix.from_spectrum([p1, p2])
    n = 200_000
    psi = sample_gap(rho, rng, size=n)
    x = np.abs(psi[:, 0]) ** 2
    edges = np.linspace(0.0, 1.0, 21)
    counts, _ = np.histogram(x, bins=edges)
    c, m = 1.0 / p2, 1.0 / p1 - 1.0 / p2  # <psi|rho^-1|psi> = c + m x
    cell = ((c + m * edges[:-1]) ** -2 - (c + m * edges[1:]) ** -2) / (p1 * p2 * m)
    assert cell.sum() == pytest.approx(1.0, abs=1e-12)
    chi2 = np.sum((counts - n * cell) ** 2 / (n * cell))
    assert sps.chi2.sf(chi2, df=len(counts) - 1) > 0.01


# ---------------------------------------------------------------------------
# truncation
# ---------------------------------------------------------------------------


def test_truncate_density_examples():
    rho = DensityMatrix.from_spectrum([0.5, 0.3, 0.2])
    t2 = truncate_density(rho, 2)
    assert np.allclose(sorted(t2.eigenvalues, reverse=True), [0.5, 0.5, 0.0], atol=1e-15)
    assert t2.matrix.trace().real == pytest.approx(1.0, abs=0.0)
    t3 = truncate_density(rho, 3)
    assert np.allclose(t3.matrix, rho.matrix, atol=1e-15)
    with pytest.raises(ValueError):
        truncate_density(rho, 0)


def test_truncate_density_trace_distance_monotone():
    rng = stream(116, 0)
    rho = random_rho(12, rng)
    dists = [trace_norm(truncate_density(rho, n).matrix - rho.matrix) for n in range(1, 13)]
    assert all(a >= b - 1e-12 for a, b in zip(dists, dists[1:]))
    assert dists[-1] < 1e-12
    # direct formula: 2 * tail mass beyond n
    for n in (2, 5, 9):
        assert dists[n - 1] == pytest.approx(2.0 * rho.eigenvalues[n:].sum(), abs=1e-10)


# ---------------------------------------------------------------------------
# delta mixture
# ---------------------------------------------------------------------------


def test_delta_mixture_atom_frequencies_match_weights():
    rng = stream(117, 0)
    p = np.array([0.5, 0.3, 0.15, 0.05])
    rho = DensityMatrix.from_spectrum(p)
    _, idx = sample_delta_mixture(rho, rng, size=100_000, return_indices=True)
    freq = np.bincount(idx, minlength=4) / idx.size
    se = np.sqrt(p * (1 - p) / idx.size)
    assert np.all(np.abs(freq - p) <= 4.0 * se)


def test_delta_mixture_product_basis_reduced_is_pure():
    shape = HilbertDim(2, 3)
    rng = stream(118, 0)
    rho = DensityMatrix.uniform(shape)
    draws = sample_delta_mixture(rho, rng, size=50)
    for row in draws:
        red = partial_trace_b(PureState(row, shape))
        assert red.eigenvalues[0] == pytest.approx(1.0, abs=1e-12)


def test_delta_mixture_single_atom_deterministic():
    rng = stream(119, 0)
    rho = DensityMatrix.from_spectrum([1.0, 0.0])
    draws = sample_delta_mixture(rho, rng, size=20)
    assert np.allclose(np.abs(draws @ np.array([1.0, 0.0])), 1.0)


def test_delta_mixture_rotated_density_matrix():
    rng = stream(120, 0)
    rho = DensityMatrix.from_spectrum([0.6, 0.4])
    u = haar_unitary(2, rng)
    rotated = delta_mixture_density_matrix(rho, basis=u)
    expected = (u * rho.eigenvalues) @ u.conj().T
    assert np.allclose(rotated.matrix, expected, atol=1e-12)


# ---------------------------------------------------------------------------
# von Mises-Fisher
# ---------------------------------------------------------------------------


def test_vmf_unit_norm_and_kappa_zero_uniform():
    rng = stream(121, 0)
    d, n = 16, 50_000
    mu = np.zeros(d)
    mu[0] = 1.0
    x = sample_vmf(mu, 0.0, rng, size=n)
    assert np.abs(npl.norm(x, axis=1) - 1.0).max() < 1e-12
    for k in (0, 5, 15):
        _mean_within(x[:, k] ** 2, 1.0 / d)


def test_vmf_mean_resultant_matches_independent_quadrature():
    rng = stream(122, 0)
    d, kappa, n = 32, 5.0, 100_000
    mu = np.zeros(d)
    mu[0] = 1.0
    x = sample_vmf(mu, kappa, rng, size=n)
    # independent oracle: dense-grid integration of t e^{kappa t} (1-t^2)^{(d-3)/2}
    t = np.linspace(-1.0, 1.0, 400_001)
    w = np.exp(kappa * t - kappa) * (1.0 - t * t) ** ((d - 3) / 2.0)
    oracle = np.trapezoid(t * w, t) / np.trapezoid(w, t)
    _mean_within(x[:, 0], oracle)


def test_vmf_rejects_bad_inputs():
    rng = stream(123, 0)
    with pytest.raises(ValueError):
        sample_vmf(np.array([1.0, 1.0]), 1.0, rng)
    with pytest.raises(ValueError):
        sample_vmf(np.array([1.0, 0.0]), -1.0, rng)


# ---------------------------------------------------------------------------
# conditional wave functions
# ---------------------------------------------------------------------------


def test_conditional_product_state_factorizes():
    rng = stream(124, 0)
    phi = sample_uniform_sphere(3, rng).amplitudes
    chi = sample_uniform_sphere(4, rng).amplitudes
    psi = PureState(np.kron(phi, chi), HilbertDim(3, 4))
    basis = haar_unitary(4, rng)
    comps, weights = conditional_components(psi, basis, psi.shape)
    for m in range(4):
        if weights[m] > 1e-12:
            vec = comps[m] / np.sqrt(weights[m])
            overlap = abs(np.vdot(vec, phi))
            assert overlap == pytest.approx(1.0, abs=1e-10)


def test_conditional_mean_projector_matches_reduced_state():
    rng = stream(125, 0)
    shape = HilbertDim(4, 64)
    psi = sample_uniform_sphere(shape.total, rng, shape=shape)
    basis = haar_unitary(64, rng)
    n = 100_000
    acc = np.zeros((4, 4), dtype=complex)
    for _ in range(n):
        cond = conditional_wavefunction(psi, basis, rng)
        acc += np.outer(cond.psi_a.amplitudes, cond.psi_a.amplitudes.conj())
    acc /= n
    ref = partial_trace_b(psi).matrix
    assert trace_norm(acc - ref) < 0.02


def test_conditional_with_random_bases_matches_gap_moments():
    rng = stream(126, 0)
    shape = HilbertDim(3, 48)
    psi = sample_uniform_sphere(shape.total, rng, shape=shape)
    rho_a = partial_trace_b(psi)
    probes = sample_uniform_sphere(3, rng, size=3)
    n = 4_000
    cond_vals = np.empty((n, 3))
    for i in range(n):
        basis = haar_unitary(48, rng)
        cond = conditional_wavefunction(psi, basis, rng)
        cond_vals[i] = np.abs(probes.conj() @ cond.psi_a.amplitudes) ** 2
    gap_draws = sample_gap(rho_a, rng, size=n)
    gap_vals = np.abs(gap_draws @ probes.conj().T) ** 2
    for k in range(3):
        _two_sample_close(cond_vals[:, k], gap_vals[:, k])
        _two_sample_close(cond_vals[:, k] ** 2, gap_vals[:, k] ** 2)


def test_conditional_born_weights_sum_to_one_and_errors():
    rng = stream(127, 0)
    shape = HilbertDim(2, 5)
    psi = sample_uniform_sphere(10, rng, shape=shape)
    cond = conditional_wavefunction(psi, haar_unitary(5, rng), rng)
    assert cond.born_weights.sum() == pytest.approx(1.0, abs=1e-10)
    assert 0 <= cond.basis_index < 5
    with pytest.raises(ValueError):
        conditional_wavefunction(
            PureState(np.zeros(10, dtype=complex), shape, ambient=True), haar_unitary(5, rng), rng
        )


# ---------------------------------------------------------------------------
# the mean reduced state equals the partial trace of the measure's density
# matrix, for every sphere measure (including reweighted ambient draws)
# ---------------------------------------------------------------------------


def test_mean_reduced_state_identity_across_samplers():
    rng = stream(128, 0)
    shape = HilbertDim(2, 32)
    rho = random_rho(64, rng, shape)
    n = 100_000

    def reduced_mean(states, weights=None):
        m = states.reshape(-1, 2, 32)
        if weights is None:
            return np.einsum("nij,nkj->ik", m, m.conj()) / states.shape[0]
        return np.einsum("n,nij,nkj->ik", weights, m, m.conj()) / weights.sum()

    u = haar_unitary(64, rng)
    cases = {
        "gap": (sample_gap(rho, rng, size=n), None, rho.matrix),
        "uniform": (sample_uniform_sphere(64, rng, size=n), None, np.eye(64) / 64),
        "delta_eigen": (sample_delta_mixture(rho, rng, size=n), None, rho.matrix),
        "delta_haar": (
            sample_delta_mixture(rho, rng, size=n, basis=u),
            None,
            delta_mixture_density_matrix(rho, u).matrix,
        ),
    }
    g = sample_gaussian(rho, rng, size=n)
    wts = np.sum(np.abs(g) ** 2, axis=1)
    cases["reweighted_gaussian"] = (g / npl.norm(g, axis=1)[:, None], wts, rho.matrix)
    for name, (draws, weights, rho_mu) in cases.items():
        ref = np.einsum("ijkj->ik", rho_mu.reshape(2, 32, 2, 32))
        got = reduced_mean(draws, weights)
        assert trace_norm(got - ref) < 0.02, name
