"""Samplers and density evaluators for measures on spheres of complex Hilbert spaces.

Implemented measures, all exact (no Markov chains, no approximate rejection):

* ``sample_gaussian``   mean-zero Gaussian with covariance rho (ambient space)
* ``sample_ga``         the norm-squared-adjusted Gaussian (ambient space)
* ``sample_gap``        the adjusted Gaussian projected to the unit sphere,
                        i.e. the most spread-out sphere measure with density
                        matrix rho
* ``sample_uniform_sphere``  normalized surface measure
* ``sample_delta_mixture``   the maximally concentrated measure with density
                        matrix rho: eigenvector n with probability p_n
* ``sample_vmf``        von Mises-Fisher on the real sphere (Ulrich-Wood)

plus the sphere density of the projected measure, the finite-rank truncation
of a density matrix, and conditional wave functions of bipartite states.

Samplers take an explicit ``rng`` and an optional ``size``; with ``size=None``
a single draw is returned as a vector (or PureState where documented), with
``size=n`` a (n, D) array of row vectors. Batched draws consume the stream in
a fixed order, so a given generator state always yields the same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.linalg as npl

from .linalg import DensityMatrix, HilbertDim, PureState

NORM_FLAG_TOL = 1e-12


def _complex_normal(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """(n, d) standard complex normals, E|z|^2 = 1, fixed draw order."""
    block = rng.standard_normal((n, 2 * d))
    return (block[:, :d] + 1j * block[:, d:]) / np.sqrt(2.0)


def _rotate_rows(samples: np.ndarray, rho: DensityMatrix) -> np.ndarray:
    """Map eigenbasis coordinates to the computational basis (psi = U z)."""
    if rho.has_identity_basis():
        return samples
    return samples @ rho.eigenvectors.T


def _squeeze(samples: np.ndarray, size) -> np.ndarray:
    return samples[0] if size is None else samples


# ---------------------------------------------------------------------------
# Gaussian family
# ---------------------------------------------------------------------------


def sample_gaussian(rho: DensityMatrix, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Ambient-space draw(s) with independent eigenbasis coordinates, E|Z_n|^2 = p_n."""
    n = 1 if size is None else int(size)
    z = _complex_normal(rng, n, rho.dim) * np.sqrt(rho.eigenvalues)
    return _squeeze(_rotate_rows(z, rho), size)


def _ga_eigenbasis(rho: DensityMatrix, rng: np.random.Generator, n: int) -> np.ndarray:
    """Adjusted-Gaussian draws in the eigenbasis via the size-biased mixture.

    The density ||psi||^2 against the Gaussian splits as sum_n p_n times the
    measure in which coordinate n is size-biased: |Z_n|^2 gets a Gamma(2, p_n)
    radial law with uniform phase while every other coordinate stays plain
    Gaussian. Exact and rejection-free, O(D) per draw.
    """
    d = rho.dim
    p = rho.eigenvalues
    z = _complex_normal(rng, n, d) * np.sqrt(p)
    idx = rng.choice(d, size=n, p=p)
    radii2 = rng.gamma(2.0, p[idx])
    phases = rng.uniform(0.0, 2.0 * np.pi, n)
    z[np.arange(n), idx] = np.sqrt(radii2) * np.exp(1j * phases)
    return z


def sample_ga(rho: DensityMatrix, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Ambient-space draw(s) from the norm-squared-adjusted Gaussian."""
    n = 1 if size is None else int(size)
    z = _ga_eigenbasis(rho, rng, n)
    return _squeeze(_rotate_rows(z, rho), size)


def sample_gap(rho: DensityMatrix, rng: np.random.Generator, size: int | None = None):
    """Unit-sphere draw(s) with density matrix exactly rho.

    Returns a PureState for ``size=None`` and a (size, D) array otherwise.
    """
    n = 1 if size is None else int(size)
    z = _ga_eigenbasis(rho, rng, n)
    z /= npl.norm(z, axis=1)[:, None]
    z = _rotate_rows(z, rho)
    if size is None:
        return PureState(z[0], rho.shape)
    return z


def sample_uniform_sphere(d: int, rng: np.random.Generator, size: int | None = None, shape: HilbertDim | None = None):
    """Uniform draw(s) on the unit sphere of C^d."""
    if d < 1:
        raise ValueError("dimension must be positive")
    n = 1 if size is None else int(size)
    z = _complex_normal(rng, n, d)
    z /= npl.norm(z, axis=1)[:, None]
    if size is None:
        return PureState(z[0], shape or HilbertDim.flat(d))
    return z


# ---------------------------------------------------------------------------
# sphere density of the projected measure
# ---------------------------------------------------------------------------


def gap_log_density(psi, rho: DensityMatrix):
    """Log density of the projected measure against the uniform distribution.

    Requires full rank; the formula is log D - sum_n log p_n
    - (D+1) log <psi|rho^-1|psi>. Invariant under global phases of psi.
    Accepts a single vector, a PureState, or a (n, D) batch.
    """
    if np.any(rho.eigenvalues <= 0.0):
        raise ValueError("density requires all eigenvalues of rho to be positive")
    amps = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=np.complex128)
    single = amps.ndim == 1
    coords = np.atleast_2d(amps)
    if not rho.has_identity_basis():
        coords = coords @ rho.eigenvectors.conj()
    quad = np.sum(np.abs(coords) ** 2 / rho.eigenvalues, axis=1)
    d = rho.dim
    out = np.log(d) - np.sum(np.log(rho.eigenvalues)) - (d + 1) * np.log(quad)
    return float(out[0]) if single else out


def gap_density(psi, rho: DensityMatrix):
    """Density of the projected measure against the uniform distribution."""
    return np.exp(gap_log_density(psi, rho))


# ---------------------------------------------------------------------------
# truncation to finite rank
# ---------------------------------------------------------------------------


def truncate_density(rho: DensityMatrix, n: int) -> DensityMatrix:
    """Rank <= n approximation keeping the top n-1 weights and lumping the tail.

    Eigenvalues p_1..p_{n-1} stay put and the remaining mass sits on
    eigenvector n, so the trace stays exactly 1 and the trace distance to rho
    is 2 sum_{m>n} p_m.
    """
    d = rho.dim
    if not 1 <= n <= d:
        raise ValueError(f"truncation rank {n} outside [1, {d}]")
    if n == d:
        return rho
    p = rho.eigenvalues
    newp = np.zeros(d)
    newp[: n - 1] = p[: n - 1]
    newp[n - 1] = 1.0 - p[: n - 1].sum()
    basis = None if rho.has_identity_basis() else rho.eigenvectors
    return DensityMatrix.from_spectrum(newp, rho.shape, basis=basis)


# ---------------------------------------------------------------------------
# delta mixture (the most concentrated measure with density matrix rho)
# ---------------------------------------------------------------------------


def sample_delta_mixture(
    rho: DensityMatrix,
    rng: np.random.Generator,
    size: int | None = None,
    basis: np.ndarray | None = None,
    return_indices: bool = False,
):
    """Atom |n> of the given basis (default: rho's eigenbasis) with probability p_n.

    With ``basis`` a unitary whose columns replace the eigenvectors, the
    sampled measure has density matrix basis diag(p) basis*.
    """
    n = 1 if size is None else int(size)
    atoms = rho.eigenvectors if basis is None else np.asarray(basis, dtype=np.complex128)
    idx = rng.choice(rho.dim, size=n, p=rho.eigenvalues)
    out = atoms.T[idx]
    if size is None:
        state = PureState(out[0], rho.shape)
        return (state, int(idx[0])) if return_indices else state
    return (out, idx) if return_indices else out


def delta_mixture_density_matrix(rho: DensityMatrix, basis: np.ndarray | None = None) -> DensityMatrix:
    """Density matrix of the delta mixture: rho itself, or its rotation by the basis."""
    if basis is None:
        return rho
    return DensityMatrix.from_spectrum(rho.eigenvalues, rho.shape, basis=np.asarray(basis, dtype=np.complex128))


# ---------------------------------------------------------------------------
# von Mises-Fisher on the real sphere
# ---------------------------------------------------------------------------


def _vmf_radial(kappa: float, d: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draws of t = <mu, x> by rejection against a Beta envelope (Ulrich-Wood)."""
    m = d - 1
    b = m / (np.sqrt(4.0 * kappa**2 + m**2) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m * np.log(1.0 - x0**2)
    out = np.empty(n)
    filled = 0
    while filled < n:
        todo = n - filled
        z = rng.beta(m / 2.0, m / 2.0, size=todo)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=todo)
        ok = kappa * w + m * np.log(1.0 - x0 * w) - c >= np.log(u)
        k = int(np.count_nonzero(ok))
        out[filled : filled + k] = w[ok]
        filled += k
    return out


def sample_vmf(mu, kappa: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Exact draw(s) from density proportional to exp(kappa <mu, x>) on S^{D-1}.

    ``mu`` must be a real unit vector; ``kappa=0`` reduces to the uniform
    distribution. Samples have unit norm up to one defensive renormalization.
    """
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    d = mu.size
    if d < 2:
        raise ValueError("von Mises-Fisher needs dimension >= 2")
    if abs(npl.norm(mu) - 1.0) > 1e-10:
        raise ValueError("mean direction must be a unit vector")
    if kappa < 0:
        raise ValueError("concentration must be nonnegative")
    n = 1 if size is None else int(size)
    if kappa == 0.0:
        x = rng.standard_normal((n, d))
        x /= npl.norm(x, axis=1)[:, None]
        return _squeeze(x, size)
    t = _vmf_radial(kappa, d, rng, n)
    # tangent direction: uniform on the sphere orthogonal to mu
    v = rng.standard_normal((n, d))
    v -= np.outer(v @ mu, mu)
    v /= npl.norm(v, axis=1)[:, None]
    x = t[:, None] * mu + np.sqrt(np.maximum(1.0 - t**2, 0.0))[:, None] * v
    x /= npl.norm(x, axis=1)[:, None]
    return _squeeze(x, size)


def vmf_mean_resultant(kappa: float, d: int) -> float:
    """E <mu, x> by quadrature of the 1-d marginal t e^{kappa t} (1-t^2)^{(d-3)/2}."""
    from scipy import integrate

    if kappa == 0.0:
        return 0.0

    def weight(t):
        return np.exp(kappa * t + 0.5 * (d - 3) * np.log1p(-t * t) - kappa)

    num, _ = integrate.quad(lambda t: t * weight(t), -1.0, 1.0, limit=200)
    den, _ = integrate.quad(weight, -1.0, 1.0, limit=200)
    return num / den


# ---------------------------------------------------------------------------
# conditional wave functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalSample:
    """One conditional wave function draw: outcome index, state on the first
    factor, and the full vector of selection probabilities."""

    basis_index: int
    psi_a: PureState
    born_weights: np.ndarray

    def __post_init__(self):
        self.born_weights.setflags(write=False)


def conditional_components(psi, basis: np.ndarray, shape: HilbertDim) -> tuple[np.ndarray, np.ndarray]:
    """All partial inner products of a bipartite state with a basis of the
    second factor.

    Returns (components, weights) where components[m] is the unnormalized
    vector <m|psi> on the first factor and weights[m] its squared norm. The
    weights sum to 1 for a unit input.
    """
    amps = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=np.complex128)
    b = np.asarray(basis, dtype=np.complex128)
    if b.shape != (shape.d_b, shape.d_b):
        raise ValueError(f"basis shape {b.shape} does not match d_b={shape.d_b}")
    m = amps.reshape(shape.d_a, shape.d_b)
    comps = (m @ b.conj()).T  # row m: b<m|psi> on the first factor
    weights = np.sum(np.abs(comps) ** 2, axis=1)
    return comps, weights


def conditional_wavefunction(psi, basis: np.ndarray, rng: np.random.Generator, shape: HilbertDim | None = None) -> ConditionalSample:
    """Draw an outcome with the selection probabilities and normalize.

    Raises if every weight is numerically zero, which signals an invalid
    input state.
    """
    if shape is None:
        if not isinstance(psi, PureState):
            raise ValueError("bipartite shape is required for a raw array input")
        shape = psi.shape
    comps, weights = conditional_components(psi, basis, shape)
    total = weights.sum()
    if total <= 1e-300:
        raise ValueError("all selection weights vanish; input state is invalid")
    probs = weights / total
    m = int(rng.choice(shape.d_b, p=probs))
    vec = comps[m] / np.sqrt(weights[m])
    return ConditionalSample(m, PureState(vec, HilbertDim.flat(shape.d_a)), probs)


# ---------------------------------------------------------------------------
# tagged measure descriptions
# ---------------------------------------------------------------------------

MEASURE_KINDS = ("gaussian", "gaussian_adjusted", "gap", "uniform_sphere", "delta_mixture", "vmf")


@dataclass(frozen=True)
class MeasureSpec:
    """Tagged description of a measure on the sphere or ambient space.

    The first five kinds take a density matrix; the von Mises-Fisher kind
    lives on the real sphere and takes a mean direction and concentration.
    """

    kind: str
    rho: DensityMatrix | None = None
    basis: np.ndarray | None = None  # delta_mixture only; None = eigenbasis of rho
    mu: np.ndarray | None = None
    kappa: float | None = None

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "vmf":
            if self.mu is None or self.kappa is None:
                raise ValueError("vmf needs a mean direction and concentration")
            if self.kappa < 0:
                raise ValueError("concentration must be nonnegative")
        elif self.rho is None:
            raise ValueError(f"{self.kind} needs a density matrix")
        if self.basis is not None and self.kind != "delta_mixture":
            raise ValueError("an atom basis only makes sense for delta_mixture")

    @property
    def on_sphere(self) -> bool:
        return self.kind not in ("gaussian", "gaussian_adjusted")

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if self.kind == "gaussian":
            return sample_gaussian(self.rho, rng, size)
        if self.kind == "gaussian_adjusted":
            return sample_ga(self.rho, rng, size)
        if self.kind == "gap":
            return sample_gap(self.rho, rng, size)
        if self.kind == "uniform_sphere":
            return sample_uniform_sphere(self.rho.dim, rng, size, shape=self.rho.shape)
        if self.kind == "delta_mixture":
            return sample_delta_mixture(self.rho, rng, size, basis=self.basis)
        return sample_vmf(self.mu, self.kappa, rng, size)

    def density_matrix(self) -> DensityMatrix:
        """Density matrix of the measure (covariance, for the mean-zero ones)."""
        if self.kind == "vmf":
            raise ValueError("the von Mises-Fisher measure lives on a real sphere")
        if self.kind == "uniform_sphere":
            return DensityMatrix.uniform(self.rho.shape)
        if self.kind == "delta_mixture":
            return delta_mixture_density_matrix(self.rho, self.basis)
        return self.rho
