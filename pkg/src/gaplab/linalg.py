"""Dense complex linear algebra for states and density matrices.

Everything here is plain double-precision numpy on dense arrays. Density
matrices carry their spectral decomposition from the moment they are built,
with a deterministic eigenvector phase convention so that repeated runs
produce bit-identical spectra. All norm computations for general matrices go
through singular values, never through eigenvalues of a non-normal matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.linalg as npl

HERMITICITY_TOL = 1e-12
UNIT_NORM_TOL = 1e-12
TRACE_TOL = 1e-10
EIG_CLAMP = 1e-12  # eigenvalues in [-EIG_CLAMP, 0] are treated as exact zeros


@dataclass(frozen=True)
class HilbertDim:
    """Bipartite dimension bookkeeping: total dimension is d_a * d_b.

    A flat (non-bipartite) space uses d_b = 1.
    """

    d_a: int
    d_b: int = 1

    def __post_init__(self):
        if self.d_a < 1 or self.d_b < 1:
            raise ValueError(f"dimensions must be positive, got ({self.d_a}, {self.d_b})")

    @property
    def total(self) -> int:
        return self.d_a * self.d_b

    @classmethod
    def flat(cls, total: int) -> "HilbertDim":
        return cls(total, 1)


def _as_complex_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def _fix_eigenvector_phases(vectors: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Rotate each column so its first component of magnitude > tol is real positive.

    Makes the spectral decomposition reproducible across runs when eigenvalues
    are degenerate up to the phase freedom (not the full rotational freedom,
    which eigh itself resolves deterministically for fixed input bytes).
    """
    vectors = np.array(vectors)
    d = vectors.shape[1]
    for k in range(d):
        col = vectors[:, k]
        idx = np.argmax(np.abs(col) > tol)
        pivot = col[idx]
        if abs(pivot) > tol:
            vectors[:, k] = col * (abs(pivot) / pivot)
    return vectors


@dataclass(frozen=True)
class PureState:
    """Unit vector in a D-dimensional complex Hilbert space.

    ``ambient=True`` marks a vector of the ambient space (a Gaussian or
    adjusted-Gaussian draw) that is not required to sit on the sphere.
    """

    amplitudes: np.ndarray
    shape: HilbertDim
    ambient: bool = False

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != self.shape.total:
            raise ValueError(
                f"amplitude length {amps.size} does not match dimension {self.shape.total}"
            )
        if not self.ambient:
            norm = npl.norm(amps)
            if abs(norm - 1.0) > 1e-8:
                raise ValueError(f"state norm {norm} is not 1")
            amps = amps / norm
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.shape.total

    def norm(self) -> float:
        return float(npl.norm(self.amplitudes))

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    @classmethod
    def from_amplitudes(cls, amps, shape: HilbertDim | None = None) -> "PureState":
        amps = np.asarray(amps, dtype=np.complex128).reshape(-1)
        if shape is None:
            shape = HilbertDim.flat(amps.size)
        return cls(amps, shape)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian positive unit-trace operator with eager spectral data.

    ``eigenvalues`` are sorted descending; ``eigenvectors[:, k]`` belongs to
    ``eigenvalues[k]``. The reconstruction U diag(p) U* agrees with ``matrix``
    to TRACE_TOL by construction.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    shape: HilbertDim
    identity_basis: bool = field(init=False)

    def __post_init__(self):
        for arr in (self.matrix, self.eigenvalues, self.eigenvectors):
            arr.setflags(write=False)
        vecs = self.eigenvectors
        d = vecs.shape[0]
        # allocation-free identity test, cached because samplers ask per block
        is_id = bool(np.count_nonzero(vecs) == d and np.all(np.diagonal(vecs) == 1.0))
        object.__setattr__(self, "identity_basis", is_id)

    @property
    def dim(self) -> int:
        return self.shape.total

    @property
    def p_max(self) -> float:
        """Largest eigenvalue, equal to the operator norm of the matrix."""
        return float(self.eigenvalues[0])

    @property
    def purity(self) -> float:
        return float(np.sum(self.eigenvalues**2))

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues > 0.0))

    def has_identity_basis(self) -> bool:
        """True when the stored eigenbasis is exactly the computational basis."""
        return self.identity_basis

    @classmethod
    def from_matrix(cls, matrix, shape: HilbertDim | None = None) -> "DensityMatrix":
        """Validate and spectrally decompose a density matrix.

        Eigenvalues in [-EIG_CLAMP, 0] from rounding noise are clamped to 0;
        anything more negative is an error, as is a trace away from 1.
        """
        m = _as_complex_matrix(matrix)
        if shape is None:
            shape = HilbertDim.flat(m.shape[0])
        if shape.total != m.shape[0]:
            raise ValueError(f"shape {shape} inconsistent with matrix dimension {m.shape[0]}")
        herm_defect = operator_norm(m - m.conj().T)
        if herm_defect > 1e-10:
            raise ValueError(f"matrix is not Hermitian (defect {herm_defect:.3e})")
        m = (m + m.conj().T) / 2.0  # store the exactly Hermitian part
        tr = m.trace().real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {tr} is not 1")
        vals, vecs = npl.eigh(m)
        if vals[0] < -EIG_CLAMP:
            raise ValueError(f"matrix has negative eigenvalue {vals[0]:.3e}")
        vals = np.maximum(vals, 0.0)
        order = np.argsort(-vals, kind="stable")
        vals = np.ascontiguousarray(vals[order])
        vecs = _fix_eigenvector_phases(np.ascontiguousarray(vecs[:, order]))
        return cls(m, vals, vecs, shape)

    @classmethod
    def from_spectrum(
        cls, eigenvalues, shape: HilbertDim | None = None, basis: np.ndarray | None = None
    ) -> "DensityMatrix":
        """Build from eigenvalues and an optional eigenbasis (columns).

        With ``basis=None`` the computational basis is used and the matrix is
        diagonal; eigenvalues are sorted descending (stable), so callers that
        care about a distinguished eigenvector should pass it first with the
        largest weight.
        """
        p_orig = np.asarray(eigenvalues, dtype=np.float64).reshape(-1)
        if np.any(p_orig < -EIG_CLAMP):
            raise ValueError("negative eigenvalue in spectrum")
        p_orig = np.maximum(p_orig, 0.0)
        if abs(p_orig.sum() - 1.0) > TRACE_TOL:
            raise ValueError(f"spectrum sums to {p_orig.sum()}, not 1")
        d = p_orig.size
        if shape is None:
            shape = HilbertDim.flat(d)
        if shape.total != d:
            raise ValueError(f"shape {shape} inconsistent with spectrum length {d}")
        order = np.argsort(-p_orig, kind="stable")
        p = np.ascontiguousarray(p_orig[order])
        if basis is None:
            # eigenvector of p[k] is the computational basis vector order[k]
            identity = np.eye(d, dtype=np.complex128)
            vecs = identity if np.all(order == np.arange(d)) else identity[:, order]
            matrix = np.diag(p_orig.astype(np.complex128))
        else:
            vecs = _as_complex_matrix(basis)
            if operator_norm(vecs.conj().T @ vecs - np.eye(d)) > 1e-10:
                raise ValueError("basis is not unitary")
            vecs = vecs[:, order]
            matrix = (vecs * p) @ vecs.conj().T
            matrix = (matrix + matrix.conj().T) / 2.0
        return cls(matrix, p, np.ascontiguousarray(vecs), shape)

    @classmethod
    def uniform(cls, shape: HilbertDim | int) -> "DensityMatrix":
        if isinstance(shape, int):
            shape = HilbertDim.flat(shape)
        d = shape.total
        return cls.from_spectrum(np.full(d, 1.0 / d), shape)


@dataclass(frozen=True)
class Observable:
    """Bounded operator with its operator norm cached at construction."""

    matrix: np.ndarray
    op_norm: float = field(init=False)

    def __post_init__(self):
        m = _as_complex_matrix(self.matrix)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "op_norm", operator_norm(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return operator_norm(self.matrix - self.matrix.conj().T) <= tol


# ---------------------------------------------------------------------------
# norms and functionals
# ---------------------------------------------------------------------------


def trace_norm(m) -> float:
    """Sum of singular values of a square complex matrix."""
    return float(np.sum(npl.svd(_as_complex_matrix(m), compute_uv=False)))


def operator_norm(m) -> float:
    """Largest singular value of a square complex matrix."""
    m = _as_complex_matrix(m)
    if not np.any(m):
        return 0.0
    return float(npl.svd(m, compute_uv=False)[0])


def hs_norm(m) -> float:
    """Hilbert-Schmidt (Frobenius) norm sqrt(tr M*M)."""
    return float(npl.norm(_as_complex_matrix(m)))


def trace_norm_hermitian_batch(mats: np.ndarray) -> np.ndarray:
    """Trace norms of a stack (..., d, d) of Hermitian matrices via eigvalsh."""
    vals = npl.eigvalsh(mats)
    return np.sum(np.abs(vals), axis=-1)


def purity(rho: DensityMatrix) -> float:
    """tr rho^2, computed from the stored spectrum."""
    return rho.purity


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-sum p ln p with 0 ln 0 = 0 (natural log)."""
    p = rho.eigenvalues[rho.eigenvalues > 0.0]
    return float(-np.sum(p * np.log(p)))


def entropy_from_eigenvalues(vals: np.ndarray) -> np.ndarray:
    """Batched -sum p ln p over the last axis, clamping rounding noise at 0."""
    p = np.maximum(vals, 0.0)
    terms = np.where(p > 0.0, -p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return np.sum(terms, axis=-1)


# ---------------------------------------------------------------------------
# partial trace
# ---------------------------------------------------------------------------


def _amplitudes_of(state_or_dm) -> np.ndarray | None:
    if isinstance(state_or_dm, PureState):
        return np.asarray(state_or_dm.amplitudes)
    return None


def partial_trace_b(state_or_dm, shape: HilbertDim | None = None) -> DensityMatrix:
    """Reduced operator on the first factor: tr_b of a state projector or matrix.

    Accepts a PureState, a DensityMatrix, or a raw square matrix plus an
    explicit bipartite shape. The result is a d_a x d_a DensityMatrix whenever
    the input has unit trace.
    """
    if isinstance(state_or_dm, (PureState, DensityMatrix)) and shape is None:
        shape = state_or_dm.shape
    if shape is None:
        raise ValueError("bipartite shape is required for a raw array input")
    d_a, d_b = shape.d_a, shape.d_b
    amps = _amplitudes_of(state_or_dm)
    if amps is not None:
        if amps.size != shape.total:
            raise ValueError(f"state dimension {amps.size} does not match shape {shape}")
        m = amps.reshape(d_a, d_b)
        red = m @ m.conj().T
    else:
        mat = state_or_dm.matrix if isinstance(state_or_dm, DensityMatrix) else _as_complex_matrix(state_or_dm)
        if mat.shape[0] != shape.total:
            raise ValueError(f"matrix dimension {mat.shape[0]} does not match shape {shape}")
        red = np.einsum("ijkj->ik", mat.reshape(d_a, d_b, d_a, d_b))
    red = (red + red.conj().T) / 2.0
    return DensityMatrix.from_matrix(red, HilbertDim.flat(d_a))


def reduced_states_batch(amps: np.ndarray, d_a: int, d_b: int) -> np.ndarray:
    """Reduced matrices tr_b |psi><psi| for a batch of unit vectors (n, d_a*d_b)."""
    m = amps.reshape(-1, d_a, d_b)
    return np.einsum("nij,nkj->nik", m, m.conj())


def partial_trace_matrix(mat: np.ndarray, d_a: int, d_b: int) -> np.ndarray:
    """tr_b of a raw (d_a d_b) x (d_a d_b) matrix, returned as a raw array."""
    return np.einsum("ijkj->ik", np.asarray(mat).reshape(d_a, d_b, d_a, d_b))


# ---------------------------------------------------------------------------
# random matrices
# ---------------------------------------------------------------------------


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed d x d unitary (QR of a Ginibre matrix, phases fixed)."""
    if d < 1:
        raise ValueError("dimension must be positive")
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = npl.qr(z)
    diag = np.diagonal(r)
    q = q * (diag / np.abs(diag))
    return q


def gue_hamiltonian(d: int, rng: np.random.Generator) -> np.ndarray:
    """GUE matrix scaled so the spectrum fills roughly [-2, 2] for any d."""
    if d < 1:
        raise ValueError("dimension must be positive")
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (a + a.conj().T) / 2.0  # entry variance 1; rescale to 1/d
    return h / np.sqrt(d)


# ---------------------------------------------------------------------------
# unitary evolution
# ---------------------------------------------------------------------------


def _require_hermitian(h: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    h = _as_complex_matrix(h)
    if operator_norm(h - h.conj().T) > tol:
        raise ValueError("Hamiltonian is not Hermitian")
    return h


def evolve(state_or_dm, hamiltonian, t: float):
    """Evolve a state or density matrix for time t under a Hermitian H.

    Uses the spectral decomposition of H, so repeated calls with the same H
    should precompute it via ``spectral_propagator``. Norm and trace are
    preserved to rounding accuracy.
    """
    if isinstance(hamiltonian, Observable):
        hamiltonian = hamiltonian.matrix
    h = _require_hermitian(hamiltonian)
    energies, modes = npl.eigh(h)
    phases = np.exp(-1j * energies * t)
    if isinstance(state_or_dm, PureState):
        amps = modes @ (phases * (modes.conj().T @ state_or_dm.amplitudes))
        return PureState(amps, state_or_dm.shape, ambient=state_or_dm.ambient)
    if isinstance(state_or_dm, DensityMatrix):
        u = (modes * phases) @ modes.conj().T
        m = u @ state_or_dm.matrix @ u.conj().T
        return DensityMatrix.from_matrix((m + m.conj().T) / 2.0, state_or_dm.shape)
    amps = np.asarray(state_or_dm, dtype=np.complex128)
    return modes @ (phases * (modes.conj().T @ amps))


def spectral_propagator(hamiltonian) -> tuple[np.ndarray, np.ndarray]:
    """Return (energies, modes) of a Hermitian H for repeated evolution."""
    if isinstance(hamiltonian, Observable):
        hamiltonian = hamiltonian.matrix
    h = _require_hermitian(hamiltonian)
    return npl.eigh(h)
