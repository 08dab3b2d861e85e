"""Fourth moments of the projected measure and the variance bound.

The fourth moments E|c_m|^2 |c_l|^2 of sphere coordinates in the eigenbasis of
rho are p_m p_l (1 + delta_ml) K_ml, with K_ml a one-dimensional integral over
[0, inf) of a product of D+2 rational factors. The integrand decays like
x^-(D+2) and spans hundreds of orders of magnitude for large D, so it is
evaluated in log space after the compactifying substitution x = t/(1-t).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .linalg import DensityMatrix, Observable, operator_norm


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge for a pathological spectrum."""


def _as_spectrum(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if np.any(p <= 0.0):
        raise ValueError("all eigenvalues must be positive")
    if abs(p.sum() - 1.0) > 1e-8:
        raise ValueError(f"eigenvalues sum to {p.sum()}, not 1")
    return p


def kml(p, m: int, l: int, rel_tol: float = 1e-10) -> float:
    """The fourth-moment kernel integral for eigenvalue indices m and l.

    With x = t/(1-t) the domain becomes (0, 1); the product of the D+2
    factors is accumulated as a sum of log1p terms, which never underflows.
    Relative accuracy is better than 1e-9 on non-pathological spectra.
    """
    p = _as_spectrum(p)
    d = p.size
    if not (0 <= m < d and 0 <= l < d):
        raise ValueError(f"indices ({m}, {l}) out of range for length {d}")
    pm, pl = p[m], p[l]

    def integrand(t):
        if t >= 1.0:  # the transformed integrand vanishes like (1-t)^D
            return 0.0
        x = t / (1.0 - t)
        log_val = -(np.log1p(x * pm) + np.log1p(x * pl) + np.sum(np.log1p(x * p)))
        return np.exp(log_val) / (1.0 - t) ** 2

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=rel_tol, limit=400)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"kernel quadrature did not converge: {exc}") from exc
    # every kernel value sits in [1/(D+1), 1/(1-p_max)]; anything outside
    # means the adaptive rule missed part of the slowly decaying integrand
    lower = 1.0 / (d + 1.0)
    upper = 1.0 / (1.0 - float(np.max(p)))
    bad_error = abserr > 1e-6 * abs(value)
    if not np.isfinite(value) or bad_error or value < lower * (1.0 - 1e-6) or value > upper * (1.0 + 1e-6):
        raise QuadratureError(
            f"kernel quadrature did not converge (value={value}, abserr={abserr})"
        )
    return float(value)


def kml_upper_bound(p) -> float:
    """1 / (1 - p_max), an upper bound for every kernel entry."""
    p = _as_spectrum(p)
    return 1.0 / (1.0 - float(np.max(p)))


@dataclass
class KmlKernel:
    """Write-once cache of kernel entries for a fixed positive spectrum."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        self.eigenvalues = _as_spectrum(self.eigenvalues)
        self._cache: dict[tuple[int, int], float] = {}

    def value(self, m: int, l: int) -> float:
        key = (min(m, l), max(m, l))  # kernel is symmetric
        if key not in self._cache:
            self._cache[key] = kml(self.eigenvalues, *key)
        return self._cache[key]

    def fourth_moment(self, m: int, l: int) -> float:
        p = self.eigenvalues
        return float(p[m] * p[l] * (1.0 + (m == l)) * self.value(m, l))


def gap_fourth_moment(rho, m: int, l: int) -> float:
    """E|c_m|^2 |c_l|^2 in the eigenbasis: p_m p_l (1 + delta_ml) K_ml."""
    p = rho.eigenvalues if isinstance(rho, DensityMatrix) else rho
    return KmlKernel(np.asarray(p)).fourth_moment(m, l)


def variance_bound(rho: DensityMatrix, a) -> float:
    """Upper bound on Var <psi|A|psi> for sphere draws with density matrix rho.

    Valid for any bounded operator A when the largest eigenvalue of rho is
    below 1/4 (and the dimension is at least 4); both hypotheses are enforced.
    """
    if isinstance(a, Observable):
        norm_a = a.op_norm
    elif np.isscalar(a):
        norm_a = float(a)
    else:
        norm_a = operator_norm(np.asarray(a))
    p_max = rho.p_max
    if p_max >= 0.25:
        raise ValueError(f"largest eigenvalue {p_max} is not below 1/4")
    if rho.dim < 4:
        raise ValueError("the variance bound requires dimension >= 4")
    tr2 = rho.purity
    lead = norm_a**2 * tr2 / (1.0 - p_max)
    corr = 1.0 + (4.0 * np.sqrt(tr2) + 2.0 * tr2) / ((1.0 - 2.0 * p_max) * (1.0 - 3.0 * p_max))
    return float(lead * corr)
