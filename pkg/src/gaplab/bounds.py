"""Log-space evaluators for every closed-form concentration bound.

Each bound is identified by a tag. Tail bounds evaluate to a log probability
plus a view clamped to [0, 1]; confidence-form bounds evaluate to a deviation
level for a given failure probability delta. All evaluation happens in log
space so that dimensions up to 1e32 stay exact to double-precision relative
error.

Constants are fixed once here and never re-derived:

    C_DEV   = 48 pi              (confidence-form exponential bound)
    C_TILDE = 1 / (2304 pi^2)    (observable and reduced-state tails)
    C_LEVY  = 1 / (288 pi^2)     (Lipschitz-function tails)
    C_UNIF  = 2 / (9 pi^3)       (uniform-measure Lipschitz tails)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

C_DEV = 48.0 * math.pi
C_TILDE = 1.0 / (2304.0 * math.pi**2)
C_LEVY = 1.0 / (288.0 * math.pi**2)
C_UNIF = 2.0 / (9.0 * math.pi**3)

LOG2 = math.log(2.0)


def _require(params: dict, *names: str) -> list[float]:
    missing = [n for n in names if n not in params]
    if missing:
        raise ValueError(f"missing bound parameters: {', '.join(missing)}")
    return [float(params[n]) for n in names]


def _check_positive(**kv):
    for name, value in kv.items():
        if not value > 0.0:
            raise ValueError(f"parameter {name} must be positive, got {value}")


def _check_nonneg(**kv):
    for name, value in kv.items():
        if value < 0.0:
            raise ValueError(f"parameter {name} must be nonnegative, got {value}")


# ---------------------------------------------------------------------------
# evaluators; each returns (kind, log_value) where kind is "tail" or
# "deviation" or "variance"
# ---------------------------------------------------------------------------


def _exp_eps(p):
    d_a, eps, p_max = _require(p, "d_a", "eps", "p_max")
    _check_positive(d_a=d_a, p_max=p_max)
    _check_nonneg(eps=eps)
    return "tail", math.log(12.0) + 2.0 * math.log(d_a) - C_TILDE * eps**2 / (d_a**2 * p_max)


def _poly_eps(p):
    d_a, eps, purity = _require(p, "d_a", "eps", "purity")
    _check_positive(d_a=d_a, purity=purity)
    _check_nonneg(eps=eps)
    if eps == 0.0:
        return "tail", math.inf
    return "tail", math.log(28.0) + 5.0 * math.log(d_a) + math.log(purity) - 2.0 * math.log(eps)


def _levy_gap(p):
    eps, eta, p_max = _require(p, "eps", "eta", "p_max")
    _check_positive(eta=eta, p_max=p_max)
    _check_nonneg(eps=eps)
    return "tail", math.log(6.0) - C_LEVY * eps**2 / (eta**2 * p_max)


def _levy_obs(p):
    eps, norm_b, p_max = _require(p, "eps", "norm_b", "p_max")
    _check_positive(norm_b=norm_b, p_max=p_max)
    _check_nonneg(eps=eps)
    return "tail", math.log(12.0) - C_TILDE * eps**2 / (norm_b**2 * p_max)


def _dyn_avg_obs(p):
    eps, norm_b, p_max = _require(p, "eps", "norm_b", "p_max")
    _check_positive(norm_b=norm_b, p_max=p_max)
    _check_nonneg(eps=eps)
    return "tail", math.log(9.0) - C_TILDE * eps**2 / (36.0 * norm_b**2 * p_max)


def _dyn_avg_reduced(p):
    d_a, eps, p_max = _require(p, "d_a", "eps", "p_max")
    _check_positive(d_a=d_a, p_max=p_max)
    _check_nonneg(eps=eps)
    return "tail", math.log(9.0) + 2.0 * math.log(d_a) - C_TILDE * eps**2 / (36.0 * d_a**2 * p_max)


def _gauss_conc(p):
    eps, eta, p_max = _require(p, "eps", "eta", "p_max")
    _check_positive(eta=eta, p_max=p_max)
    _check_nonneg(eps=eps)
    return "tail", LOG2 - 4.0 * eps**2 / (math.pi**2 * eta**2 * p_max)


def _ga_conc(p):
    eps, eta, p_max = _require(p, "eps", "eta", "p_max")
    _check_positive(eta=eta, p_max=p_max)
    _check_nonneg(eps=eps)
    return "tail", math.log(4.0) - 2.0 * eps**2 / (math.pi**2 * eta**2 * p_max)


def _ga_small_norm(p):
    r, p_max = _require(p, "r", "p_max")
    _check_positive(r=r, p_max=p_max)
    return "tail", 0.5 * LOG2 - (0.5 - r**2) / (2.0 * p_max)


def _unif_levy(p):
    d, eps, eta = _require(p, "d", "eps", "eta")
    _check_positive(d=d, eta=eta)
    _check_nonneg(eps=eps)
    return "tail", math.log(4.0) - C_UNIF * d * eps**2 / eta**2


def _exp_delta(p):
    d_a, delta, p_max = _require(p, "d_a", "delta", "p_max")
    _check_positive(d_a=d_a, delta=delta, p_max=p_max)
    log_arg = math.log(12.0) + 2.0 * math.log(d_a) - math.log(delta)
    if log_arg <= 0.0:  # the confidence statement is vacuous; any deviation works
        return "deviation", -math.inf
    return "deviation", math.log(C_DEV) + math.log(d_a) + 0.5 * (math.log(log_arg) + math.log(p_max))


def _poly_delta(p):
    d_a, delta, purity = _require(p, "d_a", "delta", "purity")
    _check_positive(d_a=d_a, delta=delta, purity=purity)
    return "deviation", 0.5 * (math.log(28.0) + 5.0 * math.log(d_a) + math.log(purity) - math.log(delta))


def _unif_poly_delta(p):
    d_a, delta, d_r = _require(p, "d_a", "delta", "d_r")
    _check_positive(d_a=d_a, delta=delta, d_r=d_r)
    return "deviation", 2.0 * math.log(d_a) - 0.5 * (math.log(delta) + math.log(d_r))


def _unif_exp_delta(p):
    delta, d_r = _require(p, "delta", "d_r")
    _check_positive(delta=delta, d_r=d_r)
    log_arg = math.log(4.0) - math.log(delta)
    if log_arg <= 0.0:
        return "deviation", -math.inf
    return "deviation", LOG2 + 0.5 * (math.log(18.0 * math.pi**3) - math.log(d_r) + math.log(log_arg))


def _var_bound(p):
    norm_a, purity, p_max = _require(p, "norm_a", "purity", "p_max")
    _check_positive(norm_a=norm_a, purity=purity, p_max=p_max)
    if p_max >= 0.25:
        raise ValueError(f"the variance bound needs p_max < 1/4, got {p_max}")
    lead = math.log(norm_a**2) + math.log(purity) - math.log1p(-p_max)
    corr = math.log1p((4.0 * math.sqrt(purity) + 2.0 * purity) / ((1.0 - 2.0 * p_max) * (1.0 - 3.0 * p_max)))
    return "variance", lead + corr


_EVALUATORS = {
    "exp_eps": _exp_eps,
    "poly_eps": _poly_eps,
    "levy_gap": _levy_gap,
    "levy_obs": _levy_obs,
    "dyn_avg_obs": _dyn_avg_obs,
    "dyn_avg_reduced": _dyn_avg_reduced,
    "gauss_conc": _gauss_conc,
    "ga_conc": _ga_conc,
    "ga_small_norm": _ga_small_norm,
    "unif_levy": _unif_levy,
    "exp_delta": _exp_delta,
    "poly_delta": _poly_delta,
    "unif_poly_delta": _unif_poly_delta,
    "unif_exp_delta": _unif_exp_delta,
    "var_bound": _var_bound,
}

BOUND_TAGS = tuple(sorted(_EVALUATORS))


@dataclass(frozen=True)
class BoundSpec:
    """A bound tag plus the parameters its formula needs."""

    tag: str
    params: dict

    def __post_init__(self):
        if self.tag not in _EVALUATORS:
            raise ValueError(f"unknown bound tag {self.tag!r}; known: {', '.join(BOUND_TAGS)}")


@dataclass(frozen=True)
class BoundValue:
    """Evaluated bound: raw log value plus the view experiments compare against.

    For tail bounds ``probability`` is exp(log_value) clamped to [0, 1]; for
    confidence-form bounds ``deviation`` is the allowed deviation level. The
    ``valid`` flag records applicability hypotheses that are stated but not
    enforced (currently only the uniform-measure exponential bound).
    """

    tag: str
    kind: str
    log_value: float
    valid: bool = True

    @property
    def probability(self) -> float:
        if self.kind != "tail":
            raise ValueError(f"{self.tag} is not a tail bound")
        if self.log_value >= 0.0:
            return 1.0
        return math.exp(self.log_value)

    @property
    def deviation(self) -> float:
        if self.kind != "deviation":
            raise ValueError(f"{self.tag} is not a confidence-form bound")
        return math.exp(self.log_value) if self.log_value > -math.inf else 0.0

    @property
    def value(self) -> float:
        return self.probability if self.kind == "tail" else math.exp(self.log_value)


def bound_value(spec: BoundSpec) -> BoundValue:
    """Evaluate a bound entirely in log space."""
    kind, log_value = _EVALUATORS[spec.tag](spec.params)
    valid = True
    if spec.tag == "unif_exp_delta" and "d_a" in spec.params:
        d_a = float(spec.params["d_a"])
        valid = float(spec.params["delta"]) < 4.0 * math.exp(-(d_a**2) / (18.0 * math.pi**3))
    return BoundValue(spec.tag, kind, float(log_value), valid)


def tail_log_and_clamped(tag: str, **params) -> tuple[float, float]:
    """Convenience for experiments: (log bound, clamped probability)."""
    bv = bound_value(BoundSpec(tag, params))
    return bv.log_value, bv.probability


# ---------------------------------------------------------------------------
# crossover of the polynomial and exponential reduced-state tails
# ---------------------------------------------------------------------------


def spectrum_family(name: str):
    """Spectral data (purity, p_max) as a function of total dimension D.

    * ``sqrt``: one eigenvalue 1/sqrt(D), the other D-1 equal.
    * ``uniform``: all eigenvalues 1/D.
    """
    if name == "sqrt":

        def f(d: float):
            s = 1.0 / math.sqrt(d)
            purity = 1.0 / d + (1.0 - s) ** 2 / (d - 1.0)
            return purity, s

        return f
    if name == "uniform":

        def f(d: float):
            return 1.0 / d, 1.0 / d

        return f
    raise ValueError(f"unknown spectrum family {name!r}")


@dataclass(frozen=True)
class CrossoverResult:
    found: bool
    d_low: float = math.nan
    d_high: float = math.nan


def crossover_gap(d: float, d_a: float, eps: float, family) -> float:
    """log(polynomial tail) - log(exponential tail) at total dimension d."""
    purity, p_max = family(d)
    _, log_poly = _poly_eps({"d_a": d_a, "eps": eps, "purity": purity})
    _, log_exp = _exp_eps({"d_a": d_a, "eps": eps, "p_max": p_max})
    return log_poly - log_exp


def crossover_solve(
    d_a: float,
    eps: float,
    family: str = "sqrt",
    log10_d_min: float = 2.0,
    log10_d_max: float = 40.0,
    scan_points: int = 2001,
) -> CrossoverResult:
    """Locate the dimension window where the polynomial tail is the smaller one.

    Scans log10 D for sign changes of the log-bound gap and refines each
    crossing by bisection in log space. Returns an empty result when the
    polynomial bound is never smaller on the scanned range.
    """
    fam = spectrum_family(family)
    grid = np.linspace(log10_d_min, log10_d_max, scan_points)
    gaps = np.array([crossover_gap(10.0**g, d_a, eps, fam) for g in grid])
    crossings = []
    for i in range(len(grid) - 1):
        if gaps[i] == 0.0:
            crossings.append(grid[i])
        elif gaps[i] * gaps[i + 1] < 0.0:
            lo, hi = grid[i], grid[i + 1]
            flo = gaps[i]
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                fmid = crossover_gap(10.0**mid, d_a, eps, fam)
                if fmid == 0.0:
                    lo = hi = mid
                    break
                if (fmid < 0.0) == (flo < 0.0):
                    lo, flo = mid, fmid
                else:
                    hi = mid
                if hi - lo < 1e-13:
                    break
            crossings.append(0.5 * (lo + hi))
    if len(crossings) < 2:
        return CrossoverResult(False)
    return CrossoverResult(True, 10.0 ** crossings[0], 10.0 ** crossings[-1])


def crossover_scan(
    d_a: float,
    eps: float,
    family: str = "sqrt",
    log10_d_min: float = 2.0,
    log10_d_max: float = 40.0,
    points: int = 191,
) -> list[tuple[float, float, float]]:
    """Coarse (log10 D, log poly, log exp) table for reporting and plots."""
    fam = spectrum_family(family)
    rows = []
    for g in np.linspace(log10_d_min, log10_d_max, points):
        d = 10.0**g
        purity, p_max = fam(d)
        _, log_poly = _poly_eps({"d_a": d_a, "eps": eps, "purity": purity})
        _, log_exp = _exp_eps({"d_a": d_a, "eps": eps, "p_max": p_max})
        rows.append((float(g), float(log_poly), float(log_exp)))
    return rows
