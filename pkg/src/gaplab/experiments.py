"""Monte Carlo experiments comparing empirical tails against the closed-form bounds.

Every runner follows the same pattern: the sample index space is split into
fixed chunks of rng.CHUNK_SIZE, each chunk is bound to its own counter-based
stream, chunk results are reduced in chunk order, and the outcome is an
ExperimentRecord whose persisted content is bit-identical for any worker
count. Wall-clock time is kept out of the deterministic content.

Tail rows are long-format: one row per (statistic, grid point, bound tag).
``bound_is_theorem`` is 0 for curves attached as visual references only (the
von Mises-Fisher experiment at positive concentration); the soundness sweep
skips those rows.
"""

from __future__ import annotations

import math
import multiprocessing
import time
from dataclasses import dataclass, field

import numpy as np
import numpy.linalg as npl
from scipy import integrate

from . import bounds as bnd
from . import rng as rngmod
from .linalg import (
    DensityMatrix,
    HilbertDim,
    entropy_from_eigenvalues,
    gue_hamiltonian,
    haar_unitary,
    partial_trace_matrix,
    reduced_states_batch,
    spectral_propagator,
    trace_norm_hermitian_batch,
)
from .measures import (
    conditional_components,
    delta_mixture_density_matrix,
    sample_ga,
    sample_gap,
    sample_gaussian,
    sample_uniform_sphere,
    sample_vmf,
    vmf_mean_resultant,
)
from .stats import quantiles, wilson_interval

BLOCK_ELEMS = 1 << 21  # complex values per sampling block inside a chunk

TAIL_COLUMNS = [
    "statistic",
    "param_name",
    "param_value",
    "epsilon",
    "n_samples",
    "n_exceed",
    "p_hat",
    "wilson_low",
    "wilson_high",
    "bound_tag",
    "bound_log",
    "bound_clamped",
    "bound_is_theorem",
]

SCALING_COLUMNS = ["statistic", "x_name", "x_value", "n_samples", "mean", "q25", "q50", "q75", "q95", "max"]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class ExperimentRecord:
    """Self-describing result of one experiment run.

    ``rows`` and ``summary`` hold only JSON-serializable scalars and are the
    persisted, deterministic content. ``samples`` keeps raw per-sample arrays
    in memory for tests and is never written to disk. ``wall_clock`` is
    reported on stdout only.
    """

    experiment: str
    config: dict
    seed: int
    columns: list
    rows: list
    summary: dict
    checks: list
    n_samples: int
    wall_clock: float = 0.0
    samples: dict = field(default_factory=dict, repr=False)

    @property
    def all_checks_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def soundness_failures(record: ExperimentRecord, slack_halfwidths: float = 3.0) -> list:
    """Rows whose empirical tail minus the Wilson slack exceeds a theorem bound."""
    bad = []
    for row in record.rows:
        if row.get("bound_tag") and row.get("bound_is_theorem", 0):
            half = 0.5 * (row["wilson_high"] - row["wilson_low"])
            if row["p_hat"] - slack_halfwidths * half > row["bound_clamped"] + 1e-12:
                bad.append(
                    f"{row['statistic']} eps={row['epsilon']:.4g} p_hat={row['p_hat']:.4g} "
                    f"bound[{row['bound_tag']}]={row['bound_clamped']:.4g}"
                )
    return bad


def _soundness_check(record: ExperimentRecord) -> Check:
    bad = soundness_failures(record)
    detail = "; ".join(bad) if bad else "all tails within bounds (3 Wilson halfwidths slack)"
    return Check("soundness", not bad, detail)


# ---------------------------------------------------------------------------
# chunked parallel harness
# ---------------------------------------------------------------------------

_CHUNK_FUNCS: dict = {}
_WORKER_PAYLOAD = None  # broadcast once per pool; avoids pickling rho per chunk


def _chunk_func(name):
    def register(fn):
        _CHUNK_FUNCS[name] = fn
        return fn

    return register


def _set_worker_payload(payload):
    global _WORKER_PAYLOAD
    _WORKER_PAYLOAD = payload


def _run_one_chunk(args):
    fn_name, seed, namespace, chunk_index, chunk_size = args
    stream = rngmod.chunk_stream(seed, chunk_index, namespace)
    return _CHUNK_FUNCS[fn_name](_WORKER_PAYLOAD, stream, chunk_size)


def map_chunks(fn_name: str, payload, seed: int, n_total: int, workers: int, namespace: int = 0) -> list:
    """Apply a registered chunk function over the partitioned sample space.

    Results come back ordered by chunk index regardless of scheduling, so any
    chunk-ordered reduction is independent of the worker count. The payload
    (which can hold order-gigabyte operators) is shipped to workers once per
    pool: by fork inheritance where available, else by the pool initializer.
    """
    sizes = rngmod.chunk_sizes(n_total)
    tasks = [(fn_name, seed, namespace, i, s) for i, s in enumerate(sizes)]
    _set_worker_payload(payload)
    try:
        if workers <= 1 or len(tasks) <= 1:
            return [_run_one_chunk(t) for t in tasks]
        try:
            ctx = multiprocessing.get_context("fork")
            init, init_args = None, ()
        except ValueError:
            ctx = multiprocessing.get_context()
            init, init_args = _set_worker_payload, (payload,)
        with ctx.Pool(processes=workers, initializer=init, initargs=init_args) as pool:
            return pool.map(_run_one_chunk, tasks, chunksize=1)
    finally:
        _set_worker_payload(None)


def _blocks(n: int, dim: int) -> list:
    block = max(1, BLOCK_ELEMS // max(dim, 1))
    return rngmod.chunk_sizes(n, block)


def _sample_measure(kind: str, rho: DensityMatrix, stream, n: int) -> np.ndarray:
    if kind == "gap":
        return sample_gap(rho, stream, size=n)
    if kind == "uniform":
        return sample_uniform_sphere(rho.dim, stream, size=n)
    if kind == "gaussian":
        return sample_gaussian(rho, stream, size=n)
    if kind == "gaussian_adjusted":
        return sample_ga(rho, stream, size=n)
    raise ValueError(f"unknown sampling kind {kind!r}")


# ---------------------------------------------------------------------------
# chunk functions
# ---------------------------------------------------------------------------


@_chunk_func("reduced_devs")
def _chunk_reduced_devs(payload, stream, n):
    """Trace-norm deviation of the reduced state from its reference, and
    optionally the entropy gap, for n draws."""
    rho, d_a, d_b, ref, kind, want_entropy = (
        payload["rho"],
        payload["d_a"],
        payload["d_b"],
        payload["ref"],
        payload["measure"],
        payload.get("entropy", False),
    )
    ref_entropy = payload.get("ref_entropy", 0.0)
    devs = np.empty(n)
    egaps = np.empty(n) if want_entropy else None
    pos = 0
    for b in _blocks(n, rho.dim):
        psi = _sample_measure(kind, rho, stream, b)
        reduced = reduced_states_batch(psi, d_a, d_b)
        vals = npl.eigvalsh(reduced - ref)
        devs[pos : pos + b] = np.sum(np.abs(vals), axis=-1)
        if want_entropy:
            rvals = npl.eigvalsh(reduced)
            egaps[pos : pos + b] = np.abs(entropy_from_eigenvalues(rvals) - ref_entropy)
        pos += b
    return (devs, egaps) if want_entropy else (devs,)


@_chunk_func("observable_values")
def _chunk_observable_values(payload, stream, n):
    """Values of <psi|B|psi> (real for Hermitian B) for n draws."""
    rho, b_mat, kind = payload["rho"], payload["b"], payload["measure"]
    out = np.empty(n)
    pos = 0
    for blk in _blocks(n, rho.dim):
        psi = _sample_measure(kind, rho, stream, blk)
        out[pos : pos + blk] = np.sum(psi.conj() * (psi @ b_mat.T), axis=1).real
        pos += blk
    return (out,)


@_chunk_func("lipschitz_linear")
def _chunk_lipschitz_linear(payload, stream, n):
    """f(psi) = Re <phi, psi> and the norm of psi for ambient-space draws."""
    rho, phi, kind = payload["rho"], payload["phi"], payload["measure"]
    fvals = np.empty(n)
    norms = np.empty(n)
    pos = 0
    for blk in _blocks(n, rho.dim):
        psi = _sample_measure(kind, rho, stream, blk)
        fvals[pos : pos + blk] = (psi @ phi.conj()).real
        norms[pos : pos + blk] = npl.norm(psi, axis=1)
        pos += blk
    return (fvals, norms)


@_chunk_func("delta_indices")
def _chunk_delta_indices(payload, stream, n):
    p = payload["p"]
    return (stream.choice(p.size, size=n, p=p),)


@_chunk_func("vmf_first_coord")
def _chunk_vmf_first_coord(payload, stream, n):
    d, kappa = payload["d"], payload["kappa"]
    mu = np.zeros(d)
    mu[0] = 1.0
    x = sample_vmf(mu, kappa, stream, size=n)
    return (x[:, 0].copy(),)


@_chunk_func("theta_and_dev")
def _chunk_theta_and_dev(payload, stream, n):
    rho, d_a, d_b, ref = payload["rho"], payload["d_a"], payload["d_b"], payload["ref"]
    thetas = np.empty(n)
    devs = np.empty(n)
    pos = 0
    for b in _blocks(n, rho.dim):
        psi = sample_gap(rho, stream, size=b)
        overlap = np.clip(np.abs(psi[:, 0]), 0.0, 1.0)
        thetas[pos : pos + b] = np.arccos(overlap)
        reduced = reduced_states_batch(psi, d_a, d_b)
        vals = npl.eigvalsh(reduced - ref)
        devs[pos : pos + b] = np.sum(np.abs(vals), axis=-1)
        pos += b
    return (thetas, devs)


@_chunk_func("dynamical")
def _chunk_dynamical(payload, stream, n):
    """Instantaneous and trapezoid time-averaged deviations along the orbit."""
    rho = payload["rho"]
    modes = payload["modes"]  # columns = Hamiltonian eigenvectors
    energies = payload["energies"]
    b_eig = payload["b_eig"]  # observable in the Hamiltonian eigenbasis
    t_nodes = payload["t_nodes"]  # fine grid, 2*n_t + 1 uniform nodes
    ref_obs = payload["ref_obs"]
    ref_red = payload["ref_red"]  # (n_nodes, d_a, d_a) or None
    d_a, d_b = payload["d_a"], payload["d_b"]
    instant_index = payload["instant_index"]

    psi = sample_gap(rho, stream, size=n)
    phi = psi @ modes.conj()  # coordinates in the Hamiltonian eigenbasis
    n_nodes = t_nodes.size
    dev_obs = np.empty((n, n_nodes))
    dev_red = np.empty((n, n_nodes)) if ref_red is not None else None
    for j, t in enumerate(t_nodes):
        w = phi * np.exp(-1j * energies * t)
        vals = np.sum(w.conj() * (w @ b_eig.T), axis=1).real
        dev_obs[:, j] = np.abs(vals - ref_obs[j])
        if dev_red is not None:
            psi_t = w @ modes.T
            reduced = reduced_states_batch(psi_t, d_a, d_b)
            evals = npl.eigvalsh(reduced - ref_red[j])
            dev_red[:, j] = np.sum(np.abs(evals), axis=-1)

    def trapz_avg(dev):
        fine = np.trapezoid(dev, t_nodes, axis=1) / (t_nodes[-1] - t_nodes[0])
        coarse_nodes = t_nodes[::2]
        coarse = np.trapezoid(dev[:, ::2], coarse_nodes, axis=1) / (coarse_nodes[-1] - coarse_nodes[0])
        return fine, coarse

    avg_obs_fine, avg_obs_coarse = trapz_avg(dev_obs)
    out = [dev_obs[:, instant_index].copy(), avg_obs_fine, avg_obs_coarse]
    if dev_red is not None:
        avg_red_fine, avg_red_coarse = trapz_avg(dev_red)
        out += [avg_red_fine, avg_red_coarse]
    return tuple(out)


@_chunk_func("conditional_born")
def _chunk_conditional_born(payload, stream, n):
    """|Born(f_k) - reference_k| for n outer draws of (state, basis).

    The selection average is enumerated exactly over all d_b outcomes unless
    ``n_inner`` asks for a sampled estimate.
    """
    rho = payload["rho"]
    d_a, d_b = payload["d_a"], payload["d_b"]
    shape = HilbertDim(d_a, d_b)
    f_vectors = payload["f_vectors"]  # (n_f, d_a)
    refs = payload["refs"]  # (n_f,)
    n_inner = payload.get("n_inner")
    gaps = np.empty((n, refs.size))
    borns = np.empty((n, refs.size))
    for i in range(n):
        psi = sample_gap(rho, stream, size=1)[0]
        basis = haar_unitary(d_b, stream)
        comps, weights = conditional_components(psi, basis, shape)
        safe_w = np.where(weights > 0.0, weights, 1.0)
        normalized = comps / np.sqrt(safe_w)[:, None]
        fvals = np.abs(normalized @ f_vectors.conj().T) ** 2  # (d_b, n_f)
        if n_inner is None:
            born = weights @ fvals
        else:
            picks = stream.choice(d_b, size=n_inner, p=weights / weights.sum())
            born = fvals[picks].mean(axis=0)
        borns[i] = born
        gaps[i] = np.abs(born - refs)
    return (gaps, borns)


@_chunk_func("gap_projector_means")
def _chunk_gap_projector_means(payload, stream, n):
    """|<phi_k|chi>|^2 for draws chi with the given density matrix."""
    rho, f_vectors = payload["rho"], payload["f_vectors"]
    chi = sample_gap(rho, stream, size=n)
    return (np.abs(chi @ f_vectors.conj().T) ** 2,)


# ---------------------------------------------------------------------------
# row builders
# ---------------------------------------------------------------------------


def _tail_rows(statistic, devs, eps_grid, bound_list, param=("", None)):
    """Long-format tail rows; bound_list holds (tag, params, is_theorem).

    Without any bound the empirical tail still gets one row per grid point,
    with empty bound cells.
    """
    rows = []
    n = devs.size
    for eps in eps_grid:
        exceed = int(np.count_nonzero(devs > eps))
        p_hat, lo, hi = wilson_interval(exceed, n)
        for tag, params, is_theorem in bound_list or [("", None, False)]:
            log_value, clamped = bnd.tail_log_and_clamped(tag, eps=eps, **params) if tag else (None, None)
            rows.append(
                {
                    "statistic": statistic,
                    "param_name": param[0],
                    "param_value": param[1],
                    "epsilon": float(eps),
                    "n_samples": n,
                    "n_exceed": exceed,
                    "p_hat": p_hat,
                    "wilson_low": lo,
                    "wilson_high": hi,
                    "bound_tag": tag,
                    "bound_log": log_value,
                    "bound_clamped": clamped,
                    "bound_is_theorem": int(is_theorem),
                }
            )
    return rows


def _scaling_row(statistic, x_name, x_value, values):
    q = quantiles(values)
    return {
        "statistic": statistic,
        "x_name": x_name,
        "x_value": x_value,
        "n_samples": int(values.size),
        "mean": q["mean"],
        "q25": q["q25"],
        "q50": q["q50"],
        "q75": q["q75"],
        "q95": q["q95"],
        "max": q["max"],
    }


def _rho_summary(rho: DensityMatrix) -> dict:
    return {
        "dim": rho.dim,
        "p_max": rho.p_max,
        "purity": rho.purity,
        "rank": rho.rank,
    }


def geometric_grid(lo: float, hi: float, points: int) -> np.ndarray:
    if not (0 < lo < hi) or points < 2:
        raise ValueError("need 0 < lo < hi and at least two points")
    return np.geomspace(lo, hi, points)


DEFAULT_EPS_GRID = geometric_grid(0.01, 2.0, 16)


def central_level_spacing(energies: np.ndarray) -> float:
    """Mean gap between consecutive levels over the central half of a spectrum."""
    e = np.sort(np.asarray(energies, dtype=float))
    if e.size < 2:
        raise ValueError("need at least two energy levels")
    lo, hi = e.size // 4, max(e.size // 4 + 2, (3 * e.size) // 4)
    gaps = np.diff(e[lo:hi])
    spacing = float(gaps.mean()) if gaps.size else float(np.diff(e).mean())
    if spacing <= 0:
        raise ValueError("degenerate spectrum has no level spacing")
    return spacing


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_canonical_typicality(
    rho: DensityMatrix,
    shape: HilbertDim,
    eps_grid=None,
    n_samples: int = 10_000,
    seed: int = 0,
    workers: int = 1,
    measure: str = "gap",
) -> ExperimentRecord:
    """Tail of the reduced-state trace-norm deviation against both theorem bounds.

    Draws from the sphere measure with density matrix rho (or from the uniform
    distribution, which coincides with it when rho is maximally mixed) and
    compares P(deviation > eps) with the exponential and polynomial tails.
    """
    t0 = time.perf_counter()
    eps_grid = DEFAULT_EPS_GRID if eps_grid is None else np.asarray(eps_grid, dtype=float)
    if shape.total != rho.dim:
        raise ValueError(f"shape {shape} does not match rho dimension {rho.dim}")
    if measure not in ("gap", "uniform"):
        raise ValueError("canonical typicality samples the gap or uniform measure")
    rho_mu = DensityMatrix.uniform(shape) if measure == "uniform" else rho
    ref = partial_trace_matrix(rho_mu.matrix, shape.d_a, shape.d_b)
    payload = {"rho": rho, "d_a": shape.d_a, "d_b": shape.d_b, "ref": ref, "measure": measure}
    parts = map_chunks("reduced_devs", payload, seed, n_samples, workers)
    devs = np.concatenate([p[0] for p in parts])

    bound_list = [
        ("exp_eps", {"d_a": shape.d_a, "p_max": rho_mu.p_max}, True),
        ("poly_eps", {"d_a": shape.d_a, "purity": rho_mu.purity}, True),
    ]
    rows = _tail_rows("reduced_trace_dev", devs, eps_grid, bound_list)
    record = ExperimentRecord(
        experiment="canonical_typicality",
        config={
            "d_a": shape.d_a,
            "d_b": shape.d_b,
            "measure": measure,
            "n_samples": n_samples,
            "eps_grid": [float(e) for e in eps_grid],
            "rho": _rho_summary(rho),
        },
        seed=seed,
        columns=TAIL_COLUMNS,
        rows=rows,
        summary={"deviation": quantiles(devs)},
        checks=[],
        n_samples=n_samples,
        samples={"deviation": devs},
    )
    record.checks.append(_soundness_check(record))
    record.wall_clock = time.perf_counter() - t0
    return record


def run_entropy_typicality(
    rho: DensityMatrix,
    shape: HilbertDim,
    n_samples: int = 2_000,
    seed: int = 0,
    workers: int = 1,
) -> ExperimentRecord:
    """Quantiles of the gap between subsystem entropy and its reference value."""
    t0 = time.perf_counter()
    if shape.total != rho.dim:
        raise ValueError(f"shape {shape} does not match rho dimension {rho.dim}")
    ref = partial_trace_matrix(rho.matrix, shape.d_a, shape.d_b)
    ref_entropy = float(entropy_from_eigenvalues(npl.eigvalsh(ref)))
    payload = {
        "rho": rho,
        "d_a": shape.d_a,
        "d_b": shape.d_b,
        "ref": ref,
        "measure": "gap",
        "entropy": True,
        "ref_entropy": ref_entropy,
    }
    parts = map_chunks("reduced_devs", payload, seed, n_samples, workers)
    devs = np.concatenate([p[0] for p in parts])
    egaps = np.concatenate([p[1] for p in parts])
    rows = [
        _scaling_row("entropy_gap", "d_b", shape.d_b, egaps),
        _scaling_row("reduced_trace_dev", "d_b", shape.d_b, devs),
    ]
    record = ExperimentRecord(
        experiment="entropy_typicality",
        config={
            "d_a": shape.d_a,
            "d_b": shape.d_b,
            "n_samples": n_samples,
            "rho": _rho_summary(rho),
            "ref_entropy": ref_entropy,
        },
        seed=seed,
        columns=SCALING_COLUMNS,
        rows=rows,
        summary={"entropy_gap": quantiles(egaps), "ref_entropy": ref_entropy},
        checks=[],
        n_samples=n_samples,
        samples={"entropy_gap": egaps, "deviation": devs},
    )
    record.wall_clock = time.perf_counter() - t0
    return record


def run_canonical_scaling(
    d_a: int,
    d_b_grid,
    rho_factory,
    n_samples: int = 10_000,
    seed: int = 0,
    workers: int = 1,
    ratio_tolerance: float = 0.2,
) -> ExperimentRecord:
    """Median reduced-state deviation as the environment dimension grows.

    For maximally mixed rho the median scales like 1/sqrt(d_b); each
    quadrupling of d_b should halve it, and the record checks every
    consecutive ratio against 2 within ``ratio_tolerance``.
    """
    t0 = time.perf_counter()
    d_b_grid = [int(x) for x in d_b_grid]
    rows = []
    medians = []
    for k, d_b in enumerate(d_b_grid):
        shape = HilbertDim(d_a, d_b)
        rho = rho_factory(shape)
        ref = partial_trace_matrix(rho.matrix, d_a, d_b)
        payload = {"rho": rho, "d_a": d_a, "d_b": d_b, "ref": ref, "measure": "gap"}
        parts = map_chunks("reduced_devs", payload, seed, n_samples, workers, namespace=k)
        devs = np.concatenate([p[0] for p in parts])
        rows.append(_scaling_row("reduced_trace_dev", "d_b", d_b, devs))
        medians.append(float(np.median(devs)))
    checks = []
    for k in range(len(d_b_grid) - 1):
        factor = d_b_grid[k + 1] / d_b_grid[k]
        expected = math.sqrt(factor)
        ratio = medians[k] / medians[k + 1] if medians[k + 1] > 0 else math.inf
        ok = abs(ratio - expected) <= ratio_tolerance * expected
        checks.append(
            Check(
                f"median_scaling_{d_b_grid[k]}_to_{d_b_grid[k + 1]}",
                ok,
                f"median ratio {ratio:.4f}, expected {expected:.2f} within {ratio_tolerance:.0%}",
            )
        )
    record = ExperimentRecord(
        experiment="canonical_scaling",
        config={"d_a": d_a, "d_b_grid": d_b_grid, "n_samples": n_samples},
        seed=seed,
        columns=SCALING_COLUMNS,
        rows=rows,
        summary={"medians": medians},
        checks=checks,
        n_samples=n_samples * len(d_b_grid),
    )
    record.wall_clock = time.perf_counter() - t0
    return record


def run_levy_gap(
    rho: DensityMatrix,
    b_matrix: np.ndarray,
    eps_grid=None,
    n_samples: int = 20_000,
    seed: int = 0,
    workers: int = 1,
    measure: str = "gap",
    eta: float | None = None,
) -> ExperimentRecord:
    """Concentration of f(psi) = <psi|B|psi> around its measure average.

    The average is estimated from an independent half of the sample budget;
    tails use the other half. Hermitian B only (f must be real-valued); the
    Lipschitz constant defaults to 2 ||B||.
    """
    t0 = time.perf_counter()
    eps_grid = DEFAULT_EPS_GRID if eps_grid is None else np.asarray(eps_grid, dtype=float)
    b_matrix = np.asarray(b_matrix, dtype=np.complex128)
    if npl.norm(b_matrix - b_matrix.conj().T) > 1e-10:
        raise ValueError("observable must be Hermitian so that f is real")
    norm_b = float(npl.svd(b_matrix, compute_uv=False)[0]) if np.any(b_matrix) else 0.0
    eta = 2.0 * norm_b if eta is None else float(eta)
    n_ref = n_samples // 2
    n_tail = n_samples - n_ref
    payload = {"rho": rho, "b": b_matrix, "measure": measure}
    ref_parts = map_chunks("observable_values", payload, seed, n_ref, workers, namespace=0)
    tail_parts = map_chunks("observable_values", payload, seed, n_tail, workers, namespace=1)
    f_ref = np.concatenate([p[0] for p in ref_parts])
    f_tail = np.concatenate([p[0] for p in tail_parts])
    ref = float(f_ref.mean())
    devs = np.abs(f_tail - ref)

    bound_list = []
    if measure in ("gap", "uniform"):
        rho_mu = DensityMatrix.uniform(rho.shape) if measure == "uniform" else rho
        if eta > 0:
            bound_list.append(("levy_gap", {"eta": eta, "p_max": rho_mu.p_max}, True))
        if norm_b > 0:
            bound_list.append(("levy_obs", {"norm_b": norm_b, "p_max": rho_mu.p_max}, True))
        p = rho_mu.eigenvalues
        if eta > 0 and p[0] - p[-1] < 1e-12:  # maximally mixed: uniform-measure bound applies
            bound_list.append(("unif_levy", {"d": rho_mu.dim, "eta": eta}, True))
    rows = _tail_rows("observable_dev", devs, eps_grid, bound_list)
    record = ExperimentRecord(
        experiment="levy_gap",
        config={
            "measure": measure,
            "n_samples": n_samples,
            "eta": eta,
            "norm_b": norm_b,
            "eps_grid": [float(e) for e in eps_grid],
            "rho": _rho_summary(rho),
        },
        seed=seed,
        columns=TAIL_COLUMNS,
        rows=rows,
        summary={"deviation": quantiles(devs), "reference": ref, "tr_rho_b": float(np.trace(rho.matrix @ b_matrix).real)},
        checks=[],
        n_samples=n_samples,
        samples={"f_ref": f_ref, "f_tail": f_tail, "deviation": devs},
    )
    record.checks.append(_soundness_check(record))
    record.wall_clock = time.perf_counter() - t0
    return record


def run_gaussian_concentration(
    rho: DensityMatrix,
    phi: np.ndarray | None = None,
    measure: str = "gaussian",
    eps_grid=None,
    r_grid=None,
    n_samples: int = 20_000,
    seed: int = 0,
    workers: int = 1,
) -> ExperimentRecord:
    """Ambient-space concentration for f = Re<phi, .> plus the small-norm tail.

    The plain Gaussian tail bound and the adjusted one are both attached to
    whichever measure is sampled; for the adjusted measure the probability of
    a norm below r is compared against its closed-form tail on the r grid.
    """
    t0 = time.perf_counter()
    if measure not in ("gaussian", "gaussian_adjusted"):
        raise ValueError("measure must be gaussian or gaussian_adjusted")
    eps_grid = geometric_grid(0.005, 1.0, 12) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    if r_grid is None:
        r_grid = np.arange(1, 8) / 10.0
    if phi is None:
        phi = np.zeros(rho.dim, dtype=np.complex128)
        phi[0] = 1.0
    phi = np.asarray(phi, dtype=np.complex128)
    eta = float(npl.norm(phi))
    n_ref = n_samples // 2
    n_tail = n_samples - n_ref
    payload = {"rho": rho, "phi": phi, "measure": measure}
    ref_parts = map_chunks("lipschitz_linear", payload, seed, n_ref, workers, namespace=0)
    tail_parts = map_chunks("lipschitz_linear", payload, seed, n_tail, workers, namespace=1)
    f_ref = np.concatenate([p[0] for p in ref_parts])
    f_tail = np.concatenate([p[0] for p in tail_parts])
    norms = np.concatenate([p[1] for p in tail_parts])
    ref = float(f_ref.mean())
    devs = np.abs(f_tail - ref)

    tag = "gauss_conc" if measure == "gaussian" else "ga_conc"
    bound_list = [(tag, {"eta": eta, "p_max": rho.p_max}, True)] if eta > 0 else []
    rows = _tail_rows("lipschitz_dev", devs, eps_grid, bound_list)
    if measure == "gaussian_adjusted":
        n = norms.size
        for r in r_grid:
            hits = int(np.count_nonzero(norms < r))
            p_hat, lo, hi = wilson_interval(hits, n)
            log_value, clamped = bnd.tail_log_and_clamped("ga_small_norm", r=float(r), p_max=rho.p_max)
            rows.append(
                {
                    "statistic": "small_norm",
                    "param_name": "r",
                    "param_value": float(r),
                    "epsilon": float(r),
                    "n_samples": n,
                    "n_exceed": hits,
                    "p_hat": p_hat,
                    "wilson_low": lo,
                    "wilson_high": hi,
                    "bound_tag": "ga_small_norm",
                    "bound_log": log_value,
                    "bound_clamped": clamped,
                    "bound_is_theorem": 1,
                }
            )
    record = ExperimentRecord(
        experiment="gaussian_concentration",
        config={
            "measure": measure,
            "n_samples": n_samples,
            "eta": eta,
            "eps_grid": [float(e) for e in eps_grid],
            "r_grid": [float(r) for r in r_grid],
            "rho": _rho_summary(rho),
        },
        seed=seed,
        columns=TAIL_COLUMNS,
        rows=rows,
        summary={"deviation": quantiles(devs), "reference": ref, "mean_sq_norm": float((norms**2).mean())},
        checks=[],
        n_samples=n_samples,
        samples={"f_ref": f_ref, "f_tail": f_tail, "norms": norms, "deviation": devs},
    )
    record.checks.append(_soundness_check(record))
    record.wall_clock = time.perf_counter() - t0
    return record


def run_dynamical_typicality(
    rho: DensityMatrix,
    b_matrix: np.ndarray,
    hamiltonian: np.ndarray | None = None,
    shape: HilbertDim | None = None,
    t_max: float | None = None,
    n_t: int = 64,
    eps_grid=None,
    n_samples: int = 1_000,
    seed: int = 0,
    workers: int = 1,
    convergence_tol: float = 0.01,
) -> ExperimentRecord:
    """Instantaneous and time-averaged deviations along a unitary orbit.

    The time average uses the trapezoid rule on n_t uniform intervals; the
    run always also evaluates the doubled grid and records the halving-rule
    self-convergence check. A random Hamiltonian with order-one spectral
    width is drawn when none is supplied; when no horizon is given it is ten
    times the inverse mean level spacing of the central half of the spectrum.
    """
    t0 = time.perf_counter()
    eps_grid = DEFAULT_EPS_GRID if eps_grid is None else np.asarray(eps_grid, dtype=float)
    if n_t < 2:
        raise ValueError("need at least two time intervals")
    b_matrix = np.asarray(b_matrix, dtype=np.complex128)
    if npl.norm(b_matrix - b_matrix.conj().T) > 1e-10:
        raise ValueError("observable must be Hermitian")
    norm_b = float(npl.svd(b_matrix, compute_uv=False)[0])
    if hamiltonian is None:
        hamiltonian = gue_hamiltonian(rho.dim, rngmod.aux_stream(seed, 0))
    energies, modes = spectral_propagator(hamiltonian)
    if t_max is None:
        t_max = 10.0 / central_level_spacing(energies)
    if t_max <= 0:
        raise ValueError("time horizon must be positive")
    shape = shape or rho.shape
    want_reduced = shape.d_b > 1

    t_nodes = np.linspace(0.0, t_max, 2 * n_t + 1)
    rho_eig = modes.conj().T @ rho.matrix @ modes
    b_eig = modes.conj().T @ b_matrix @ modes
    cross = rho_eig * b_eig.T  # tr(rho_t B) = sum_jk cross_jk exp(-i (E_j - E_k) t)
    gaps = energies[:, None] - energies[None, :]
    ref_obs = np.array(
        [np.sum(cross * np.exp(-1j * gaps * t)).real for t in t_nodes]
    )
    ref_red = None
    if want_reduced:
        ref_red = np.empty((t_nodes.size, shape.d_a, shape.d_a), dtype=np.complex128)
        for j, t in enumerate(t_nodes):
            phase = np.exp(-1j * energies * t)
            u_t = (modes * phase) @ modes.conj().T
            rho_t = u_t @ rho.matrix @ u_t.conj().T
            ref_red[j] = partial_trace_matrix(rho_t, shape.d_a, shape.d_b)

    payload = {
        "rho": rho,
        "modes": modes,
        "energies": energies,
        "b_eig": b_eig,
        "t_nodes": t_nodes,
        "ref_obs": ref_obs,
        "ref_red": ref_red,
        "d_a": shape.d_a,
        "d_b": shape.d_b,
        "instant_index": n_t,  # fine node at t_max / 2
    }
    parts = map_chunks("dynamical", payload, seed, n_samples, workers)
    instant = np.concatenate([p[0] for p in parts])
    avg_obs_fine = np.concatenate([p[1] for p in parts])
    avg_obs = np.concatenate([p[2] for p in parts])  # configured n_t grid
    rows = _tail_rows(
        "instant_obs_dev",
        instant,
        eps_grid,
        [("levy_obs", {"norm_b": norm_b, "p_max": rho.p_max}, True)],
    )
    rows += _tail_rows(
        "avg_obs_dev",
        avg_obs,
        eps_grid,
        [("dyn_avg_obs", {"norm_b": norm_b, "p_max": rho.p_max}, True)],
    )
    checks = []
    mean_fine = float(avg_obs_fine.mean())
    mean_coarse = float(avg_obs.mean())
    rel = abs(mean_fine - mean_coarse) / mean_fine if mean_fine > 0 else 0.0
    checks.append(
        Check(
            "trapezoid_convergence_obs",
            rel < convergence_tol,
            f"mean time average changes by {rel:.3%} when doubling the grid",
        )
    )
    summary = {
        "instant_obs_dev": quantiles(instant),
        "avg_obs_dev": quantiles(avg_obs),
        "trapezoid_rel_change_obs": rel,
        "ref_obs_spread": float(ref_obs.max() - ref_obs.min()),
    }
    samples = {"instant_obs_dev": instant, "avg_obs_dev": avg_obs, "avg_obs_dev_fine": avg_obs_fine}
    if want_reduced:
        avg_red_fine = np.concatenate([p[3] for p in parts])
        avg_red = np.concatenate([p[4] for p in parts])
        rows += _tail_rows(
            "avg_reduced_dev",
            avg_red,
            eps_grid,
            [("dyn_avg_reduced", {"d_a": shape.d_a, "p_max": rho.p_max}, True)],
        )
        mean_fine_r = float(avg_red_fine.mean())
        mean_coarse_r = float(avg_red.mean())
        rel_r = abs(mean_fine_r - mean_coarse_r) / mean_fine_r if mean_fine_r > 0 else 0.0
        checks.append(
            Check(
                "trapezoid_convergence_reduced",
                rel_r < convergence_tol,
                f"mean time average changes by {rel_r:.3%} when doubling the grid",
            )
        )
        summary["avg_reduced_dev"] = quantiles(avg_red)
        summary["trapezoid_rel_change_reduced"] = rel_r
        samples["avg_reduced_dev"] = avg_red
        samples["avg_reduced_dev_fine"] = avg_red_fine

    record = ExperimentRecord(
        experiment="dynamical_typicality",
        config={
            "d_a": shape.d_a,
            "d_b": shape.d_b,
            "t_max": t_max,
            "n_t": n_t,
            "n_samples": n_samples,
            "norm_b": norm_b,
            "eps_grid": [float(e) for e in eps_grid],
            "rho": _rho_summary(rho),
        },
        seed=seed,
        columns=TAIL_COLUMNS,
        rows=rows,
        summary=summary,
        checks=checks,
        n_samples=n_samples,
        samples=samples,
    )
    record.checks.append(_soundness_check(record))
    record.wall_clock = time.perf_counter() - t0
    return record


def run_conditional_born(
    d_a: int,
    d_b_grid,
    rho_factory,
    n_outer: int = 256,
    n_ref: int = 20_000,
    n_f: int = 5,
    n_inner: int | None = None,
    seed: int = 0,
    workers: int = 1,
    trend_min_decrease: float = 0.3,
    f_vectors: np.ndarray | None = None,
) -> ExperimentRecord:
    """Gap between the conditional-state selection average and its limit measure.

    For each environment dimension, draws (state, random basis) pairs,
    enumerates the conditional wave function over all outcomes, and measures
    |Born(f_k) - reference_k| for a fixed family of projector test functions
    f_k = |<phi_k|.>|^2. The reference is an independent Monte Carlo average
    over the sphere measure with density matrix tr_b rho. With more than one
    grid entry the record checks the median gap trend. An environment below
    the applicability floor max(4, d_a) is flagged in the summary, not fatal.
    """
    t0 = time.perf_counter()
    d_b_grid = [int(x) for x in d_b_grid]
    if f_vectors is None:
        f_vectors = sample_uniform_sphere(d_a, rngmod.aux_stream(seed, 2), size=n_f)
    else:
        f_vectors = np.asarray(f_vectors, dtype=np.complex128).reshape(-1, d_a)
    rows = []
    medians = []
    per_db_gaps = {}
    # the environment-size hypothesis is an applicability flag, not an error
    hypothesis_met = all(d_b >= max(4, d_a) for d_b in d_b_grid)
    for k, d_b in enumerate(d_b_grid):
        shape = HilbertDim(d_a, d_b)
        rho = rho_factory(shape)
        rho_a = DensityMatrix.from_matrix(partial_trace_matrix(rho.matrix, d_a, d_b))
        ref_payload = {"rho": rho_a, "f_vectors": f_vectors}
        ref_parts = map_chunks("gap_projector_means", ref_payload, seed, n_ref, workers, namespace=2 * k)
        refs = np.concatenate([p[0] for p in ref_parts]).mean(axis=0)
        payload = {
            "rho": rho,
            "d_a": d_a,
            "d_b": d_b,
            "f_vectors": f_vectors,
            "refs": refs,
            "n_inner": n_inner,
        }
        parts = map_chunks("conditional_born", payload, seed, n_outer, workers, namespace=2 * k + 1)
        gaps = np.concatenate([p[0] for p in parts])  # (n_outer, n_f)
        borns = np.concatenate([p[1] for p in parts])
        pooled = gaps.reshape(-1)
        per_db_gaps[d_b] = (gaps, borns, refs)
        rows.append(_scaling_row("born_gap", "d_b", d_b, pooled))
        medians.append(float(np.median(pooled)))
    checks = []
    if len(d_b_grid) > 1:
        decrease = 1.0 - medians[-1] / medians[0] if medians[0] > 0 else 0.0
        checks.append(
            Check(
                "born_gap_trend",
                decrease >= trend_min_decrease,
                f"median gap decreases by {decrease:.1%} from d_b={d_b_grid[0]} to d_b={d_b_grid[-1]}",
            )
        )
    record = ExperimentRecord(
        experiment="conditional_born",
        config={
            "d_a": d_a,
            "d_b_grid": d_b_grid,
            "n_outer": n_outer,
            "n_ref": n_ref,
            "n_f": n_f,
            "n_inner": n_inner,
        },
        seed=seed,
        columns=SCALING_COLUMNS,
        rows=rows,
        summary={"medians": medians, "hypothesis_d_b_floor_met": hypothesis_met},
        checks=checks,
        n_samples=n_outer * len(d_b_grid),
        samples={
            **{f"gaps_db_{d_b}": g for d_b, (g, _, _) in per_db_gaps.items()},
            **{f"borns_db_{d_b}": b for d_b, (_, b, _) in per_db_gaps.items()},
            **{f"refs_db_{d_b}": r for d_b, (_, _, r) in per_db_gaps.items()},
        },
    )
    record.wall_clock = time.perf_counter() - t0
    return record


def run_counterexample_delta(
    rho: DensityMatrix,
    shape: HilbertDim,
    basis_choice: str = "eigen",
    n_samples: int = 2_000,
    seed: int = 0,
    workers: int = 1,
) -> ExperimentRecord:
    """Reduced-state deviations under the most concentrated measure with
    density matrix rho.

    With the eigenbasis of a product-diagonal rho the deviation of every atom
    is computable exactly and stays bounded away from zero; with a Haar-random
    atom basis the deviations concentrate near zero for a large environment.
    """
    t0 = time.perf_counter()
    if shape.total != rho.dim:
        raise ValueError(f"shape {shape} does not match rho dimension {rho.dim}")
    if basis_choice not in ("eigen", "haar"):
        raise ValueError("basis_choice must be eigen or haar")
    basis = None
    if basis_choice == "haar":
        basis = haar_unitary(rho.dim, rngmod.aux_stream(seed, 1))
    atoms = rho.eigenvectors if basis is None else basis
    rho_mu = delta_mixture_density_matrix(rho, basis)
    ref = partial_trace_matrix(rho_mu.matrix, shape.d_a, shape.d_b)
    reduced = reduced_states_batch(atoms.T, shape.d_a, shape.d_b)
    atom_devs = trace_norm_hermitian_batch(reduced - ref)
    parts = map_chunks("delta_indices", {"p": rho.eigenvalues}, seed, n_samples, workers)
    idx = np.concatenate([p[0] for p in parts])
    devs = atom_devs[idx]
    rows = [_scaling_row("reduced_trace_dev", "d_b", shape.d_b, devs)]
    record = ExperimentRecord(
        experiment="counterexample_delta",
        config={
            "d_a": shape.d_a,
            "d_b": shape.d_b,
            "basis": basis_choice,
            "n_samples": n_samples,
            "rho": _rho_summary(rho),
        },
        seed=seed,
        columns=SCALING_COLUMNS,
        rows=rows,
        summary={
            "deviation": quantiles(devs),
            "atom_deviation_min": float(atom_devs.min()),
            "atom_deviation_max": float(atom_devs.max()),
        },
        checks=[],
        n_samples=n_samples,
        samples={"deviation": devs, "atom_deviation": atom_devs},
    )
    record.wall_clock = time.perf_counter() - t0
    return record


def run_counterexample_vmf(
    d: int,
    kappa_grid=(0.0, 1.0, 4.0, 16.0),
    eps_grid=None,
    n_samples: int = 20_000,
    seed: int = 0,
    workers: int = 1,
) -> ExperimentRecord:
    """Tails of |<mu, x> - E<mu, x>| on the real sphere across concentrations.

    Exploratory: at zero concentration the distribution is uniform and the
    uniform-measure Lipschitz tail is a theorem; at positive concentration the
    same curve is attached for visual comparison only, since no such bound
    holds there.
    """
    t0 = time.perf_counter()
    if d < 4 or d % 2:
        raise ValueError("use an even real dimension of at least 4")
    eps_grid = geometric_grid(0.005, 1.0, 12) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    rows = []
    refs = {}
    sample_store = {}
    for k, kappa in enumerate(kappa_grid):
        parts = map_chunks("vmf_first_coord", {"d": d, "kappa": float(kappa)}, seed, n_samples, workers, namespace=k)
        coords = np.concatenate([p[0] for p in parts])
        ref = vmf_mean_resultant(float(kappa), d)
        refs[float(kappa)] = ref
        devs = np.abs(coords - ref)
        # the real sphere in dimension d is the unit sphere of a complex space
        # of dimension d/2, so the uniform tail applies verbatim at kappa = 0
        bound_list = [("unif_levy", {"d": d // 2, "eta": 1.0}, kappa == 0.0)]
        rows += _tail_rows("vmf_dev", devs, eps_grid, bound_list, param=("kappa", float(kappa)))
        sample_store[f"coords_kappa_{kappa:g}"] = coords
    record = ExperimentRecord(
        experiment="counterexample_vmf",
        config={
            "d": d,
            "kappa_grid": [float(k) for k in kappa_grid],
            "n_samples": n_samples,
            "eps_grid": [float(e) for e in eps_grid],
        },
        seed=seed,
        columns=TAIL_COLUMNS,
        rows=rows,
        summary={"mean_resultant": {f"{k:g}": v for k, v in refs.items()}},
        checks=[],
        n_samples=n_samples * len(list(kappa_grid)),
        samples=sample_store,
    )
    record.checks.append(_soundness_check(record))
    record.wall_clock = time.perf_counter() - t0
    return record


# ---------------------------------------------------------------------------
# overlap-angle density for a near-pure spectrum
# ---------------------------------------------------------------------------


def near_pure_spectrum(d: int, p: float) -> np.ndarray:
    """One eigenvalue p, the remaining d-1 sharing 1-p equally (needs p > 1/d)."""
    if not 0.0 < p < 1.0:
        raise ValueError("weight must be in (0, 1)")
    if p <= 1.0 / d:
        raise ValueError("the distinguished weight must exceed 1/d")
    rest = (1.0 - p) / (d - 1)
    return np.concatenate([[p], np.full(d - 1, rest)])


def theta_density(theta, p: float):
    """Asymptotic density of the overlap angle for the near-pure spectrum."""
    theta = np.asarray(theta, dtype=float)
    lam = (1.0 - p) / p
    with np.errstate(divide="ignore", over="ignore"):
        cot2 = 1.0 / np.tan(theta) ** 2
        val = (
            2.0 * (1.0 - p) ** 2 / p
            * np.cos(theta)
            / np.sin(theta) ** 5
            * np.exp(-lam * cot2)
        )
    return np.where((theta > 0) & (theta < np.pi / 2), val, 0.0)


def theta_cdf(theta, p: float):
    """Closed form of the integral of ``theta_density`` from 0 to theta."""
    theta = np.asarray(theta, dtype=float)
    lam = (1.0 - p) / p
    with np.errstate(divide="ignore", over="ignore"):
        v = 1.0 / np.tan(np.clip(theta, 1e-300, None)) ** 2
        val = (1.0 - p) ** 2 / p * np.exp(-lam * v) * ((1.0 + v) / lam + 1.0 / lam**2)
    out = np.where(theta <= 0, 0.0, np.where(theta >= np.pi / 2, 1.0, val))
    return out


def run_theta_density(
    d: int,
    p: float,
    n_samples: int = 100_000,
    n_bins: int = 80,
    d_a: int = 2,
    seed: int = 0,
    workers: int = 1,
    ks_tolerance: float = 0.02,
    min_dev_iqr: float = 0.05,
) -> ExperimentRecord:
    """Overlap angle of sphere draws with the dominant eigenvector.

    Compares the sampled angle distribution against the closed-form
    large-dimension density, checks that the analytic density integrates to
    one, and confirms that the reduced-state deviation keeps a spread bounded
    away from zero (the near-pure spectrum breaks canonical typicality).
    """
    t0 = time.perf_counter()
    if d % d_a:
        raise ValueError(f"d_a={d_a} must divide d={d}")
    shape = HilbertDim(d_a, d // d_a)
    rho = DensityMatrix.from_spectrum(near_pure_spectrum(d, p), shape)
    ref = partial_trace_matrix(rho.matrix, shape.d_a, shape.d_b)
    payload = {"rho": rho, "d_a": shape.d_a, "d_b": shape.d_b, "ref": ref}
    parts = map_chunks("theta_and_dev", payload, seed, n_samples, workers)
    thetas = np.concatenate([p_[0] for p_ in parts])
    devs = np.concatenate([p_[1] for p_ in parts])

    norm_value, norm_err = integrate.quad(lambda t: float(theta_density(t, p)), 0.0, np.pi / 2, limit=400)
    norm_ok = abs(norm_value - 1.0) < 1e-6
    from .stats import ks_distance

    ks = ks_distance(thetas, lambda t: theta_cdf(t, p))
    iqr = float(np.quantile(devs, 0.75) - np.quantile(devs, 0.25))

    edges = np.linspace(0.0, np.pi / 2, n_bins + 1)
    counts, _ = np.histogram(thetas, bins=edges)
    widths = np.diff(edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    analytic = theta_density(centers, p)
    rows = []
    for i in range(n_bins):
        rows.append(
            {
                "bin_low": float(edges[i]),
                "bin_high": float(edges[i + 1]),
                "count": int(counts[i]),
                "density_empirical": float(counts[i] / (n_samples * widths[i])),
                "density_analytic": float(analytic[i]),
            }
        )
    checks = [
        Check("analytic_density_normalized", norm_ok, f"quadrature gives {norm_value:.9f} (err {norm_err:.1e})"),
        Check("theta_ks", ks < ks_tolerance, f"KS distance {ks:.5f} vs tolerance {ks_tolerance}"),
        Check("deviation_iqr_positive", iqr > min_dev_iqr, f"reduced-state deviation IQR {iqr:.4f}"),
    ]
    record = ExperimentRecord(
        experiment="theta_density",
        config={"d": d, "p": p, "d_a": d_a, "n_samples": n_samples, "n_bins": n_bins},
        seed=seed,
        columns=["bin_low", "bin_high", "count", "density_empirical", "density_analytic"],
        rows=rows,
        summary={
            "ks_distance": ks,
            "density_norm_quadrature": norm_value,
            "deviation": quantiles(devs),
            "deviation_iqr": iqr,
        },
        checks=checks,
        n_samples=n_samples,
        samples={"theta": thetas, "deviation": devs},
    )
    record.wall_clock = time.perf_counter() - t0
    return record
