"""Run configuration: YAML schema, validation, and experiment dispatch.

Configs are nested key/value documents. Validation happens before any compute
and rejects unknown keys; error messages carry the dotted field path. The
resolved config (defaults applied) is what gets hashed into output files, so
a record can always be re-run from its summary.
"""

from __future__ import annotations

import math
import os

import numpy as np
import yaml

from . import experiments as xp
from . import rng as rngmod
from .linalg import DensityMatrix, HilbertDim, gue_hamiltonian


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted location of the offense."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


# ---------------------------------------------------------------------------
# schema machinery: a schema is a dict  key -> (checker, required, default)
# where checker is a callable, a nested schema dict, or a type tuple
# ---------------------------------------------------------------------------


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _positive_int(v, path):
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigError(path, f"expected a positive integer, got {v!r}")
    return v


def _nonneg_int(v, path):
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise ConfigError(path, f"expected a nonnegative integer, got {v!r}")
    return v


def _positive_number(v, path):
    if not _is_number(v) or v <= 0:
        raise ConfigError(path, f"expected a positive number, got {v!r}")
    return float(v)


def _number(v, path):
    if not _is_number(v):
        raise ConfigError(path, f"expected a number, got {v!r}")
    return float(v)


def _string(options=None):
    def check(v, path):
        if not isinstance(v, str):
            raise ConfigError(path, f"expected a string, got {v!r}")
        if options and v not in options:
            raise ConfigError(path, f"expected one of {sorted(options)}, got {v!r}")
        return v

    return check


def _number_list(v, path):
    if not isinstance(v, list) or not v or not all(_is_number(x) for x in v):
        raise ConfigError(path, f"expected a non-empty list of numbers, got {v!r}")
    return [float(x) for x in v]


def _int_list(v, path):
    if not isinstance(v, list) or not v or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(path, f"expected a non-empty list of integers, got {v!r}")
    return list(v)


def _apply_schema(cfg, schema, path=""):
    if not isinstance(cfg, dict):
        raise ConfigError(path or "<root>", f"expected a mapping, got {type(cfg).__name__}")
    unknown = sorted(set(cfg) - set(schema))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(where, "unknown key")
    out = {}
    for key, (checker, required, default) in schema.items():
        here = f"{path}.{key}" if path else key
        if key not in cfg or cfg[key] is None:
            if required:
                raise ConfigError(here, "required key is missing")
            if default is not None:
                out[key] = default
            continue
        value = cfg[key]
        if isinstance(checker, dict):
            out[key] = _apply_schema(value, checker, here)
        else:
            out[key] = checker(value, here)
    return out


GRID_SCHEMA = {
    "kind": (_string({"geometric", "linear"}), False, "geometric"),
    "min": (_positive_number, False, None),
    "max": (_positive_number, False, None),
    "points": (_positive_int, False, None),
    "values": (_number_list, False, None),
}

RHO_SCHEMA = {
    "kind": (_string({"uniform", "projection", "thermal", "spectrum", "near_pure", "crossover_sqrt"}), True, None),
    "d_r": (_positive_int, False, None),
    "beta": (_positive_number, False, None),
    "spectrum": (
        {
            "kind": (_string({"linear", "gue", "file"}), True, None),
            "spacing": (_positive_number, False, 1.0),
            "path": (_string(), False, None),
        },
        False,
        None,
    ),
    "values": (_number_list, False, None),
    "p": (_positive_number, False, None),
}

OBSERVABLE_SCHEMA = {
    "kind": (_string({"alternating", "random_hermitian", "projector"}), False, "alternating"),
}

_COMMON = {
    "experiment": (_string(set()), True, None),  # options filled in below
    "seed": (_nonneg_int, True, None),
    "workers": (_positive_int, False, None),  # None: all available cores
    "output": ({"name": (_string(), False, None)}, False, {}),
}


def _schema_for(experiment: str) -> dict:
    base = dict(_COMMON)
    grids = {}
    if experiment in ("canonical_typicality", "entropy_typicality"):
        base.update(
            {
                "dims": ({"d_a": (_positive_int, True, None), "d_b": (_positive_int, True, None)}, True, None),
                "rho": (RHO_SCHEMA, False, {"kind": "uniform"}),
                "n_samples": (_positive_int, False, 10_000 if experiment == "canonical_typicality" else 2_000),
                "measure": (_string({"gap", "uniform"}), False, "gap"),
            }
        )
        if experiment == "canonical_typicality":
            grids["eps"] = (GRID_SCHEMA, False, None)
    elif experiment == "canonical_scaling":
        base.update(
            {
                "dims": ({"d_a": (_positive_int, True, None)}, True, None),
                "rho": (RHO_SCHEMA, False, {"kind": "uniform"}),
                "n_samples": (_positive_int, False, 10_000),
            }
        )
        grids["d_b"] = ({"values": (_int_list, True, None)}, True, None)
    elif experiment == "levy_gap":
        base.update(
            {
                "dims": ({"d_a": (_positive_int, True, None), "d_b": (_positive_int, False, 1)}, True, None),
                "rho": (RHO_SCHEMA, False, {"kind": "uniform"}),
                "n_samples": (_positive_int, False, 20_000),
                "measure": (_string({"gap", "uniform"}), False, "gap"),
                "observable": (OBSERVABLE_SCHEMA, False, {"kind": "alternating"}),
            }
        )
        grids["eps"] = (GRID_SCHEMA, False, None)
    elif experiment == "gaussian_concentration":
        base.update(
            {
                "dims": ({"d_a": (_positive_int, True, None), "d_b": (_positive_int, False, 1)}, True, None),
                "rho": (RHO_SCHEMA, False, {"kind": "uniform"}),
                "n_samples": (_positive_int, False, 20_000),
                "measure": (_string({"gaussian", "gaussian_adjusted"}), False, "gaussian"),
            }
        )
        grids["eps"] = (GRID_SCHEMA, False, None)
        grids["r"] = (GRID_SCHEMA, False, None)
    elif experiment == "dynamical_typicality":
        base.update(
            {
                "dims": ({"d_a": (_positive_int, True, None), "d_b": (_positive_int, True, None)}, True, None),
                "rho": (RHO_SCHEMA, False, {"kind": "uniform"}),
                "n_samples": (_positive_int, False, 1_000),
                "t_max": (_positive_number, False, None),  # None: from the level spacing
                "n_t": (_positive_int, False, 64),
                "observable": (OBSERVABLE_SCHEMA, False, {"kind": "alternating"}),
            }
        )
        grids["eps"] = (GRID_SCHEMA, False, None)
    elif experiment == "conditional_born":
        base.update(
            {
                "dims": ({"d_a": (_positive_int, True, None)}, True, None),
                "rho": (RHO_SCHEMA, False, {"kind": "uniform"}),
                "n_outer": (_positive_int, False, 256),
                "n_ref": (_positive_int, False, 20_000),
                "n_f": (_positive_int, False, 5),
                "n_inner": (_positive_int, False, None),
            }
        )
        grids["d_b"] = ({"values": (_int_list, True, None)}, True, None)
    elif experiment == "counterexample_delta":
        base.update(
            {
                "dims": ({"d_a": (_positive_int, True, None), "d_b": (_positive_int, True, None)}, True, None),
                "rho": (RHO_SCHEMA, False, {"kind": "uniform"}),
                "n_samples": (_positive_int, False, 2_000),
                "basis": (_string({"eigen", "haar"}), False, "eigen"),
            }
        )
    elif experiment == "counterexample_vmf":
        base.update(
            {
                "d": (_positive_int, True, None),
                "n_samples": (_positive_int, False, 20_000),
            }
        )
        grids["kappa"] = ({"values": (_number_list, True, None)}, True, None)
        grids["eps"] = (GRID_SCHEMA, False, None)
    elif experiment == "theta_density":
        base.update(
            {
                "d": (_positive_int, True, None),
                "p": (_positive_number, True, None),
                "dims": ({"d_a": (_positive_int, False, 2)}, False, {"d_a": 2}),
                "n_samples": (_positive_int, False, 100_000),
                "n_bins": (_positive_int, False, 80),
            }
        )
    else:
        raise ConfigError("experiment", f"unknown experiment {experiment!r}")
    if grids:
        base["grids"] = ({k: (v[0], v[1], v[2]) for k, v in grids.items()}, False, {})
    return base


EXPERIMENTS = (
    "canonical_typicality",
    "canonical_scaling",
    "entropy_typicality",
    "levy_gap",
    "gaussian_concentration",
    "dynamical_typicality",
    "conditional_born",
    "counterexample_delta",
    "counterexample_vmf",
    "theta_density",
)


def validate_config(cfg: dict) -> dict:
    """Validate and resolve a raw config mapping; raises ConfigError."""
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a mapping")
    experiment = cfg.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"expected one of {EXPERIMENTS}, got {experiment!r}")
    schema = _schema_for(experiment)
    schema["experiment"] = (_string(set(EXPERIMENTS)), True, None)
    return _apply_schema(cfg, schema)


def load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as handle:
        try:
            raw = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ConfigError("<root>", f"not valid YAML: {exc}") from exc
    return validate_config(raw)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def build_grid(spec: dict | None, default=None):
    if spec is None:
        return default
    if spec.get("values") is not None:
        return np.asarray(spec["values"], dtype=float)
    if spec.get("min") is None or spec.get("max") is None or spec.get("points") is None:
        raise ConfigError("grids", "grid needs either values or min/max/points")
    lo, hi, pts = spec["min"], spec["max"], spec["points"]
    if spec.get("kind", "geometric") == "geometric":
        return np.geomspace(lo, hi, pts)
    return np.linspace(lo, hi, pts)


def _thermal_energies(spec: dict, dim: int, seed: int) -> np.ndarray:
    kind = spec["kind"]
    if kind == "linear":
        return np.arange(dim) * spec.get("spacing", 1.0)
    if kind == "gue":
        h = gue_hamiltonian(dim, rngmod.aux_stream(seed, 7))
        return np.sort(np.linalg.eigvalsh(h))
    if kind == "file":
        path = spec.get("path")
        if not path:
            raise ConfigError("rho.spectrum.path", "spectrum file path is required")
        energies = np.loadtxt(path, dtype=float).reshape(-1)
        if energies.size != dim:
            raise ConfigError("rho.spectrum.path", f"file holds {energies.size} levels, need {dim}")
        return np.sort(energies)
    raise ConfigError("rho.spectrum.kind", f"unknown spectrum kind {kind!r}")


def build_rho_factory(spec: dict, seed: int):
    """Turn a rho spec into shape -> DensityMatrix."""
    kind = spec["kind"]

    def factory(shape: HilbertDim) -> DensityMatrix:
        d = shape.total
        if kind == "uniform":
            return DensityMatrix.uniform(shape)
        if kind == "projection":
            d_r = spec.get("d_r")
            if not d_r or d_r > d:
                raise ConfigError("rho.d_r", f"need 1 <= d_r <= {d}")
            p = np.zeros(d)
            p[:d_r] = 1.0 / d_r
            return DensityMatrix.from_spectrum(p, shape)
        if kind == "thermal":
            if spec.get("beta") is None or spec.get("spectrum") is None:
                raise ConfigError("rho", "thermal needs beta and a spectrum")
            energies = _thermal_energies(spec["spectrum"], d, seed)
            logw = -spec["beta"] * (energies - energies.min())
            w = np.exp(logw - np.logaddexp.reduce(logw))
            return DensityMatrix.from_spectrum(w / w.sum(), shape)
        if kind == "spectrum":
            values = spec.get("values")
            if not values:
                raise ConfigError("rho.values", "explicit spectrum needs values")
            if len(values) != d:
                raise ConfigError("rho.values", f"spectrum has {len(values)} entries, need {d}")
            return DensityMatrix.from_spectrum(np.asarray(values, dtype=float), shape)
        if kind == "near_pure":
            weight = spec.get("p")
            if weight is None:
                raise ConfigError("rho.p", "near_pure needs the distinguished weight p")
            return DensityMatrix.from_spectrum(xp.near_pure_spectrum(d, weight), shape)
        if kind == "crossover_sqrt":
            s = 1.0 / math.sqrt(d)
            p = np.concatenate([[s], np.full(d - 1, (1.0 - s) / (d - 1))])
            return DensityMatrix.from_spectrum(p, shape)
        raise ConfigError("rho.kind", f"unknown rho kind {kind!r}")

    return factory


def build_observable(spec: dict, dim: int, seed: int) -> np.ndarray:
    kind = spec.get("kind", "alternating")
    if kind == "alternating":
        return np.diag((-1.0) ** np.arange(dim)).astype(np.complex128)
    if kind == "projector":
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[np.arange(dim // 2), np.arange(dim // 2)] = 1.0
        return m
    if kind == "random_hermitian":
        h = gue_hamiltonian(dim, rngmod.aux_stream(seed, 8))
        return h / np.linalg.norm(h, 2)
    raise ConfigError("observable.kind", f"unknown observable kind {kind!r}")


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def run_from_config(cfg: dict) -> xp.ExperimentRecord:
    """Run the experiment described by a validated config."""
    experiment = cfg["experiment"]
    seed = cfg["seed"]
    workers = cfg.get("workers") or os.cpu_count() or 1  # default: all cores
    grids = cfg.get("grids", {}) or {}

    if experiment in ("canonical_typicality", "entropy_typicality"):
        shape = HilbertDim(cfg["dims"]["d_a"], cfg["dims"]["d_b"])
        rho = build_rho_factory(cfg["rho"], seed)(shape)
        if experiment == "canonical_typicality":
            eps = build_grid(grids.get("eps"))
            return xp.run_canonical_typicality(
                rho, shape, eps_grid=eps, n_samples=cfg["n_samples"], seed=seed, workers=workers, measure=cfg["measure"]
            )
        return xp.run_entropy_typicality(rho, shape, n_samples=cfg["n_samples"], seed=seed, workers=workers)

    if experiment == "canonical_scaling":
        factory = build_rho_factory(cfg["rho"], seed)
        d_b_values = [int(v) for v in grids["d_b"]["values"]]
        return xp.run_canonical_scaling(
            cfg["dims"]["d_a"], d_b_values, factory, n_samples=cfg["n_samples"], seed=seed, workers=workers
        )

    if experiment == "levy_gap":
        shape = HilbertDim(cfg["dims"]["d_a"], cfg["dims"].get("d_b", 1))
        rho = build_rho_factory(cfg["rho"], seed)(shape)
        b_matrix = build_observable(cfg["observable"], shape.total, seed)
        eps = build_grid(grids.get("eps"))
        return xp.run_levy_gap(
            rho, b_matrix, eps_grid=eps, n_samples=cfg["n_samples"], seed=seed, workers=workers, measure=cfg["measure"]
        )

    if experiment == "gaussian_concentration":
        shape = HilbertDim(cfg["dims"]["d_a"], cfg["dims"].get("d_b", 1))
        rho = build_rho_factory(cfg["rho"], seed)(shape)
        eps = build_grid(grids.get("eps"))
        r_grid = build_grid(grids.get("r"))
        return xp.run_gaussian_concentration(
            rho,
            measure=cfg["measure"],
            eps_grid=eps,
            r_grid=r_grid,
            n_samples=cfg["n_samples"],
            seed=seed,
            workers=workers,
        )

    if experiment == "dynamical_typicality":
        shape = HilbertDim(cfg["dims"]["d_a"], cfg["dims"]["d_b"])
        rho = build_rho_factory(cfg["rho"], seed)(shape)
        b_matrix = build_observable(cfg["observable"], shape.total, seed)
        eps = build_grid(grids.get("eps"))
        return xp.run_dynamical_typicality(
            rho,
            b_matrix,
            shape=shape,
            t_max=cfg.get("t_max"),
            n_t=cfg["n_t"],
            eps_grid=eps,
            n_samples=cfg["n_samples"],
            seed=seed,
            workers=workers,
        )

    if experiment == "conditional_born":
        factory = build_rho_factory(cfg["rho"], seed)
        d_b_values = [int(v) for v in grids["d_b"]["values"]]
        return xp.run_conditional_born(
            cfg["dims"]["d_a"],
            d_b_values,
            factory,
            n_outer=cfg["n_outer"],
            n_ref=cfg["n_ref"],
            n_f=cfg["n_f"],
            n_inner=cfg.get("n_inner"),
            seed=seed,
            workers=workers,
        )

    if experiment == "counterexample_delta":
        shape = HilbertDim(cfg["dims"]["d_a"], cfg["dims"]["d_b"])
        rho = build_rho_factory(cfg["rho"], seed)(shape)
        return xp.run_counterexample_delta(
            rho, shape, basis_choice=cfg["basis"], n_samples=cfg["n_samples"], seed=seed, workers=workers
        )

    if experiment == "counterexample_vmf":
        eps = build_grid(grids.get("eps"))
        return xp.run_counterexample_vmf(
            cfg["d"],
            kappa_grid=[float(v) for v in grids["kappa"]["values"]],
            eps_grid=eps,
            n_samples=cfg["n_samples"],
            seed=seed,
            workers=workers,
        )

    if experiment == "theta_density":
        return xp.run_theta_density(
            cfg["d"],
            cfg["p"],
            n_samples=cfg["n_samples"],
            n_bins=cfg["n_bins"],
            d_a=cfg["dims"]["d_a"],
            seed=seed,
            workers=workers,
        )

    raise ConfigError("experiment", f"unknown experiment {experiment!r}")
