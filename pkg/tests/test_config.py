"""Config validation and the density-matrix builders."""

import numpy as np
import pytest

from gaplab.config import ConfigError, build_grid, build_observable, build_rho_factory, validate_config
from gaplab.linalg import HilbertDim


BASE = {
    "experiment": "canonical_typicality",
    "seed": 3,
    "dims": {"d_a": 2, "d_b": 8},
    "rho": {"kind": "uniform"},
    "n_samples": 100,
}


def test_validate_fills_defaults_and_rejects_unknown():
    cfg = validate_config(BASE)
    assert cfg["measure"] == "gap"
    assert "workers" not in cfg or cfg["workers"] is None or cfg["workers"] >= 1
    with pytest.raises(ConfigError, match="typo"):
        validate_config({**BASE, "typo": 1})
    with pytest.raises(ConfigError, match="dims.d_a"):
        validate_config({**BASE, "dims": {"d_a": 0, "d_b": 8}})


def test_grid_builders():
    geo = build_grid({"kind": "geometric", "min": 0.01, "max": 1.0, "points": 5})
    assert geo[0] == pytest.approx(0.01) and geo[-1] == pytest.approx(1.0)
    assert np.allclose(np.diff(np.log(geo)), np.diff(np.log(geo))[0])
    lin = build_grid({"kind": "linear", "min": 0.0, "max": 1.0, "points": 3, "values": None})
    assert np.allclose(lin, [0.0, 0.5, 1.0])
    vals = build_grid({"values": [0.1, 0.2]})
    assert np.allclose(vals, [0.1, 0.2])
    with pytest.raises(ConfigError):
        build_grid({"kind": "geometric", "min": 0.01})


def test_rho_builders_cover_all_kinds(tmp_path):
    shape = HilbertDim(2, 8)
    uniform = build_rho_factory({"kind": "uniform"}, 0)(shape)
    assert uniform.p_max == pytest.approx(1.0 / 16)

    proj = build_rho_factory({"kind": "projection", "d_r": 4}, 0)(shape)
    assert proj.rank == 4 and proj.p_max == pytest.approx(0.25)

    thermal = build_rho_factory({"kind": "thermal", "beta": 0.5, "spectrum": {"kind": "linear", "spacing": 1.0}}, 0)(shape)
    p = thermal.eigenvalues
    assert np.all(np.diff(p) <= 1e-15)  # Boltzmann weights are descending
    assert p[1] / p[0] == pytest.approx(np.exp(-0.5), rel=1e-10)

    gue_thermal = build_rho_factory({"kind": "thermal", "beta": 1.0, "spectrum": {"kind": "gue"}}, 5)(shape)
    assert gue_thermal.eigenvalues.sum() == pytest.approx(1.0, abs=1e-10)

    levels = tmp_path / "levels.txt"
    np.savetxt(levels, np.arange(16.0) * 0.25)
    from_file = build_rho_factory(
        {"kind": "thermal", "beta": 2.0, "spectrum": {"kind": "file", "path": str(levels)}}, 0
    )(shape)
    assert from_file.eigenvalues[1] / from_file.eigenvalues[0] == pytest.approx(np.exp(-0.5), rel=1e-10)

    explicit = build_rho_factory({"kind": "spectrum", "values": [0.5] + [0.5 / 15] * 15}, 0)(shape)
    assert explicit.p_max == pytest.approx(0.5)

    near = build_rho_factory({"kind": "near_pure", "p": 0.3}, 0)(shape)
    assert near.p_max == pytest.approx(0.3)

    cross = build_rho_factory({"kind": "crossover_sqrt"}, 0)(shape)
    assert cross.p_max == pytest.approx(1.0 / 4.0)  # 1/sqrt(16)


def test_rho_builder_errors(tmp_path):
    shape = HilbertDim(2, 8)
    with pytest.raises(ConfigError, match="d_r"):
        build_rho_factory({"kind": "projection", "d_r": 99}, 0)(shape)
    with pytest.raises(ConfigError, match="values"):
        build_rho_factory({"kind": "spectrum", "values": [0.5, 0.5]}, 0)(shape)
    short = tmp_path / "short.txt"
    np.savetxt(short, np.arange(3.0))
    with pytest.raises(ConfigError, match="16"):
        build_rho_factory({"kind": "thermal", "beta": 1.0, "spectrum": {"kind": "file", "path": str(short)}}, 0)(shape)


def test_observable_builders():
    alt = build_observable({"kind": "alternating"}, 6, 0)
    assert np.allclose(np.diag(alt).real, [1, -1, 1, -1, 1, -1])
    proj = build_observable({"kind": "projector"}, 6, 0)
    assert np.trace(proj).real == pytest.approx(3.0)
    rand = build_observable({"kind": "random_hermitian"}, 6, 1)
    assert np.linalg.norm(rand, 2) == pytest.approx(1.0, rel=1e-10)
    assert np.allclose(rand, rand.conj().T)
