"""Command-line interface: tables, runs, sampling, verification, exit codes."""

import json
import re
import time

import numpy as np
import pytest
import yaml

from gaplab.cli import main


def write_yaml(path, payload):
    path.write_text(yaml.safe_dump(payload))
    return str(path)


SMOKE = {
    "experiment": "canonical_typicality",
    "seed": 21,
    "workers": 1,
    "dims": {"d_a": 2, "d_b": 32},
    "rho": {"kind": "uniform"},
    "n_samples": 1000,
}


def test_bounds_table_matches_hand_plug_in(capsys):
    assert main(["bounds", "table", "--tag", "poly_eps", "--d-a", "2", "--purity", str(2.0**-10), "--grid", "0.1"]) == 0
    out = capsys.readouterr().out
    # 28 * 2^5 * 2^-10 / 0.01 = 87.5, clamped probability 1
    row = out.strip().splitlines()[-1].split()
    assert float(row[0]) == pytest.approx(0.1)
    assert float(row[1]) == pytest.approx(np.log(87.5), rel=1e-9)
    assert float(row[2]) == 1.0


def test_bounds_table_delta_one_finite(capsys):
    assert main(["bounds", "table", "--tag", "exp_delta", "--d-a", "4", "--p-max", "1e-4", "--grid", "1.0"]) == 0
    value = float(capsys.readouterr().out.strip().splitlines()[-1].split()[2])
    assert np.isfinite(value) and value > 0


def test_bounds_crossover_endpoints(capsys, tmp_path):
    csv = tmp_path / "crossover.csv"
    start = time.perf_counter()
    assert main(["bounds", "crossover", "--d-a", "1000", "--eps", "0.01", "--csv", str(csv)]) == 0
    elapsed = time.perf_counter() - start
    out = capsys.readouterr().out
    match = re.search(r"([\d.]+e\+?\d+) < D < ([\d.]+e\+?\d+)", out)
    assert match, out
    d_low, d_high = float(match.group(1)), float(match.group(2))
    assert abs(d_low - 4.67e13) / 4.67e13 < 5e-3
    assert abs(d_high - 9.17e31) / 9.17e31 < 5e-3
    assert elapsed < 1.0
    header = csv.read_text().splitlines()[0]
    assert header == "log10_d,log10_poly,log10_exp,d_low,d_high"


def test_bounds_invalid_params_exit_2(capsys):
    assert main(["bounds", "table", "--tag", "levy_gap", "--eta", "1.0", "--grid", "0.1"]) == 2
    assert "p_max" in capsys.readouterr().err


def test_run_smoke_and_rerun_byte_identical(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "smoke.yaml", SMOKE)
    out_dir = tmp_path / "out"
    start = time.perf_counter()
    assert main(["run", "--config", cfg, "--out-dir", str(out_dir)]) == 0
    assert time.perf_counter() - start < 10.0
    capsys.readouterr()
    csv_path = out_dir / "canonical_typicality_seed21.csv"
    summary_path = out_dir / "canonical_typicality_seed21.summary.json"
    first_csv = csv_path.read_bytes()
    first_summary = summary_path.read_bytes()
    assert main(["run", "--config", cfg, "--out-dir", str(out_dir)]) == 0
    assert csv_path.read_bytes() == first_csv
    assert summary_path.read_bytes() == first_summary


def test_run_identical_across_worker_counts(tmp_path, capsys):
    cfg_path = tmp_path / "smoke.yaml"
    out_dir = tmp_path / "out"
    blobs = []
    for workers in (1, 2, 4):
        write_yaml(cfg_path, {**SMOKE, "workers": workers})
        assert main(["run", "--config", str(cfg_path), "--out-dir", str(out_dir)]) == 0
        blobs.append((out_dir / "canonical_typicality_seed21.csv").read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


def test_run_seed_override_changes_output_name(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "smoke.yaml", SMOKE)
    out_dir = tmp_path / "out"
    assert main(["run", "--config", cfg, "--seed", "99", "--out-dir", str(out_dir)]) == 0
    assert (out_dir / "canonical_typicality_seed99.csv").exists()


def test_run_rejects_unknown_key_with_field_path(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "bad.yaml", {**SMOKE, "rho": {"kind": "uniform", "beta_typo": 1.0}})
    assert main(["run", "--config", cfg, "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "rho.beta_typo" in err


def test_run_rejects_missing_required_key(tmp_path, capsys):
    bad = {k: v for k, v in SMOKE.items() if k != "seed"}
    cfg = write_yaml(tmp_path / "bad.yaml", bad)
    assert main(["run", "--config", cfg, "--out-dir", str(tmp_path)]) == 2
    assert "seed" in capsys.readouterr().err


def test_run_compute_error_exit_3(tmp_path, capsys):
    cfg = write_yaml(
        tmp_path / "bad.yaml",
        {"experiment": "theta_density", "seed": 1, "d": 63, "p": 0.3, "n_samples": 100, "dims": {"d_a": 2}},
    )
    assert main(["run", "--config", cfg, "--out-dir", str(tmp_path)]) == 3
    assert "compute error" in capsys.readouterr().err


def test_run_failed_check_exit_4_files_still_written(tmp_path, capsys):
    cfg = write_yaml(
        tmp_path / "flat.yaml",
        {
            "experiment": "conditional_born",
            "seed": 2,
            "dims": {"d_a": 2},
            "rho": {"kind": "uniform"},
            "n_outer": 8,
            "n_ref": 200,
            "grids": {"d_b": {"values": [16, 16]}},
        },
    )
    out_dir = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out-dir", str(out_dir)]) == 4
    assert (out_dir / "conditional_born_seed2.csv").exists()
    assert "FAILED check" in capsys.readouterr().err


def test_verify_detects_tampering(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "smoke.yaml", SMOKE)
    out_dir = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out-dir", str(out_dir)]) == 0
    summary = str(out_dir / "canonical_typicality_seed21.summary.json")
    assert main(["verify", "--summary", summary]) == 0
    csv_path = out_dir / "canonical_typicality_seed21.csv"
    csv_path.write_text(csv_path.read_text().replace("0.", "1.", 1))
    assert main(["verify", "--summary", summary]) == 1
    assert "checksum mismatch" in capsys.readouterr().err


def test_report_prints_rows_and_checks(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "smoke.yaml", SMOKE)
    out_dir = tmp_path / "out"
    main(["run", "--config", cfg, "--out-dir", str(out_dir)])
    capsys.readouterr()
    assert main(["report", "--summary", str(out_dir / "canonical_typicality_seed21.summary.json")]) == 0
    out = capsys.readouterr().out
    assert "canonical_typicality" in out
    assert "check soundness: PASS" in out


def test_sample_summary_empirical_density_matrix(capsys):
    assert main(["sample", "--measure", "gap", "--d", "4", "--n", "100000", "--seed", "3", "--format", "summary"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["n"] == 100000
    diag = payload["empirical_dm_diag"]
    assert all(abs(x - 0.25) < 0.02 for x in diag)
    assert payload["max_offdiag_abs"] < 0.02


def test_sample_zero_draws_empty_csv_with_header(capsys):
    assert main(["sample", "--measure", "gap", "--d", "2", "--n", "0", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert out == "re_0,re_1,im_0,im_1\n"


def test_sample_delta_mixture_emits_atom_indices(capsys):
    assert main(["sample", "--measure", "delta_mixture", "--d", "4", "--n", "6", "--seed", "5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "atom_index"
    assert all(0 <= int(x) < 4 for x in lines[1:])
    assert len(lines) == 7


def test_sample_vmf_rows(capsys):
    assert main(["sample", "--measure", "vmf", "--d", "6", "--kappa", "2.5", "--n", "3", "--seed", "7"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("x_0,")
    values = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert np.allclose(np.linalg.norm(values, axis=1), 1.0, atol=1e-10)
