"""Persistence of experiment records: CSV data, JSON summaries, hashing.

Files are written atomically (temporary file in the target directory, then
rename). The persisted content is fully deterministic: floats are rendered
with shortest round-trip repr, wall-clock timing never enters the files, and
every summary embeds the configuration hash and the checksum of its CSV so a
verifier can confirm integrity later.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile

import numpy as np

from . import __version__
from .experiments import ExperimentRecord


def _sanitize(obj):
    """Make an object JSON-serializable and strictly finite-or-null."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return None if math.isnan(f) else f
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__} into a record")


def canonical_json_bytes(obj) -> bytes:
    return json.dumps(_sanitize(obj), sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def config_hash(config: dict) -> str:
    return sha256_hex(canonical_json_bytes(config))


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if math.isnan(f):
            return ""
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return repr(f)
    return str(value)


def render_csv(columns, rows, preamble: str | None = None) -> str:
    lines = [f"# {preamble}"] if preamble else []
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_format_cell(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def atomic_write_text(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def summary_payload(record: ExperimentRecord, csv_name: str, csv_sha: str) -> dict:
    cfg = _sanitize(record.config)
    return {
        "experiment": record.experiment,
        "version": __version__,
        "seed": record.seed,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "n_samples": record.n_samples,
        "csv_file": csv_name,
        "csv_sha256": csv_sha,
        "columns": list(record.columns),
        "rows": _sanitize(record.rows),
        "summary": _sanitize(record.summary),
        "checks": [{"name": c.name, "passed": bool(c.passed), "detail": c.detail} for c in record.checks],
    }


def write_record(record: ExperimentRecord, out_dir: str, name: str) -> tuple[str, str]:
    """Persist a record as <name>.csv plus <name>.summary.json; returns the paths.

    Both files embed the configuration hash and seed: the summary as fields,
    the CSV as a single leading comment line.
    """
    csv_path = os.path.join(out_dir, f"{name}.csv")
    summary_path = os.path.join(out_dir, f"{name}.summary.json")
    cfg_hash = config_hash(_sanitize(record.config))
    preamble = f"gaplab {__version__} experiment={record.experiment} seed={record.seed} config_hash={cfg_hash}"
    csv_text = render_csv(record.columns, record.rows, preamble=preamble)
    atomic_write_text(csv_path, csv_text)
    payload = summary_payload(record, os.path.basename(csv_path), sha256_hex(csv_text.encode()))
    atomic_write_text(summary_path, json.dumps(payload, sort_keys=True, indent=1) + "\n")
    return csv_path, summary_path


def load_summary(path: str) -> dict:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def verify_summary(summary_path: str) -> list[str]:
    """Re-derive the embedded hashes; returns a list of problems (empty = ok)."""
    problems = []
    payload = load_summary(summary_path)
    expected = config_hash(payload.get("config", {}))
    if payload.get("config_hash") != expected:
        problems.append(f"config hash mismatch: recorded {payload.get('config_hash')}, derived {expected}")
    csv_path = os.path.join(os.path.dirname(os.path.abspath(summary_path)), payload.get("csv_file", ""))
    if not os.path.exists(csv_path):
        problems.append(f"csv file missing: {csv_path}")
    else:
        with open(csv_path, "rb") as handle:
            data = handle.read()
        got = sha256_hex(data)
        if got != payload.get("csv_sha256"):
            problems.append(f"csv checksum mismatch: recorded {payload.get('csv_sha256')}, derived {got}")
        lines = [ln for ln in data.decode().strip().split("\n") if not ln.startswith("#")]
        declared = len(payload.get("rows", []))
        if len(lines) - 1 != declared:
            problems.append(f"csv row count {len(lines) - 1} does not match summary ({declared})")
        comment = data.decode().split("\n", 1)[0]
        if f"config_hash={expected}" not in comment or f"seed={payload.get('seed')}" not in comment:
            problems.append("csv preamble does not carry the config hash and seed")
    return problems
