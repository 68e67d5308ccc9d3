"""Output writers.

Every run directory holds ``meta.json`` (header with the resolved config,
footer with wall time and discard counts), the resolved config text, one
CSV per table and optional JSON-lines logs.  CSV files are RFC-4180 with
LF line endings and a header row; their columns are versioned below and
listed again in the README.

Schemas:

- forward (v1): generation, mean, variance
- coal_tail (v1): N, gamma, threshold, p_hat, ci_lo, ci_hi, n_effective, n_discarded, limit
- meet_tail (v1): N, gamma, threshold, p_hat, ci_lo, ci_hi, n_effective, n_discarded, limit
- phi (v1): N, gamma, mu, lo, hi, ci_lo, ci_hi, n, n_censored, reference, tail_lo, tail_hi
- trace (v1): start1_x, start1_y, start2_x, start2_y, tau_meet, tau_coal, steps_taken, max_separation, horizon
- wm_phi (v1): r, value
- wm_scaling (v1): N, gamma, value, limit_reference
- stepping_stone (v1): x, y, r, psi_series, psi_asymptotic, psi_mc, psi_mc_se, z_score
- oracle_rw (v1): threshold, p_hat, ci_lo, ci_hi, n, erdos_taylor, ratio
- selftest (v1): check, status, detail
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
import re
from pathlib import Path

SCHEMAS: dict[str, tuple[int, tuple[str, ...]]] = {
    "forward": (1, ("generation", "mean", "variance")),
    "coal_tail": (1, ("N", "gamma", "threshold", "p_hat", "ci_lo", "ci_hi", "n_effective", "n_discarded", "limit")),
    "meet_tail": (1, ("N", "gamma", "threshold", "p_hat", "ci_lo", "ci_hi", "n_effective", "n_discarded", "limit")),
    "phi": (1, ("N", "gamma", "mu", "lo", "hi", "ci_lo", "ci_hi", "n", "n_censored", "reference", "tail_lo", "tail_hi")),
    "trace": (1, ("start1_x", "start1_y", "start2_x", "start2_y", "tau_meet", "tau_coal", "steps_taken",
                  "max_separation", "horizon")),
    "wm_phi": (1, ("r", "value")),
    "wm_scaling": (1, ("N", "gamma", "value", "limit_reference")),
    "stepping_stone": (1, ("x", "y", "r", "psi_series", "psi_asymptotic", "psi_mc", "psi_mc_se", "z_score")),
    "oracle_rw": (1, ("threshold", "p_hat", "ci_lo", "ci_hi", "n", "erdos_taylor", "ratio")),
    "selftest": (1, ("check", "status", "detail")),
}

_DOC_LINE = re.compile(r"^- (\w+) \(v(\d+)\): (.+)$")


def documented_schemas(doc: str) -> dict[str, tuple[int, tuple[str, ...]]]:
    """Schemas listed as ``- name (vN): col, col`` lines in ``doc``."""
    out = {}
    for line in doc.splitlines():
        m = _DOC_LINE.match(line.strip())
        if m:
            out[m.group(1)] = (int(m.group(2)), tuple(c.strip() for c in m.group(3).split(",")))
    return out


def schema_tag(name: str) -> str:
    return f"{name}/v{SCHEMAS[name][0]}"


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def csv_text(name: str, rows) -> str:
    cols = SCHEMAS[name][1]
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        if isinstance(row, dict):
            extra = set(row) - set(cols)
            if extra:
                raise KeyError(f"columns {sorted(extra)} not in schema {name}")
            row = [row.get(c) for c in cols]
        if len(row) != len(cols):
            raise ValueError(f"row has {len(row)} fields, schema {name} has {len(cols)}")
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, name: str, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(csv_text(name, rows))
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_jsonl(path, records) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
