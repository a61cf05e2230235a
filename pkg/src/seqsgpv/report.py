"""CSV output with a JSON metadata sidecar.

Column orders below are part of the output contract; bump SCHEMA_VERSION
whenever one changes.
"""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import __version__

SCHEMA_VERSION = 1

SIMULATE_COLUMNS = (
    "design", "W", "S", "A", "N", "lag", "theta", "replicates",
    "reject_null_rate", "reject_null_se",
    "inconclusive_rate", "inconclusive_se",
    "ruled_out_meaningful_rate", "ruled_out_meaningful_se",
    "ruled_out_null_equiv_rate", "ruled_out_null_equiv_se",
    "mild_effect_rate", "mild_effect_se",
    "avg_n_observed", "avg_n_observed_se", "sd_n", "avg_n_final",
    "stop_early_prob", "stop_early_se",
    "bias", "bias_se", "coverage", "coverage_se",
    "reversal_reject_to_accept", "reversal_reject_to_accept_se",
    "reversal_accept_to_reject", "reversal_accept_to_reject_se",
    "still_running",
)
TRAJECTORY_COLUMNS = ("design", "W", "S", "A", "N", "type1_error", "mc_se", "avg_n")
REVERSAL_COLUMNS = (
    "design", "W", "S", "A", "lag", "reject_to_accept", "reject_to_accept_se",
    "accept_to_reject", "accept_to_reject_se", "total", "total_se",
    "type1_error_final", "avg_n_observed", "avg_n_final",
)
CALIBRATE_COLUMNS = ("design", "S", "A", "N", "W", "type1_error", "mc_se", "upper", "avg_n",
                     "nonmonotone", "chosen")

COLUMNS = {
    "simulate": SIMULATE_COLUMNS,
    "trajectory": TRAJECTORY_COLUMNS,
    "reversals": REVERSAL_COLUMNS,
    "calibrate": CALIBRATE_COLUMNS,
}


class OutputError(OSError):
    pass


def prepare_output_dir(path: str | Path) -> Path:
    """Create ``path`` if needed and prove it is writable."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        fd, probe = tempfile.mkstemp(dir=out, prefix=".probe-")
        os.close(fd)
        os.unlink(probe)
    except OSError as exc:
        raise OutputError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _cell(v: Any) -> str:
    if v is None:
        return "unrestricted"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _as_dict(row: Any) -> dict:
    if is_dataclass(row):
        return asdict(row)
    return dict(row)


def emit_csv(rows: Iterable[Any], columns: Sequence[str], path: str | Path,
             metadata: dict | None = None) -> Path:
    """Write ``rows`` (dataclasses or mappings) as CSV plus ``<path>.meta.json``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            d = _as_dict(row)
            writer.writerow([_cell(d.get(c)) for c in columns])
    if metadata is not None:
        meta = {"tool": "seqsgpv", "version": __version__, "schema_version": SCHEMA_VERSION,
                "columns": list(columns), **metadata}
        sidecar = path.with_name(path.name + ".meta.json")
        sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path
