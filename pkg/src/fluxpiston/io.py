"""Deterministic CSV/JSON writers and the stats-file reader.

CSV files start with ``# key: <json>`` provenance lines followed by a header.
Floats are written with ``repr`` (shortest round-trip form), so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import EnsembleStats


class SchemaError(ValueError):
    """Malformed input file."""


def provenance(**extra) -> dict:
    out = {"code_version": __version__, "numpy_version": np.__version__}
    out.update(extra)
    return out


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if not math.isfinite(value):
        raise ValueError("refusing to write a non-finite value")
    return repr(value)


def write_csv(path, columns: list[str], rows, meta: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def write_json(path, data: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    meta, lines = {}, []
    try:
        with Path(path).open() as fh:
            for line in fh:
                if line.startswith("# "):
                    key, _, value = line[2:].partition(": ")
                    try:
                        meta[key] = json.loads(value)
                    except json.JSONDecodeError as exc:
                        raise SchemaError(f"bad provenance line for '{key}'") from exc
                else:
                    lines.append(line)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(lines))
    if not rows:
        raise SchemaError(f"{path}: missing header")
    return meta, rows[0], rows[1:]


# -- ensemble statistics ------------------------------------------------------

STATS_COLUMNS = ["t", "mean_L", "var_L", "mean_L2", "snr", "snr_defined", "rate_mean", "rate_var",
                 "norm_rate_mean", "norm_mean_defined", "norm_rate_var", "norm_var_defined",
                 "rotating_fraction"]


def write_stats(path, stats: EnsembleStats, meta: dict) -> None:
    # undefined entries are written as 0 next to a 0/1 flag column
    mean_ok = np.isfinite(stats.norm_rate_mean)
    var_ok = np.isfinite(stats.norm_rate_var)
    rows = zip(stats.times, stats.mean_L, stats.var_L, stats.mean_L2,
               np.where(stats.snr_defined, stats.snr, 0.0), stats.snr_defined,
               stats.rate_mean, stats.rate_var,
               np.where(mean_ok, stats.norm_rate_mean, 0.0), mean_ok,
               np.where(var_ok, stats.norm_rate_var, 0.0), var_ok, stats.rotating_fraction)
    meta = dict(meta)
    meta["stats"] = {"chi": stats.chi, "var_offset": stats.var_offset,
                     "smoothing_window": stats.smoothing_window, "n_traj": stats.n_traj}
    write_csv(path, STATS_COLUMNS, rows, meta)


def read_stats(path) -> tuple[EnsembleStats, dict]:
    meta, header, rows = read_csv(path)
    if header != STATS_COLUMNS:
        raise SchemaError(f"{path}: unexpected columns {header}")
    if "stats" not in meta:
        raise SchemaError(f"{path}: missing 'stats' provenance")
    try:
        data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric entry") from exc
    if data.shape[0] < 2:
        raise SchemaError(f"{path}: need at least two samples")
    col = {name: data[:, i] for i, name in enumerate(header)}
    snr_ok = col["snr_defined"] > 0
    info = meta["stats"]
    stats = EnsembleStats(
        times=col["t"], mean_L=col["mean_L"], var_L=col["var_L"], mean_L2=col["mean_L2"],
        snr=np.where(snr_ok, col["snr"], np.nan), snr_defined=snr_ok,
        rate_mean=col["rate_mean"], rate_var=col["rate_var"],
        norm_rate_mean=np.where(col["norm_mean_defined"] > 0, col["norm_rate_mean"], np.nan),
        norm_rate_var=np.where(col["norm_var_defined"] > 0, col["norm_rate_var"], np.nan),
        rotating_fraction=col["rotating_fraction"], chi=float(info["chi"]),
        var_offset=float(info["var_offset"]), smoothing_window=float(info["smoothing_window"]),
        n_traj=int(info["n_traj"]),
    )
    return stats, meta
