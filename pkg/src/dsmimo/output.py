"""CSV and manifest writers for SE reports and channel diagnostics.

All floats are written with ``repr`` so reruns with the same seed produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_hash, emit_config, get_preset, PRESETS
from .engine import SEReport, aggregate_cdf

USER_COLUMNS = ("drop", "cell", "user", "model", "detector", "S", "d_l", "sinr", "se_bps_hz")
CDF_COLUMNS = ("model", "detector", "se_bps_hz", "cdf")
SUMMARY_COLUMNS = ("model", "detector", "n_samples", "mean_se_bps_hz", "likely95_se_bps_hz")

POOLING_NOTE = "CDFs pool every (drop, cell, user) sample"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _open(path: Path):
    try:
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_rows(path: Path, header, rows) -> Path:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def output_stem(preset: str, seed: int, model: str | None = None, detector: str | None = None) -> str:
    parts = [preset]
    if model:
        parts.append(model)
    if detector:
        parts.append(detector)
    parts.append(f"seed{seed}")
    return "_".join(parts)


def _single(values):
    return values[0] if len(values) == 1 else None


def emit_outputs(report: SEReport, out_dir, overrides=(), record_drops: bool = False) -> dict:
    """Write the per-user CSV, CDF CSV, summary CSV and run manifest.

    File names embed the preset and seed, plus the model / detector when the
    run has only one of them. Returns the written paths by kind.
    """
    cfg = report.config
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    models = [m.label for m in cfg.models]
    dets = sorted({k[1] for k in report.se}, key=[d.value for d in cfg.detectors].index)
    stem = output_stem(cfg.preset, cfg.master_seed, _single(models), _single(dets))
    paths = {}
    paths["users"] = _write_rows(out / f"{stem}_users.csv", USER_COLUMNS, report.rows())

    def cdf_rows():
        for (model, det), se in report.se.items():
            x, F = aggregate_cdf(se)
            for a, b in zip(x, F):
                yield model, det, a, b

    paths["cdf"] = _write_rows(out / f"{stem}_cdf.csv", CDF_COLUMNS, cdf_rows())
    paths["summary"] = _write_rows(
        out / f"{stem}_summary.csv",
        SUMMARY_COLUMNS,
        (
            (m, d, report.se[(m, d)].size, s["mean"], s["likely95"])
            for (m, d), s in report.summary().items()
        ),
    )
    run = {
        "master_seed": cfg.master_seed,
        "workers": report.workers,
        "wall_time_s": f"{report.wall_time_s:.3f}",
        "zf_exclusions": ", ".join(f"{k}:{v}" for k, v in report.zf_exclusions.items()),
        "clamped_sinr": report.clamped,
        "config_hash": config_hash(cfg),
        "preset_hash": config_hash(get_preset(cfg.preset)) if cfg.preset in PRESETS else "",
        "overrides": "; ".join(overrides),
        "pooling": POOLING_NOTE,
        "version": __version__,
    }
    paths["manifest"] = out / f"{stem}_manifest.ini"
    with _open(paths["manifest"]) as fh:
        fh.write(emit_config(cfg, run))
    if record_drops:
        paths["drops"] = out / f"{stem}_drops.json"
        with _open(paths["drops"]) as fh:
            json.dump([d.to_dict() for d in report.drops], fh)
    return paths


def write_correlation_csv(path, grid) -> Path:
    """M x M magnitude grid with antenna indices as header row and column."""
    grid = np.asarray(grid)
    M = grid.shape[0]
    return _write_rows(
        Path(path), [""] + list(range(M)), ([m] + list(grid[m]) for m in range(M))
    )


def write_fp_csv(path, angles, stats) -> Path:
    return _write_rows(Path(path), ("angle_rad", "statistic"), zip(angles, stats))


def ensure_dir(path) -> Path:
    p = Path(path)
    try:
        os.makedirs(p, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {p}: {exc.strerror or exc}") from exc
    return p
