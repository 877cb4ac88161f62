"""CSV/JSON ingestion and export for samples, estimates, bands and configs."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import jsonschema
import numpy as np

from .bandwidth import BandwidthPlan
from .confidence import ConfidenceBand
from .estimators import Grid, GridEstimate
from .kernels import KernelSpec

__all__ = [
    "InputError",
    "read_sample_csv",
    "write_estimate",
    "read_estimate",
    "write_band",
    "read_band_csv",
    "load_experiment_config",
    "CONFIG_SCHEMA",
]


class InputError(ValueError):
    """Malformed user input (files, configs)."""


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_sample_csv(path, d: int | None = None) -> np.ndarray:
    """Observations in file order, one per row; a non-numeric first row is a header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not cells or all(c == "" for c in cells):
                continue
            if lineno == 1 and not all(_is_number(c) for c in cells):
                continue
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                raise InputError(f"line {lineno}: non-numeric value in {row!r}") from None
            if not np.all(np.isfinite(vals)):
                raise InputError(f"line {lineno}: non-finite value")
            if rows and len(vals) != len(rows[0]):
                raise InputError(f"line {lineno}: expected {len(rows[0])} columns, got {len(vals)}")
            if d is not None and len(vals) != d:
                raise InputError(f"line {lineno}: expected dimension {d}, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise InputError("no observations")
    return np.array(rows, dtype=float)


def _grid_columns(grid: Grid):
    return [f"x{j + 1}" for j in range(grid.d)]


def write_estimate(state: GridEstimate, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "estimate.csv", out / "estimate.json"
    pts = state.grid.points()
    table = np.column_stack([pts, state.values.ravel()])
    header = ",".join(_grid_columns(state.grid) + ["value"])
    np.savetxt(csv_path, table, delimiter=",", fmt="%.17g", header=header, comments="")
    meta = state.metadata() | {"values_file": csv_path.name}
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def _read_table(path, ncols: int) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != ncols:
        raise InputError(f"{path}: expected {ncols} columns, got {data.shape[1]}")
    return data


def read_estimate(json_path) -> GridEstimate:
    """Rebuild a GridEstimate from estimate.json and the CSV it names."""
    json_path = Path(json_path)
    meta = json.loads(json_path.read_text())
    grid = Grid.from_dict(meta["domain_box"])
    data = _read_table(json_path.parent / meta.get("values_file", "estimate.csv"), grid.d + 1)
    pts = grid.points()
    if data.shape[0] != pts.shape[0] or not np.allclose(data[:, :grid.d], pts, rtol=0, atol=1e-12):
        raise InputError("grid mismatch: estimate values do not lie on the grid in the metadata")
    return GridEstimate(grid, BandwidthPlan.from_dict(meta["plan"]),
                        KernelSpec.from_dict(meta["kernel"]), values=data[:, grid.d],
                        n=int(meta["n"]))


def write_band(band: ConfidenceBand, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "band.csv", out / "band.json"
    table = np.column_stack([band.grid.points(), band.lower.ravel(), band.estimate.ravel(),
                             band.upper.ravel()])
    header = ",".join(_grid_columns(band.grid) + ["lower", "estimate", "upper"])
    np.savetxt(csv_path, table, delimiter=",", fmt="%.17g", header=header, comments="")
    json_path.write_text(band.to_json() + "\n")
    return csv_path, json_path


def read_band_csv(path, d: int) -> dict:
    data = _read_table(path, d + 3)
    return {"points": data[:, :d], "lower": data[:, d], "estimate": data[:, d + 1],
            "upper": data[:, d + 2]}


_POS = {"type": "number", "exclusiveMinimum": 0}
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": ["rate", "tail", "coverage", "compare"]},
        "density": {
            "type": "object",
            "properties": {
                "family": {"enum": ["gaussian", "gaussian_mixture", "smooth_bump"]},
                "d": {"type": "integer", "minimum": 1},
                "mu": {"type": "number"},
                "sigma": _POS,
                "weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "sigmas": {"type": "array", "items": _POS},
                "smoothness": {"type": "integer", "minimum": 1},
            },
        },
        "plan": {
            "type": "object",
            "required": ["beta"],
            "properties": {"beta": _POS, "d": {"type": "integer", "minimum": 1}, "c1": _POS},
        },
        "kernel": {"type": "object"},
        "domain": {
            "type": "object",
            "properties": {"lower": {"type": "array", "items": {"type": "number"}},
                           "upper": {"type": "array", "items": {"type": "number"}}},
        },
        "n": {"type": "integer", "minimum": 2},
        "n_list": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 4},
        "replicates": {"type": "integer", "minimum": 1},
        "calib_reps": {"type": "integer", "minimum": 100},
        "holdout_reps": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "centered": {"type": "boolean"},
        "grid_step": _POS,
        "grid_step_factor": _POS,
        "estimator": {"enum": ["ww", "truth", "power_law"]},
        "power_law_exponent": {"type": "number"},
        "envelope_confidence": {"type": ["number", "null"], "exclusiveMinimum": 0,
                                "exclusiveMaximum": 1},
        "reach": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "transfer_n": {"type": "integer", "minimum": 2},
        "p": {"type": "number", "minimum": 1},
        "L": _POS,
        "workers": {"type": "integer", "minimum": 1},
    },
    "allOf": [
        {"if": {"properties": {"experiment": {"const": "rate"}}},
         "then": {"required": ["n_list"]}},
        {"if": {"properties": {"experiment": {"enum": ["tail", "coverage", "compare"]}}},
         "then": {"required": ["n"]}},
    ],
}


def validate_config(config: dict) -> dict:
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(config),
                    key=lambda e: list(e.absolute_path))
    if errors:
        msgs = ["/".join(str(p) for p in e.absolute_path) + ": " + e.message if e.absolute_path
                else e.message for e in errors]
        raise InputError("invalid config: " + "; ".join(msgs))
    return config


def load_experiment_config(path) -> dict:
    try:
        config = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return validate_config(config)
