"""CSV/JSON persistence of runs, summaries and reports.

Floats are written with 17 significant digits so every value round-trips
exactly; undefined delay/noise samples are written as empty cells.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import CheckpointError
from .integrator import TimeSeries
from .observables import observable_track

SERIES_COLUMNS = ("t", "I1", "I2", "A1", "A2", "tau1", "tau2", "sigma1", "sigma2", "P_ground")
SIDECAR_SUFFIX = ".series.json"
SIDECAR_VERSION = 1


def fmt(x) -> str:
    x = float(x)
    return "" if not math.isfinite(x) else f"{x:.17g}"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- JSON ---------------------------------------------------------------------


def _clean(obj):
    """Make ``obj`` JSON-safe: NaN/inf become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("superradiance").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(obj, schema: str) -> None:
    jsonschema.validate(obj, load_schema(schema))


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj, schema: str | None = None) -> None:
    data = _clean(obj)
    if schema is not None:
        validate(data, schema)
    try:
        atomic_write_text(path, dumps(data))
    except OSError as exc:
        raise CheckpointError(f"cannot write {path}: {exc}") from exc


def read_json(path, schema: str | None = None):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    if schema is not None:
        try:
            validate(data, schema)
        except jsonschema.ValidationError as exc:
            raise CheckpointError(f"{path} does not match schema {schema}: {exc.message}") from exc
    return data


# -- time-series CSV ------------------------------------------------------------


def series_csv_text(series: TimeSeries) -> str:
    track = observable_track(series)
    cols = [
        series.times, series.intensity1, series.intensity2, series.area1, series.area2,
        track.tau1, track.tau2, track.sigma1, track.sigma2, series.ground_mass,
    ]
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SERIES_COLUMNS)
    for row in zip(*cols):
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_series_csv(series: TimeSeries, path) -> None:
    try:
        atomic_write_text(path, series_csv_text(series))
    except OSError as exc:
        raise CheckpointError(f"cannot write {path}: {exc}") from exc


def read_series_csv(path) -> dict[str, np.ndarray]:
    """Columns of a time-series CSV; empty cells read back as NaN."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise CheckpointError(f"{path}: empty file")
    header = tuple(rows[0])
    for i, name in enumerate(SERIES_COLUMNS):
        got = header[i] if i < len(header) else "<missing>"
        if got != name:
            raise CheckpointError(f"{path}: column {i} is {got!r}, expected {name!r}")
    if len(header) != len(SERIES_COLUMNS):
        raise CheckpointError(f"{path}: unexpected extra column {header[len(SERIES_COLUMNS)]!r}")
    data = np.empty((len(rows) - 1, len(SERIES_COLUMNS)))
    for r, row in enumerate(rows[1:]):
        if len(row) != len(SERIES_COLUMNS):
            raise CheckpointError(f"{path}: line {r + 2} has {len(row)} fields")
        try:
            data[r] = [float(v) if v != "" else math.nan for v in row]
        except ValueError as exc:
            raise CheckpointError(f"{path}: line {r + 2}: {exc}") from exc
    return {name: data[:, i] for i, name in enumerate(SERIES_COLUMNS)}


# -- checkpoints ----------------------------------------------------------------


def _stem(path) -> Path:
    path = Path(path)
    return path.with_suffix("") if path.suffix == ".csv" else path


def checkpoint(series: TimeSeries, path) -> tuple[Path, Path]:
    """Persist ``series`` as ``<stem>.csv`` plus a ``<stem>.series.json`` sidecar
    carrying the moment integrals, masses, run metadata and final distribution."""
    stem = _stem(path)
    csv_path = stem.with_name(stem.name + ".csv")
    side_path = stem.with_name(stem.name + SIDECAR_SUFFIX)
    write_series_csv(series, csv_path)
    side = {
        "version": SIDECAR_VERSION,
        "n_half": series.n_half,
        "gamma1": series.gamma1,
        "gamma2": series.gamma2,
        "init_kind": series.init_kind,
        "raw_eq2_intensity": series.raw_eq2_intensity,
        "t_end": series.t_end,
        "completed": series.completed,
        "n_steps": series.n_steps,
        "n_rejected": series.n_rejected,
        "m1_1": series.m1_1,
        "m1_2": series.m1_2,
        "m2_1": series.m2_1,
        "m2_2": series.m2_2,
        "absorbed_mass": series.absorbed_mass,
        "total_mass": series.total_mass,
        "final_distribution": series.final_distribution,
    }
    write_json(side_path, side, schema="series_sidecar")
    return csv_path, side_path


def load_checkpoint(path) -> TimeSeries:
    stem = _stem(path)
    cols = read_series_csv(stem.with_name(stem.name + ".csv"))
    side = read_json(stem.with_name(stem.name + SIDECAR_SUFFIX), schema="series_sidecar")
    n = cols["t"].size
    arrays = {}
    for key in ("m1_1", "m1_2", "m2_1", "m2_2", "absorbed_mass", "total_mass"):
        arr = np.array(side[key], dtype=float)
        if arr.size != n:
            raise CheckpointError(f"{path}: sidecar {key} has {arr.size} samples, CSV has {n}")
        arrays[key] = arr
    return TimeSeries(
        times=cols["t"],
        intensity1=cols["I1"],
        intensity2=cols["I2"],
        area1=cols["A1"],
        area2=cols["A2"],
        ground_mass=cols["P_ground"],
        final_distribution=np.array(side["final_distribution"], dtype=float),
        t_end=side["t_end"],
        completed=side["completed"],
        n_half=side["n_half"],
        gamma1=side["gamma1"],
        gamma2=side["gamma2"],
        init_kind=side["init_kind"],
        raw_eq2_intensity=side["raw_eq2_intensity"],
        n_steps=side["n_steps"],
        n_rejected=side["n_rejected"],
        **arrays,
    )
