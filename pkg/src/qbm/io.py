"""Result files: CSV tables, binary dumps with JSON sidecars, and the run manifest.

CSV files start with a ``#`` line giving units, then a header row, then
values written with 17 significant digits so float64 round-trips exactly.
Binary dumps are row-major little-endian float64 with a ``.json`` sidecar
describing shape, columns, grid and parameters.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(path, payload):
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def write_table(path, columns, units, fmt="csv", meta=None):
    """Write named columns of equal length.

    Returns
    -------
    list of Path written.
    """
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    unit_line = ", ".join(f"{n} [{units.get(n, '1')}]" for n in names)
    return _write(path, data, names, unit_line, fmt, meta)


def write_matrix(path, row_axis, col_axis, values, row_name, col_name, value_name, unit, fmt="csv", meta=None):
    """Write a two-time (or two-frequency) matrix.

    In CSV form the first column holds ``row_axis`` and the header row holds
    ``col_axis``; the binary form stores only ``values`` and lists both axes
    in the sidecar.
    """
    values = np.asarray(values, dtype=float)
    path = Path(path)
    if fmt == "binary":
        meta = dict(meta or {}, row_axis=np.asarray(row_axis).tolist(), col_axis=np.asarray(col_axis).tolist(),
                    row_name=row_name, col_name=col_name)
        return _write(path, values, [value_name], f"{value_name} [{unit}]", fmt, meta)
    header = [f"{row_name}\\{col_name}"] + [FLOAT_FMT % c for c in col_axis]
    data = np.column_stack([np.asarray(row_axis, dtype=float), values])
    unit_line = f"rows {row_name} [time], columns {col_name} [time], values {value_name} [{unit}]"
    return _write(path, data, header, unit_line, fmt, meta)


def _write(path, data, header, unit_line, fmt, meta):
    path = Path(path)
    if fmt == "binary":
        target = path.with_suffix(".bin")
        arr = np.ascontiguousarray(data, dtype="<f8")
        target.write_bytes(arr.tobytes(order="C"))
        side = target.with_suffix(".json")
        dump_json(side, dict(meta or {}, shape=list(arr.shape), dtype="<f8", order="C",
                             columns=header, units=unit_line))
        return [target, side]
    target = path.with_suffix(".csv")
    with open(target, "w", newline="\n") as fh:
        fh.write(f"# {unit_line}\n")
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, fmt=FLOAT_FMT, delimiter=",")
    return [target]


def read_csv(path):
    """Header names and data of a CSV written by :func:`write_table`."""
    with open(path) as fh:
        fh.readline()
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    return header, data


def read_binary(path):
    """Array and sidecar of a binary dump."""
    path = Path(path)
    side = json.loads(path.with_suffix(".json").read_text())
    arr = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(side["shape"])
    return arr, side


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def software_versions() -> dict:
    import scipy

    from . import __version__

    return {"qbm": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def write_manifest(out_dir, command, config_echo, files, timings, reports=None, extra=None):
    """Write ``manifest.json`` describing the run and hashing every output file."""
    out_dir = Path(out_dir)
    payload = {
        "command": command,
        "config": config_echo,
        "software": software_versions(),
        "files": {Path(f).name: file_hash(f) for f in sorted(files, key=lambda p: Path(p).name)},
        "timings_seconds": timings,
    }
    if reports is not None:
        payload["fdr"] = reports
    if extra:
        payload.update(extra)
    path = out_dir / "manifest.json"
    dump_json(path, payload)
    return path
