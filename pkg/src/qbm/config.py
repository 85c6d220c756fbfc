"""Run configuration.

A run is described by one JSON document. Missing fields take the defaults
below; a top-level ``coupling`` sets both baths unless a bath section gives
its own. Validation collects every problem before refusing.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .baths import FAMILIES, BathSpec
from .errors import ConfigError
from .idf import OscillatorSpec
from .numerics import FreqGrid, TimeGrid

DEFAULTS = {
    "coupling": 0.1,
    "bath_minus": {"family": "sub_ohmic_minus", "cutoff": 10.0, "omega_ir": 0.05},
    "bath_plus": {"family": "ohmic_plus", "cutoff": 10.0},
    "idf": {"mass": 1.0, "frequency": 1.0},
    "mdf": {"mass": 1.0, "frequency": 0.3},
    "thermal": {"T_F": 1.0, "T_I": 1.0},
    "grid": {"t_max": 51.2, "n_steps": 512},
    "freq_grid": {"omega_max": 200.0, "n_freq": 200000},
    "initial": {"X0": 1.0, "V0": 0.0},
    "seed": 0,
    "n_traj": 100,
    "kernel_mode": "finite",
    "out_dir": "qbm_out",
    "format": "csv",
    "plots": False,
    "save_paths": False,
    "max_dense_steps": 4096,
    "thresholds": {
        "bath_fdr": 1e-6,
        "idf_fdr": 1e-8,
        "generalized_fdr": 1e-4,
        "integral_forms": 1e-2,
        "compact_form": 2e-2,
    },
    "fault_scale": 1.0,
}

PRESETS = {
    # internal oscillator relaxes within ~7 time units, the center of mass
    # within ~30, and both stay stable for T_F in [0, 1]
    "relaxing": {
        "bath_minus": {"coupling": 0.5, "omega_ir": 0.6},
        "bath_plus": {"coupling": 0.2},
        "mdf": {"frequency": 0.9},
    },
}

_SECTIONS = ("bath_minus", "bath_plus", "idf", "mdf", "thermal", "grid", "freq_grid", "initial", "thresholds")


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated run parameters with the merged JSON document they came from."""

    bath_minus: BathSpec
    bath_plus: BathSpec
    idf: OscillatorSpec
    mdf: OscillatorSpec
    T_F: float
    T_I: float
    grid: TimeGrid
    freq_grid: FreqGrid
    X0: float
    V0: float
    seed: int
    n_traj: int
    kernel_mode: str
    out_dir: str
    format: str
    plots: bool
    save_paths: bool
    max_dense_steps: int
    thresholds: dict
    fault_scale: float
    document: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """The merged configuration document (JSON-serializable)."""
        return copy.deepcopy(self.document)

    def replace(self, **overrides) -> "RunConfig":
        return from_dict(self.document, overrides)


def _number(problems, where, value, positive=False, nonneg=False, integer=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if ok and integer:
        ok = float(value).is_integer()
    if not ok:
        problems.append(f"{where}: expected {'an integer' if integer else 'a number'}, got {value!r}")
        return None
    if not math.isfinite(value) and not (where.endswith("cutoff") and value == math.inf):
        problems.append(f"{where}: must be finite, got {value!r}")
        return None
    if positive and not value > 0:
        problems.append(f"{where}: must be positive, got {value!r}")
        return None
    if nonneg and value < 0:
        problems.append(f"{where}: must be non-negative, got {value!r}")
        return None
    return int(value) if integer else float(value)


def _bath(problems, name, sec, coupling, default_width):
    sec = dict(sec)
    fam = sec.get("family")
    if fam not in FAMILIES:
        problems.append(f"{name}.family: must be one of {list(FAMILIES)}, got {fam!r}")
        return None
    lam = _number(problems, f"{name}.coupling", sec.get("coupling", coupling), nonneg=True)
    cutoff = sec.get("cutoff", 10.0)
    cutoff = math.inf if cutoff in ("inf", None) else cutoff
    cut = _number(problems, f"{name}.cutoff", cutoff, positive=True)
    ir = _number(problems, f"{name}.omega_ir", sec.get("omega_ir", 0.0), nonneg=True)
    modes = sec.get("modes", [])
    width = sec.get("delta_width", default_width if fam == "discrete" else 0.0)
    if None in (lam, cut, ir):
        return None
    try:
        return BathSpec(fam, lam, cut, ir, tuple(tuple(m) for m in modes), float(width))
    except (ValueError, TypeError) as exc:
        problems.append(f"{name}: {exc}")
        return None


def _oscillator(problems, name, sec):
    m = _number(problems, f"{name}.mass", sec.get("mass"), positive=True)
    w = _number(problems, f"{name}.frequency", sec.get("frequency"), positive=True)
    return None if None in (m, w) else OscillatorSpec(m, w)


def from_dict(doc=None, overrides=None, preset=None) -> RunConfig:
    """Merge ``doc`` and ``overrides`` over the defaults and validate.

    Raises
    ------
    ConfigError
        Listing every invalid field.
    """
    problems = []
    doc = dict(doc or {})
    unknown = sorted(set(doc) - set(DEFAULTS) - {"preset"})
    if unknown:
        problems.append(f"unknown fields: {unknown}")
    merged = copy.deepcopy(DEFAULTS)
    preset = preset or doc.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            problems.append(f"preset: must be one of {sorted(PRESETS)}, got {preset!r}")
        else:
            merged = _merge(merged, PRESETS[preset])
            merged["preset"] = preset
    merged = _merge(merged, {k: v for k, v in doc.items() if k in DEFAULTS})
    merged = _merge(merged, {k: v for k, v in (overrides or {}).items() if v is not None})
    for sec in _SECTIONS:
        if not isinstance(merged.get(sec), dict):
            problems.append(f"{sec}: expected an object")
            merged[sec] = copy.deepcopy(DEFAULTS[sec])

    w_max = _number(problems, "freq_grid.omega_max", merged["freq_grid"].get("omega_max"), positive=True)
    n_freq = _number(problems, "freq_grid.n_freq", merged["freq_grid"].get("n_freq"), integer=True)
    fgrid = None
    if w_max is not None and n_freq is not None:
        if n_freq < 2 or n_freq % 2:
            problems.append(f"freq_grid.n_freq: must be an even integer >= 2, got {n_freq}")
        else:
            fgrid = FreqGrid(w_max, n_freq)
    # discrete spikes default to half a frequency bin
    width = fgrid.d_omega / 2 if fgrid is not None else 0.0
    coupling = merged["coupling"]
    bm = _bath(problems, "bath_minus", merged["bath_minus"], coupling, width)
    bp = _bath(problems, "bath_plus", merged["bath_plus"], coupling, width)
    idf = _oscillator(problems, "idf", merged["idf"])
    mdf = _oscillator(problems, "mdf", merged["mdf"])
    tf = _number(problems, "thermal.T_F", merged["thermal"].get("T_F"), nonneg=True)
    ti = _number(problems, "thermal.T_I", merged["thermal"].get("T_I"), nonneg=True)
    t_max = _number(problems, "grid.t_max", merged["grid"].get("t_max"), positive=True)
    n_steps = _number(problems, "grid.n_steps", merged["grid"].get("n_steps"), integer=True)
    grid = None
    if t_max is not None and n_steps is not None:
        if n_steps < 2:
            problems.append(f"grid.n_steps: must be at least 2, got {n_steps}")
        else:
            grid = TimeGrid(t_max, n_steps)
    x0 = _number(problems, "initial.X0", merged["initial"].get("X0"))
    v0 = _number(problems, "initial.V0", merged["initial"].get("V0"))
    seed = _number(problems, "seed", merged["seed"], nonneg=True, integer=True)
    if seed is not None and seed >= 2**64:
        problems.append(f"seed: must fit in 64 bits, got {seed}")
    n_traj = _number(problems, "n_traj", merged["n_traj"], integer=True)
    if n_traj is not None and n_traj < 2:
        problems.append(f"n_traj: must be at least 2, got {n_traj}")
    if merged["kernel_mode"] not in ("finite", "late"):
        problems.append(f"kernel_mode: must be 'finite' or 'late', got {merged['kernel_mode']!r}")
    if merged["format"] not in ("csv", "binary"):
        problems.append(f"format: must be 'csv' or 'binary', got {merged['format']!r}")
    if not isinstance(merged["out_dir"], str) or not merged["out_dir"]:
        problems.append("out_dir: expected a non-empty string")
    for flag in ("plots", "save_paths"):
        if not isinstance(merged[flag], bool):
            problems.append(f"{flag}: expected true or false, got {merged[flag]!r}")
    max_dense = _number(problems, "max_dense_steps", merged["max_dense_steps"], positive=True, integer=True)
    thresholds = {}
    for key, default in DEFAULTS["thresholds"].items():
        thresholds[key] = _number(problems, f"thresholds.{key}", merged["thresholds"].get(key, default),
                                  positive=True)
    extra = sorted(set(merged["thresholds"]) - set(DEFAULTS["thresholds"]))
    if extra:
        problems.append(f"thresholds: unknown identities {extra}")
    fault = _number(problems, "fault_scale", merged["fault_scale"], positive=True)
    if problems:
        raise ConfigError(problems)
    return RunConfig(bm, bp, idf, mdf, tf, ti, grid, fgrid, x0, v0, seed, n_traj, merged["kernel_mode"],
                     merged["out_dir"], merged["format"], merged["plots"], merged["save_paths"], max_dense,
                     thresholds, fault, merged)


def load(path=None, overrides=None, preset=None) -> RunConfig:
    """Read a JSON configuration file (or use defaults when ``path`` is None)."""
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must contain a JSON object")
    return from_dict(doc, overrides, preset)
