"""Strict JSON run configuration and the configured-run driver.

One JSON document describes one run.  The schema is strict: unknown keys are
rejected and every numeric range is checked, with errors naming the offending
key.  Physical parameters (grid, viscosity, final time, scheme, initial
condition, monitored exponents) have no defaults; only solver tolerances and
output cadences do.  run_from_config executes the run and persists

    config.json      the document as validated (canonical formatting)
    diagnostics.csv  one row per sampled step, fixed column set
    checkpoint_*.axf1 final state and optional periodic checkpoints
    manifest.json    grid/IC metadata and the output inventory

with no wall-clock content anywhere, so identical configs reproduce
byte-identical directories.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .diagnostics import DiagnosticsCollector, write_csv
from .evolution import TimeStepPlan, make_state, run, write_checkpoint
from .exceptions import ConfigError, NumericalBlowupError
from .grid import build_grid
from .initial_conditions import make_initial_condition

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["grid", "nu", "tfinal", "scheme", "initial_condition", "p_list"],
    "properties": {
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["nr", "nz", "r_max", "z_min", "z_max"],
            "properties": {
                "nr": {"type": "integer", "minimum": 4},
                "nz": {"type": "integer", "minimum": 4},
                "r_max": _POSITIVE,
                "z_min": _NUMBER,
                "z_max": _NUMBER,
            },
        },
        "nu": {"type": "number", "minimum": 0},
        "tfinal": {"type": "number", "minimum": 0},
        "scheme": {"enum": ["xi_semilagrangian", "omega_conservative"]},
        "initial_condition": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"type": "string"}},
        },
        "p_list": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "number", "minimum": 1},
        },
        "dt": _POSITIVE,
        "dt_max": _POSITIVE,
        "cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "theta": {"type": "number", "minimum": 0.5, "maximum": 1},
        "boundary": {"enum": ["zero", "kernel"]},
        "stream_tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-2},
        "diffusion_tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-2},
        "sample_every": {"type": "integer", "minimum": 1},
        "checkpoint_every": {"type": "integer", "minimum": 0},
        "blowup_limit": _POSITIVE,
        "reproducible": {"type": "boolean"},
        "rng_seed": {"type": "integer", "minimum": 0},
    },
}

_SCHEME_MAP = {"xi_semilagrangian": "viscous", "omega_conservative": "conservative"}


def _schema_error_path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<document root>"


def validate_config_dict(doc) -> dict:
    """Validate a raw config document against the strict schema.

    Returns the document unchanged on success; raises ConfigError naming the
    offending key otherwise.
    """
    if not isinstance(doc, dict):
        raise ConfigError(f"config must be a JSON object, got {type(doc).__name__}")
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        if err.validator == "additionalProperties":
            # pull the unexpected key's name out for a precise message
            extra = sorted(
                set(err.instance) - set(err.schema.get("properties", {}))
            )
            where = _schema_error_path(err)
            raise ConfigError(f"unknown config key {extra[0]!r} at {where}")
        raise ConfigError(f"config key {_schema_error_path(err)!r}: {err.message}")
    z_min, z_max = doc["grid"]["z_min"], doc["grid"]["z_max"]
    if not (z_min < z_max):
        raise ConfigError(f"config key 'grid.z_min': need z_min < z_max, got [{z_min}, {z_max}]")
    for p in doc["p_list"]:
        if not np.isfinite(p):
            raise ConfigError(f"config key 'p_list': exponents must be finite, got {p}")
    return doc


def load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return validate_config_dict(doc)


@dataclass
class RunConfig:
    """Typed view of a validated config document."""

    grid: dict
    nu: float
    tfinal: float
    scheme: str
    initial_condition: dict
    p_list: list
    dt: float | None = None
    dt_max: float | None = None
    cfl: float = 0.5
    theta: float = 0.5
    boundary: str = "zero"
    stream_tol: float = 1e-10
    diffusion_tol: float = 1e-12
    sample_every: int = 1
    checkpoint_every: int = 0
    blowup_limit: float = 1e6
    reproducible: bool = True
    rng_seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = validate_config_dict(doc)
        kwargs = {k: doc[k] for k in doc}
        return cls(raw=doc, **kwargs)

    def build_grid(self):
        g = self.grid
        return build_grid(g["nr"], g["nz"], g["r_max"], g["z_min"], g["z_max"])

    def time_step_plan(self) -> TimeStepPlan:
        return TimeStepPlan(
            dt=self.dt,
            dt_max=self.dt_max,
            cfl=self.cfl,
            theta=self.theta,
            scheme=_SCHEME_MAP[self.scheme],
            boundary=self.boundary,
            stream_tol=self.stream_tol,
            diffusion_tol=self.diffusion_tol,
            sample_every=self.sample_every,
            blowup_limit=self.blowup_limit,
        ).validated()


def _canonical_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run_from_config(config, out_dir: str, extra_hook=None):
    """Execute one configured run, persisting outputs under out_dir.

    config may be a validated dict or a RunConfig.  Returns (final state,
    records).  On numerical failure the partial CSV and an aborted manifest
    are flushed before the error propagates.  extra_hook(state, step), if
    given, runs at the sampling cadence after diagnostics (the sweep uses it
    to capture velocity snapshots).
    """
    if isinstance(config, dict):
        config = RunConfig.from_dict(config)
    os.makedirs(out_dir, exist_ok=True)
    grid = config.build_grid()
    xi0, ic_info = make_initial_condition(
        config.initial_condition, grid, monitor_ps=config.p_list
    )
    state = make_state(
        grid, xi0, config.nu, solve=True,
        stream_tol=config.stream_tol, boundary=config.boundary,
    )
    plan = config.time_step_plan()
    ps = list(config.p_list)
    collector = DiagnosticsCollector(ps)

    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8", newline="\n") as f:
        f.write(_canonical_json(config.raw or _config_to_doc(config)))

    checkpoints = []
    sample_count = [0]

    def hook(s, k):
        # checkpoint_every counts sampling events, not raw steps, so the two
        # cadences compose; 0 disables periodic checkpoints
        if config.checkpoint_every and k > 0:
            sample_count[0] += 1
            if sample_count[0] % config.checkpoint_every == 0:
                name = f"checkpoint_{s.step_index:06d}.axf1"
                write_checkpoint(s, os.path.join(out_dir, name))
                checkpoints.append(name)
        rec = collector(s, k)
        if extra_hook is not None:
            extra_hook(s, k)
        return rec

    def flush(records, status, error=None):
        write_csv(records, ps, os.path.join(out_dir, "diagnostics.csv"))
        manifest = {
            "status": status,
            "scheme": config.scheme,
            "grid": config.grid,
            "nu": config.nu,
            "tfinal": config.tfinal,
            "records": len(records),
            "initial_condition": config.initial_condition,
            "ic_info": ic_info,
            "checkpoints": checkpoints,
            "files": ["config.json", "diagnostics.csv"] + checkpoints,
        }
        if error is not None:
            manifest["error"] = str(error)
        with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8", newline="\n") as f:
            f.write(_canonical_json(manifest))

    try:
        final, records = run(state, config.tfinal, plan, sample_hook=hook)
    except NumericalBlowupError as exc:
        flush(exc.records or [], "aborted", error=exc)
        raise
    name = "checkpoint_final.axf1"
    write_checkpoint(final, os.path.join(out_dir, name))
    checkpoints.append(name)
    flush(records, "completed")
    return final, records


def _config_to_doc(config: RunConfig) -> dict:
    doc = {
        "grid": config.grid,
        "nu": config.nu,
        "tfinal": config.tfinal,
        "scheme": config.scheme,
        "initial_condition": config.initial_condition,
        "p_list": list(config.p_list),
    }
    for key in (
        "dt", "dt_max", "cfl", "theta", "boundary", "stream_tol", "diffusion_tol",
        "sample_every", "checkpoint_every", "blowup_limit", "reproducible", "rng_seed",
    ):
        value = getattr(config, key)
        if value is not None:
            doc[key] = value
    return doc
