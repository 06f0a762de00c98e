"""Run configuration: TOML parsing, validation, instance construction.

One structured file describes the operator (potential, frequency, hopping)
and the numeric knobs of every subcommand.  All phases are in units of the
period 1.  A missing [instance] section falls back to the golden-mean
Maryland defaults.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ConfigError
from .model import (FrequencyVector, OperatorInstance, PotentialSpec,
                    golden_frequency, kernel_from_orders, laplacian_kernel)

_RUN_DEFAULTS = {
    "order": 8,
    "s_used": 6,
    "n_radius": 40,
    "beta": 0.12,
    "c_safe": 1.0,
    "box": 100,
    "grid": 200,
    "seed": 1234,
    "epsilons": (0.05, 0.025),
    "window": (0.02, 0.35),
    "energies": (-1.0, 0.0, 1.0),
}

_RUN_RANGES = {
    "order": (1, 16),
    "s_used": (0, 16),
    "n_radius": (1, 200),
    "beta": (1e-4, 0.999),
    "c_safe": (1e-6, 100.0),
    "box": (0, 500),
    "grid": (2, 100_000),
    "seed": (0, 2**63),
}

_FLATSEG_DEFAULTS = {"a": 0.0, "h": 0.012, "h1": 0.005}


@dataclass
class RunConfig:
    """Validated knobs plus the constructed operator instance."""

    instance: OperatorInstance
    run: dict
    flatseg: dict
    precision: str = "double"
    threads: int = 1
    out_dir: str = "artifacts"
    raw: dict = field(default_factory=dict)

    def config_hash(self):
        blob = json.dumps(_jsonable(self.raw), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def denominator_data(self):
        from .cancel import DenominatorData

        return DenominatorData(beta=self.run["beta"], c_safe=self.run["c_safe"],
                               frequency=self.instance.frequency)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (int, float, str, bool)) or obj is None:
        return obj
    return repr(obj)


def _build_potential(tbl):
    kind = tbl.get("potential", "maryland_tan")
    params = dict(tbl.get("params", {}))
    try:
        return PotentialSpec(kind, params, delta_sing=float(tbl.get("delta_sing", 1e-9)))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid potential: {exc}")


def _build_frequency(tbl, dimension):
    omega = tbl.get("omega")
    tau = tbl.get("dio_exponent")
    n_check = int(tbl.get("n_check", 50))
    try:
        if omega is None:
            return golden_frequency(dimension, n_check=n_check)
        return FrequencyVector.fit(tuple(float(w) for w in omega),
                                   dio_exponent=tau, n_check=n_check)
    except ValueError as exc:
        raise ConfigError(f"invalid frequency: {exc}")


def _build_hopping(tbl, dimension):
    kind = tbl.get("type", "laplacian")
    if kind == "laplacian":
        return laplacian_kernel(dimension)
    if kind != "table":
        raise ConfigError(f"unknown hopping type {kind!r}")
    try:
        tables = {}
        for entry in tbl["orders"]:
            j = int(entry["order"])
            tab = {}
            for e in entry["entries"]:
                val = e["value"]
                # complex amplitudes are written as strings ("0.5+0.5j")
                tab[tuple(int(c) for c in e["offset"])] = \
                    complex(val) if isinstance(val, str) else float(val)
            tables[j] = tab
        return kernel_from_orders(dimension, int(tbl.get("base_range", 1)), tables)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid hopping table: {exc}")


def load_config(path=None, overrides=None):
    """Parse and validate; `overrides` is a flat {section.key: value} map."""
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = _toml.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except _toml.TOMLDecodeError as exc:
            raise ConfigError(f"config does not parse: {exc}")
    for key, val in (overrides or {}).items():
        section, _, name = key.partition(".")
        if not name:
            raise ConfigError(f"override {key!r} must be section.key")
        raw.setdefault(section, {})[name] = val

    inst_tbl = raw.get("instance", {})
    dimension = int(inst_tbl.get("dimension", 1))
    if not 1 <= dimension <= 3:
        raise ConfigError("dimension must be 1..3")
    potential = _build_potential(inst_tbl)
    frequency = _build_frequency(inst_tbl, dimension)
    hopping = _build_hopping(raw.get("hopping", {}), dimension)
    try:
        instance = OperatorInstance(
            potential=potential,
            frequency=frequency,
            phase=float(inst_tbl.get("phase", 0.1)),
            epsilon=float(inst_tbl.get("epsilon", 0.05)),
            hopping=hopping,
            n_check=int(inst_tbl.get("n_check", 50)),
        )
    except Exception as exc:
        raise ConfigError(f"invalid instance: {exc}")

    run = dict(_RUN_DEFAULTS)
    run_tbl = raw.get("run", {})
    for k, v in run_tbl.items():
        if k not in run:
            raise ConfigError(f"unknown run knob {k!r}")
        run[k] = v
    for k, (lo, hi) in _RUN_RANGES.items():
        v = run[k]
        if not (isinstance(v, (int, float)) and lo <= v <= hi):
            raise ConfigError(f"run.{k} = {v!r} outside documented range [{lo}, {hi}]")
    run["epsilons"] = tuple(float(e) for e in run["epsilons"])
    run["window"] = tuple(float(w) for w in run["window"])
    run["energies"] = tuple(float(e) for e in run["energies"])
    if any(e < 0 for e in run["epsilons"]):
        raise ConfigError("epsilons must be nonnegative")
    if len(run["window"]) != 2 or not run["window"][0] < run["window"][1]:
        raise ConfigError("window must be (alpha, beta) with alpha < beta")

    flat = dict(_FLATSEG_DEFAULTS)
    flat.update(raw.get("flatseg", {}))

    precision = raw.get("precision", "double")
    if precision not in ("double", "high") and not isinstance(precision, int):
        raise ConfigError("precision is 'double', 'high', or a digit count")
    return RunConfig(instance=instance, run=run, flatseg=flat,
                     precision=precision, raw=raw)
