"""Run configuration: INI-style text with fixed sections and keys.

Sections: [physics] (mu, kappa, nu, R, cV, delta), [grid] (nx, neta,
eta_max, dt, t_end), [outflow] (mode plus constants or expressions in t and
xi), [initial] (expressions in x and y plus the y grid), [picard] (tol,
max_iter, compat_order, on_admissibility_loss), [output] (dir,
snapshot_every, emit_plots).  Unknown sections or keys are rejected, not
ignored; a silently misspelled tolerance is worse than an error.

Closed-form values are plain Python expressions over numpy functions
(sin, cos, tan, sinh, cosh, tanh, exp, log, sqrt, abs, pi) in the variables
t, xi for outflow traces and x, y for initial profiles.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields as dc_fields
from typing import Callable, Dict, Optional

import numpy as np

from .errors import ConfigError
from .fields import Grid, OutflowSpec, Params, make_grid

_SAFE_FUNCS: Dict[str, object] = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
    "pi": np.pi,
}

_SCHEMA: Dict[str, Dict[str, str]] = {
    "physics": {"mu": "float", "kappa": "float", "nu": "float", "R": "float",
                "cV": "float", "delta": "float"},
    "grid": {"nx": "int", "neta": "int", "eta_max": "float", "dt": "float",
             "t_end": "float"},
    "outflow": {"mode": "str", "U": "expr", "Theta": "expr", "H": "expr",
                "P": "expr", "theta_star": "expr"},
    "initial": {"u1_0": "expr", "theta0": "expr", "h1_0": "expr",
                "y_max": "float", "ny": "int"},
    "picard": {"tol": "float", "max_iter": "int", "compat_order": "int",
               "on_admissibility_loss": "str"},
    "output": {"dir": "str", "snapshot_every": "int", "emit_plots": "bool"},
}

_DEFAULTS: Dict[str, Dict[str, str]] = {
    "physics": {"mu": "1.0", "kappa": "1.0", "nu": "1.0", "R": "1.0",
                "cV": "1.0", "delta": "0.05"},
    "picard": {"tol": "1e-8", "max_iter": "30", "compat_order": "1",
               "on_admissibility_loss": "abort"},
    "output": {"dir": "out", "snapshot_every": "1", "emit_plots": "false"},
}


@dataclass(frozen=True)
class RunConfig:
    """Parsed and validated configuration, keyed [section][key] -> string.

    Values stay in canonical string form so that parse -> serialize is
    idempotent; typed accessors build the solver inputs.
    """

    values: Dict[str, Dict[str, str]]

    def get(self, section: str, key: str) -> str:
        return self.values[section][key]

    def getfloat(self, section: str, key: str) -> float:
        try:
            return float(self.values[section][key])
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not a number: "
                              f"{self.values[section][key]!r}") from exc

    def getint(self, section: str, key: str) -> int:
        try:
            return int(self.values[section][key])
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not an integer: "
                              f"{self.values[section][key]!r}") from exc

    def getbool(self, section: str, key: str) -> bool:
        raw = self.values[section][key].strip().lower()
        if raw in ("true", "yes", "on", "1"):
            return True
        if raw in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"[{section}] {key}: not a boolean: {raw!r}")

    def make_params(self) -> Params:
        return Params(mu=self.getfloat("physics", "mu"),
                      kappa=self.getfloat("physics", "kappa"),
                      nu=self.getfloat("physics", "nu"),
                      R=self.getfloat("physics", "R"),
                      cV=self.getfloat("physics", "cV"),
                      delta=self.getfloat("physics", "delta"))

    def make_grid(self) -> Grid:
        return make_grid(self.getint("grid", "nx"),
                         self.getint("grid", "neta"),
                         self.getfloat("grid", "eta_max"),
                         self.getfloat("grid", "dt"),
                         self.getfloat("grid", "t_end"))

    def outflow_spec(self) -> OutflowSpec:
        mode = self.get("outflow", "mode")
        if mode == "constant":
            return OutflowSpec.constant(
                U=self.getfloat("outflow", "U"),
                Theta=self.getfloat("outflow", "Theta"),
                Hfield=self.getfloat("outflow", "H"),
                P=self.getfloat("outflow", "P"),
                theta_star=self.getfloat("outflow", "theta_star"))
        if mode == "expressions":
            def trace(key: str) -> Callable:
                fn2 = compile_expression(self.get("outflow", key), ("t", "xi"))
                return fn2
            return OutflowSpec(mode="functions", U=trace("U"),
                               Theta=trace("Theta"), Hfield=trace("H"),
                               P=trace("P"), theta_star=trace("theta_star"))
        raise ConfigError(f"[outflow] mode must be 'constant' or "
                          f"'expressions', got {mode!r}")

    def initial_profiles(self):
        """Return callables (u1_0, theta0, h1_0) of (x, y) arrays."""
        return tuple(compile_expression(self.get("initial", key), ("x", "y"))
                     for key in ("u1_0", "theta0", "h1_0"))


def compile_expression(text: str, variables: tuple) -> Callable:
    """Compile a closed-form expression over the safe namespace; the result
    broadcasts its array arguments."""
    try:
        code = compile(text, "<config>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {text!r}: {exc}") from exc
    for name in code.co_names:
        if name not in _SAFE_FUNCS and name not in variables:
            raise ConfigError(f"expression {text!r} uses unknown name {name!r}")

    def fn(*args):
        local = dict(zip(variables, args))
        out = eval(code, {"__builtins__": {}}, {**_SAFE_FUNCS, **local})
        reference = None
        for a in args:
            if isinstance(a, np.ndarray):
                reference = a if reference is None else np.broadcast_arrays(reference, a)[0]
        if reference is not None:
            out = np.broadcast_to(np.asarray(out, dtype=float), reference.shape).copy()
        return out

    return fn


def parse_config(text: str) -> RunConfig:
    """Parse INI text into a RunConfig; unknown keys raise ConfigError."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep key case: R and cV are case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"could not parse configuration: {exc}") from exc
    values: Dict[str, Dict[str, str]] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[section][key] = raw.strip()
    for section, defaults in _DEFAULTS.items():
        block = values.setdefault(section, {})
        for key, val in defaults.items():
            block.setdefault(key, val)
    for section in ("grid", "outflow", "initial"):
        if section not in values:
            raise ConfigError(f"missing required section [{section}]")
        for key in _SCHEMA[section]:
            if key not in values[section]:
                raise ConfigError(f"missing key {key!r} in section [{section}]")
    cfg = RunConfig(values=values)
    # fail fast on anything malformed, not on first use
    cfg.make_params()
    cfg.make_grid()
    cfg.outflow_spec()
    cfg.initial_profiles()
    cfg.getfloat("picard", "tol")
    cfg.getint("picard", "max_iter")
    cfg.getint("picard", "compat_order")
    if cfg.get("picard", "on_admissibility_loss") not in ("abort", "continue"):
        raise ConfigError("[picard] on_admissibility_loss must be "
                          "'abort' or 'continue'")
    cfg.getint("output", "snapshot_every")
    cfg.getbool("output", "emit_plots")
    if cfg.getint("initial", "ny") < 4:
        raise ConfigError("[initial] ny must be at least 4")
    if cfg.getfloat("initial", "y_max") <= 0:
        raise ConfigError("[initial] y_max must be positive")
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Canonical INI text; parse(serialize(cfg)) reproduces cfg exactly."""
    out = io.StringIO()
    for section in _SCHEMA:
        if section not in cfg.values:
            continue
        out.write(f"[{section}]\n")
        for key in _SCHEMA[section]:
            if key in cfg.values[section]:
                out.write(f"{key} = {cfg.values[section][key]}\n")
        out.write("\n")
    return out.getvalue()
