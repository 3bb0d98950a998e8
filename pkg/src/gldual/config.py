"""Flat ``key=value`` scenario files.

One key per line; ``#`` starts a comment.  Fields (``f`` and ``init``) use
``const:<v>``, ``sin:<amplitude>`` (product of ``sin(pi x_i / extent)``) or
``file:<path>`` with one value per line in node order.  Relative paths are
resolved against the config file's directory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import GLDualError, MissingRequired, ParseError, UnknownKey
from .grid import Grid, GridSpec, build_grid
from .model import ModelParams

__all__ = ["Scenario", "TASKS", "SWEEP_PARAMS", "parse_config", "load_config", "field_from_spec"]

TASKS = ("solve-primal", "verify-thm1", "verify-thm2", "verify-thm3", "verify-thm4",
         "naive-dual-diag", "sweep")
SWEEP_PARAMS = ("K", "eps", "K12", "gamma", "alpha", "beta")
REQUIRED = ("gamma", "alpha", "beta")

# key -> (parser, default)
_INT = int
_FLOAT = float
_STR = str
KEYS = {
    "dim": (_INT, 1),
    "extent": (_FLOAT, 1.0),
    "nodes": (_INT, 31),
    "gamma": (_FLOAT, None),
    "alpha": (_FLOAT, None),
    "beta": (_FLOAT, None),
    "K": (_FLOAT, 10.0),
    "eps": (_FLOAT, 0.1),
    "K12": (_FLOAT, 10.0),
    "f": (_STR, "const:0"),
    "init": (_STR, "const:0"),
    "task": (_STR, "solve-primal"),
    "sweep_task": (_STR, "verify-thm1"),
    "tol": (_FLOAT, 1e-10),
    "maxit": (_INT, 200),
    "seed": (_INT, 42),
    "radius": (_STR, "auto"),
    "nsamples": (_INT, 100),
    "npairs": (_INT, 200),
    "ndirs": (_INT, 5),
    "sweep_param": (_STR, "K"),
    "sweep_values": (_STR, ""),
}


@dataclass(frozen=True, eq=False)
class Scenario:
    grid: GridSpec
    params: ModelParams
    task: str
    init: np.ndarray
    f_spec: str = "const:0"
    init_spec: str = "const:0"
    tol: float = 1e-10
    maxit: int = 200
    seed: int = 42
    radius: float | None = None
    nsamples: int = 100
    npairs: int = 200
    ndirs: int = 5
    sweep_task: str = "verify-thm1"
    sweep_param: str = "K"
    sweep_values: tuple = ()
    source: dict = field(default_factory=dict)

    def build_grid(self) -> Grid:
        return build_grid(self.grid)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed, source={**self.source, "seed": seed})

    def with_sweep(self, param: str, values) -> "Scenario":
        values = tuple(float(v) for v in values)
        _check_sweep(param, values)
        # A config whose own task is not a sweep names the task to repeat.
        task = self.sweep_task if self.task == "sweep" else self.task
        src = {**self.source, "task": "sweep", "sweep_task": task, "sweep_param": param,
               "sweep_values": ",".join(format(v, "g") for v in values)}
        return replace(self, task="sweep", sweep_task=task, sweep_param=param,
                       sweep_values=values, source=src)

    def echo(self) -> dict:
        """Resolved settings in declared key order."""
        out = {}
        for key, (_, default) in KEYS.items():
            out[key] = self.source.get(key, default)
        return out


def field_from_spec(spec: str, grid: Grid, base: Path | None = None) -> np.ndarray:
    kind, _, arg = spec.partition(":")
    kind = kind.strip()
    if kind == "const":
        return np.full(grid.N, float(arg))
    if kind == "sin":
        out = np.full(grid.N, float(arg))
        for x in grid.coordinates():
            out = out * np.sin(np.pi * x / grid.spec.extent)
        return out
    if kind == "file":
        path = Path(arg.strip())
        if base is not None and not path.is_absolute():
            path = base / path
        values = np.loadtxt(path, dtype=float, ndmin=1)
        if values.shape != (grid.N,):
            raise ValueError(f"{path} holds {values.size} values, grid has {grid.N} nodes")
        return values
    raise ValueError(f"unknown field spec {spec!r}; use const:, sin: or file:")


def _check_sweep(param, values):
    if param not in SWEEP_PARAMS:
        raise UnknownKey(f"cannot sweep {param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    if not values:
        raise MissingRequired("sweep needs at least one value")
    if not all(math.isfinite(v) and v > 0 for v in values):
        raise ParseError(0, "sweep values must be positive")


def parse_config(text: str, base: Path | None = None) -> Scenario:
    raw: dict = {}
    lines: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ParseError(lineno, f"expected key=value, got {line!r}")
        if key not in KEYS:
            raise UnknownKey(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ParseError(lineno, f"duplicate key {key!r}")
        parser = KEYS[key][0]
        try:
            raw[key] = parser(value)
        except ValueError:
            raise ParseError(lineno, f"bad value for {key}: {value!r}") from None
        lines[key] = lineno
    for key in REQUIRED:
        if key not in raw:
            raise MissingRequired(f"missing required key {key!r}")
    get = lambda k: raw.get(k, KEYS[k][1])  # noqa: E731

    def where(k):
        return lines.get(k, 0)

    task = get("task")
    if task not in TASKS:
        raise UnknownKey(f"line {where('task')}: unknown task {task!r}")
    if get("sweep_task") not in TASKS or get("sweep_task") == "sweep":
        raise UnknownKey(f"line {where('sweep_task')}: invalid sweep_task {get('sweep_task')!r}")
    for k in ("tol", "maxit", "nsamples", "npairs", "ndirs"):
        if not get(k) > 0 and not (k in ("nsamples", "npairs") and get(k) == 0):
            raise ParseError(where(k), f"{k} must be positive")
    radius = None
    if get("radius") != "auto":
        try:
            radius = float(get("radius"))
        except ValueError:
            raise ParseError(where("radius"), "radius must be 'auto' or a number") from None
        if not radius > 0:
            raise ParseError(where("radius"), "radius must be positive")
    sweep_values: tuple = ()
    if get("sweep_values"):
        try:
            sweep_values = tuple(float(v) for v in get("sweep_values").split(","))
        except ValueError:
            raise ParseError(where("sweep_values"), "sweep_values must be comma-separated numbers") from None
    if task == "sweep":
        _check_sweep(get("sweep_param"), sweep_values)

    spec = GridSpec(get("dim"), get("extent"), get("nodes"))
    try:
        grid = build_grid(spec)
        f = field_from_spec(get("f"), grid, base)
        init = field_from_spec(get("init"), grid, base)
        params = ModelParams(get("gamma"), get("alpha"), get("beta"), get("K"), get("eps"), f, get("K12"))
    except (GLDualError, ValueError, OSError) as exc:
        raise ParseError(0, str(exc)) from None
    init.setflags(write=False)
    return Scenario(grid=spec, params=params, task=task, init=init, f_spec=get("f"),
                    init_spec=get("init"), tol=get("tol"), maxit=get("maxit"), seed=get("seed"),
                    radius=radius, nsamples=get("nsamples"), npairs=get("npairs"),
                    ndirs=get("ndirs"), sweep_task=get("sweep_task"),
                    sweep_param=get("sweep_param"), sweep_values=sweep_values, source=raw)


def load_config(path) -> Scenario:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base=path.parent)
