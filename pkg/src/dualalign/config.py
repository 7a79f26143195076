"""YAML experiment configuration: parsing, defaults, validation with line numbers.

Every numeric constant used by an experiment is a key here; the values in
:data:`DEFAULTS` are our choices (the source experiments do not report them).
"""

import copy
import itertools
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError, InvalidSpec
from .kernels import KernelSpec
from .optimizers import OBJECTIVES, ExactProjection, OptimizerConfig, Penalties
from .pointset import GaussianBlob, GeneratorSpec, Ring, Tag, TwoClassLabeled

EXPERIMENTS = ("saddle", "synthetic_align", "toy_da")

DEFAULTS = {
    "objective": "dual_kernel",
    "objectives": None,
    "seed": 0,
    "output_dir": "out",
    "matcher": "free_points",
    "kernel": {"kind": "gaussian", "sigma": None},
    "optimizer": {
        "lr_theta": 10.0,
        "lr_disc": 0.01,
        "lr_alpha": 0.01,
        "mode": "simultaneous",
        "disc_steps": 1,
        "iterations": 5000,
        "batch_size": None,
        "disc_pretrain_steps": 0,
        "trace_every": 10,
        "lam": 10.0,
        "gp_weight": 10.0,
        "clamp_eps": 1e-6,
        "alpha_init": 0.5,
        "theta_rule": "sgd",
        "generator_loss": "nonsaturating",
        "backtracking": False,
    },
    "penalties": {"lam1": 0.01, "lam2": 0.0, "exact": False},
    "objective_overrides": {},
    "grid": None,
    "grid_cap": 200,
    "diagnostics": {"window_frac": 0.1, "tol": 0.05, "drop_filter": [0.25, 0.5]},
    "snapshots": [0, 250, 1000],
    "saddle": {"x0": 1.0, "y0": 0.0, "step": 0.1, "steps": 200},
    "data": {
        "a": {"kind": "gaussian_blob", "mean": [0.0, 0.0], "covariance": [[1.0, 0.0], [0.0, 1.0]],
              "count": 100, "seed": 1},
        "b": {"kind": "gaussian_blob", "mean": [4.0, 0.0], "covariance": [[0.5, 0.0], [0.0, 2.0]],
              "count": 100, "seed": 2},
    },
    "toy_da": {
        "source": {"kind": "two_class",
                   "class0": {"mean": [-2.0, 0.0], "covariance": [[0.4, 0.0], [0.0, 0.4]]},
                   "class1": {"mean": [2.0, 0.0], "covariance": [[0.4, 0.0], [0.0, 0.4]]},
                   "count": 200, "seed": 5},
        "target_seed": 6,
        "rotation_deg": 30.0,
        "shift": [2.0, 1.5],
    },
}

GRID_KEYS = ("lr_theta", "lr_disc", "lr_alpha", "lr_inner", "lam", "lam1")


# --- YAML with line numbers ------------------------------------------------------------------


def _construct(node, path, lines):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for knode, vnode in node.value:
            key = knode.value
            out[key] = _construct(vnode, path + (key,), lines)
            lines[path + (key,)] = knode.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, path + (i,), lines) for i, v in enumerate(node.value)]
    return _scalar(node)


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


def load_yaml(text):
    """Parse YAML into plain data plus a map from key path to 1-based line number."""
    lines = {}
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    if node is None:
        return {}, lines
    data = _construct(node, (), lines)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1)
    return data, lines


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("data",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_path(data, dotted, value):
    keys = dotted.split(".")
    cur = data
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError(f"cannot set {dotted!r}: {k!r} is not a mapping")
    cur[keys[-1]] = value


# --- typed config --------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    experiment: str
    raw: dict
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def output_dir(self):
        return self.raw["output_dir"]

    @property
    def objectives(self):
        objs = self.raw.get("objectives") or [self.raw["objective"]]
        return list(objs)

    def optimizer_for(self, objective, cell=None):
        opts = dict(self.raw["optimizer"])
        opts.update(self.raw["objective_overrides"].get(objective, {}).get("optimizer", {}))
        for k, v in (cell or {}).items():
            if k == "lr_inner":
                opts["lr_alpha" if objective.startswith("dual") else "lr_disc"] = v
            elif k != "lam1":
                opts[k] = v
        opts["seed"] = self.raw["seed"]
        opts["snapshot_at"] = tuple(int(s) for s in self.raw["snapshots"])
        opts["window_frac"] = self.raw["diagnostics"]["window_frac"]
        opts["classify_tol"] = self.raw["diagnostics"]["tol"]
        return OptimizerConfig(**opts)

    def penalties_for(self, objective, cell=None):
        pen = dict(self.raw["penalties"])
        pen.update(self.raw["objective_overrides"].get(objective, {}).get("penalties", {}))
        if cell and "lam1" in cell:
            pen["lam1"] = cell["lam1"]
        if pen.get("exact"):
            return ExactProjection()
        return Penalties(float(pen["lam1"]), float(pen["lam2"]))

    def kernel_for(self, objective, a, b):
        from .optimizers import default_kernel

        kern = dict(self.raw["kernel"])
        kern.update(self.raw["objective_overrides"].get(objective, {}).get("kernel", {}))
        if objective == "dual_linear" or kern.get("kind") == "linear":
            return KernelSpec.linear()
        return default_kernel(objective, a, b, kern.get("sigma"))

    def grid_cells(self, objective=None):
        grid = self.raw.get("grid")
        if objective is not None:
            grid = self.raw["objective_overrides"].get(objective, {}).get("grid", grid)
        if not grid:
            return [{}]
        keys = [k for k in GRID_KEYS if k in grid]
        return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


_SECTION_KEYS = {
    "optimizer": set(DEFAULTS["optimizer"]),
    "penalties": set(DEFAULTS["penalties"]),
    "kernel": {"kind", "sigma"},
    "diagnostics": set(DEFAULTS["diagnostics"]),
    "saddle": set(DEFAULTS["saddle"]),
    "toy_da": set(DEFAULTS["toy_da"]),
}


def _line(lines, *path):
    while path and path not in lines:
        path = path[:-1]
    return lines.get(path, 1)


def _blob(d, where, lines):
    try:
        blob = GaussianBlob(tuple(float(v) for v in d["mean"]),
                            tuple(tuple(float(v) for v in row) for row in d["covariance"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{'.'.join(map(str, where))}: gaussian blob needs mean and covariance ({exc})",
                          _line(lines, *where)) from None
    cov = np.asarray(blob.covariance)
    d_ = len(blob.mean)
    if cov.shape != (d_, d_) or not np.allclose(cov, cov.T):
        raise ConfigError(f"{'.'.join(map(str, where))}: covariance must be symmetric {d_}x{d_}",
                          _line(lines, *where, "covariance"))
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ConfigError(f"{'.'.join(map(str, where))}: covariance is not positive definite",
                          _line(lines, *where, "covariance")) from None
    return blob


def generator_from(d, where, lines, tag=Tag.SOURCE_A):
    if not isinstance(d, dict):
        raise ConfigError(f"{'.'.join(map(str, where))} must be a mapping", _line(lines, *where))
    kind = d.get("kind", "gaussian_blob")
    try:
        count, seed = int(d["count"]), int(d["seed"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"{'.'.join(map(str, where))}: generator needs integer count and seed",
                          _line(lines, *where)) from None
    if kind == "gaussian_blob":
        spec = _blob(d, where, lines)
    elif kind == "ring":
        spec = Ring(tuple(float(v) for v in d["center"]), float(d["radius"]), float(d.get("noise_sd", 0.0)))
    elif kind == "two_class":
        spec = TwoClassLabeled(_blob(d["class0"], where + ("class0",), lines),
                               _blob(d["class1"], where + ("class1",), lines))
    else:
        raise ConfigError(f"unknown generator kind {kind!r}", _line(lines, *where, "kind"))
    return GeneratorSpec(spec, count, seed, tag)


def _check_grid(grid, lines, where):
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("grid must be a nonempty mapping", _line(lines, *where))
    for key, vals in grid.items():
        if key not in GRID_KEYS:
            raise ConfigError(f"unknown grid axis {key!r}; allowed {GRID_KEYS}", _line(lines, *where, key))
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"grid axis {key!r} must be a nonempty list", _line(lines, *where, key))


def parse_config(text, overrides=()):
    """Build a validated :class:`ExperimentConfig` from YAML text and ``KEY=VALUE`` overrides."""
    data, lines = load_yaml(text)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, val = item.split("=", 1)
        set_path(data, key.strip(), yaml.safe_load(val))
    if "experiment" not in data:
        raise ConfigError("missing required key 'experiment'", 1)
    known = set(DEFAULTS) | {"experiment"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", _line(lines, key))
    for section, allowed in _SECTION_KEYS.items():
        sub = data.get(section)
        if sub is None:
            continue
        if not isinstance(sub, dict):
            raise ConfigError(f"{section!r} must be a mapping", _line(lines, section))
        for key in sub:
            if key not in allowed:
                raise ConfigError(f"unknown key {section}.{key}", _line(lines, section, key))
    raw = _merge(DEFAULTS, data)
    exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}", _line(lines, "experiment"))
    for obj in raw.get("objectives") or [raw["objective"]]:
        if obj not in OBJECTIVES:
            raise ConfigError(f"unknown objective {obj!r}; expected one of {OBJECTIVES}",
                              _line(lines, "objectives") if raw.get("objectives") else _line(lines, "objective"))
    for obj, ov in raw["objective_overrides"].items():
        if obj not in OBJECTIVES or not isinstance(ov, dict):
            raise ConfigError(f"bad objective override {obj!r}", _line(lines, "objective_overrides", obj))
        for section, sub in ov.items():
            if section == "grid":
                _check_grid(sub, lines, ("objective_overrides", obj, "grid"))
                continue
            if section not in ("optimizer", "penalties", "kernel") or not isinstance(sub, dict):
                raise ConfigError(f"override section {section!r} not allowed",
                                  _line(lines, "objective_overrides", obj, section))
            for key in sub:
                if key not in _SECTION_KEYS[section]:
                    raise ConfigError(f"unknown key objective_overrides.{obj}.{section}.{key}",
                                      _line(lines, "objective_overrides", obj, section, key))
    if raw["matcher"] not in ("free_points", "affine"):
        raise ConfigError(f"matcher must be free_points or affine, got {raw['matcher']!r}", _line(lines, "matcher"))
    if raw.get("grid") is not None:
        _check_grid(raw["grid"], lines, ("grid",))
    cfg = ExperimentConfig(exp, raw, lines)
    size = sum(len(cfg.grid_cells(obj)) for obj in cfg.objectives)
    if size > int(raw["grid_cap"]):
        raise ConfigError(f"grid has {size} runs, above grid_cap={raw['grid_cap']}", _line(lines, "grid"))
    # instantiate every sub-config once so errors surface before any run starts
    try:
        for obj in cfg.objectives:
            for cell in cfg.grid_cells(obj):
                cfg.optimizer_for(obj, cell)
                cfg.penalties_for(obj, cell)
        if exp == "synthetic_align":
            for side in ("a", "b"):
                if not isinstance(raw["data"], dict) or side not in raw["data"]:
                    raise ConfigError(f"data needs both 'a' and 'b' entries, missing {side!r}", _line(lines, "data"))
            generator_from(raw["data"]["a"], ("data", "a"), lines)
            generator_from(raw["data"]["b"], ("data", "b"), lines, Tag.TARGET_B)
        if exp == "toy_da":
            generator_from(raw["toy_da"]["source"], ("toy_da", "source"), lines)
    except (InvalidSpec, TypeError, ValueError) as exc:
        msg = str(exc)
        where = ("optimizer",)
        for key in _SECTION_KEYS["optimizer"]:
            if msg.startswith(key) and ("optimizer", key) in lines:
                where = ("optimizer", key)
        raise ConfigError(msg, _line(lines, *where)) from None
    return cfg


def load_config(path, overrides=()):
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, overrides)


def rotation(deg):
    t = np.deg2rad(deg)
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
