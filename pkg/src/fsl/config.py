"""JSON config loading for spaces, operators, weights and batch runs."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baseline import digest
from .operator import SelfAdjointOperator, build_laplacian
from .space import MetricMeasureSpace, build_graph_space, build_grid_space
from .weights import Weight, constant_weight, explicit_weight, power_weight


class ConfigError(ValueError):
    pass


BUILTIN_SPACES = {
    "grid1d": {"type": "grid", "dim": 1, "side": 64, "spacing": 1 / 64, "boundary": "periodic"},
    "grid2d": {"type": "grid", "dim": 2, "side": 16, "spacing": 1 / 16, "boundary": "periodic"},
}
DEFAULT_OPERATOR = {"kind": "grid-laplacian", "normalization": "unit-speed"}
_KINDS = {"grid-laplacian": "grid", "grid": "grid", "graph-laplacian": "graph", "graph": "graph"}


def load_json(src) -> dict:
    """A dict, a builtin space name, a path, or a JSON string."""
    if src is None or isinstance(src, dict):
        return src
    s = str(src)
    if s in BUILTIN_SPACES:
        return dict(BUILTIN_SPACES[s])
    try:
        if s.lstrip().startswith("{"):
            return json.loads(s)
        return json.loads(Path(s).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {s}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{s}: invalid JSON ({e.msg} at line {e.lineno})") from e


def space_from_config(cfg) -> MetricMeasureSpace:
    cfg = load_json(cfg)
    try:
        kind = cfg.get("type", "grid")
        if kind == "grid":
            return build_grid_space(int(cfg["dim"]), int(cfg["side"]), float(cfg["spacing"]),
                                    cfg.get("boundary", "periodic"))
        if kind == "graph":
            return build_graph_space(int(cfg["n"]), cfg["edges"], cfg.get("measure"))
    except KeyError as e:
        raise ConfigError(f"space config missing field {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad space config: {e}") from e
    raise ConfigError(f"unknown space type {kind!r}")


def operator_from_config(space: MetricMeasureSpace, cfg=None) -> SelfAdjointOperator:
    cfg = load_json(cfg) or dict(DEFAULT_OPERATOR)
    kind = cfg.get("kind", "grid-laplacian")
    if kind not in _KINDS:
        raise ConfigError(f"unknown operator kind {kind!r}")
    if kind == "grid-laplacian" and space.meta.get("type") == "graph":
        kind = "graph"
    try:
        return build_laplacian(space, _KINDS[kind], cfg.get("normalization", "unit-speed"))
    except ValueError as e:
        raise ConfigError(f"bad operator config: {e}") from e


def weight_from_config(space: MetricMeasureSpace, cfg=None) -> Weight:
    cfg = load_json(cfg)
    if cfg is None:
        return constant_weight(space)
    kind = cfg.get("type")
    try:
        if kind == "constant":
            return constant_weight(space, float(cfg.get("value", 1.0)))
        if kind == "power":
            return power_weight(space, int(cfg.get("center", 0)), float(cfg["exponent"]))
        if kind == "explicit":
            vals = np.asarray(cfg["values"], dtype=np.float64)
            if vals.shape != (space.n_points,):
                raise ValueError(f"expected {space.n_points} values, got {vals.size}")
            return explicit_weight(space, vals)
    except KeyError as e:
        raise ConfigError(f"weight config missing field {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad weight config: {e}") from e
    raise ConfigError(f"unknown weight type {kind!r}")


def read_vector(path, n: int) -> np.ndarray:
    """One value per point in index order (CSV, whitespace or one per line)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ConfigError(f"input file not found: {path}") from e
    toks = text.replace(",", " ").split()
    try:
        v = np.array([float(t) for t in toks], dtype=np.float64)
    except ValueError as e:
        raise ConfigError(f"{path}: non-numeric entry") from e
    if v.size != n:
        raise ConfigError(f"{path}: expected {n} values, got {v.size}")
    return v


@dataclass
class RunConfig:
    space: dict = field(default_factory=lambda: dict(BUILTIN_SPACES["grid1d"]))
    operator: dict = field(default_factory=lambda: dict(DEFAULT_OPERATOR))
    weight: dict | None = None
    suites: list = field(default_factory=lambda: ["all"])
    samples: int = 100
    seed: int = 7
    band: int = 16
    baseline_dir: str | None = None
    report: str | None = None
    csv: str | None = None
    rebaseline: bool = False

    @classmethod
    def from_sources(cls, space=None, operator=None, weight=None, **kw) -> "RunConfig":
        cfg = cls(**kw)
        if space is not None:
            cfg.space = load_json(space)
        if operator is not None:
            cfg.operator = load_json(operator)
        if weight is not None:
            cfg.weight = load_json(weight)
        if cfg.samples < 1:
            raise ConfigError("samples must be >= 1")
        if not 8 <= cfg.band <= 32:
            raise ConfigError("band must lie in [8, 32]")
        return cfg

    @property
    def fixture(self) -> str:
        for name, c in BUILTIN_SPACES.items():
            if self.space == c:
                return name
        return "space-" + digest(self.space)

    def config_hash(self) -> str:
        d = asdict(self)
        for k in ("report", "csv", "baseline_dir", "rebaseline"):
            d.pop(k)
        return digest(d)

    def build(self):
        sp = space_from_config(self.space)
        op = operator_from_config(sp, self.operator)
        return sp, op
