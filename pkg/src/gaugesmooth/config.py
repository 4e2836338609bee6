"""Experiment configuration read from TOML."""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cochains import FLAVORS, LieAlgebra
from .grid import BOX, TORUS, Grid

KINDS = ("smooth", "decompose", "constants", "immerse", "stability", "curvature")
NEEDS_EXPONENT = ("smooth", "decompose", "constants", "curvature")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field or line."""


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    grid: dict = field(default_factory=dict)
    algebra: dict = field(default_factory=dict)
    exponents: dict = field(default_factory=dict)
    smoothing: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    input: dict = field(default_factory=dict)
    immersion: dict = field(default_factory=dict)
    stability: dict = field(default_factory=dict)
    source: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "grid": self.grid,
            "algebra": self.algebra,
            "exponents": self.exponents,
            "smoothing": self.smoothing,
            "tolerances": self.tolerances,
            "constants": self.constants,
            "input": self.input,
            "immersion": self.immersion,
            "stability": self.stability,
        }

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    # -- typed views ---------------------------------------------------

    def build_grid(self) -> Grid:
        g = self.grid
        n = int(g.get("n", 2))
        counts = g.get("counts", 16)
        if isinstance(counts, int):
            counts = [counts] * n
        h = float(g.get("h", 1.0 / counts[0]))
        return Grid(n, tuple(counts), h, g.get("topology", BOX), tuple(g.get("origin", ())))

    def lie_algebra(self) -> LieAlgebra:
        a = self.algebra
        return LieAlgebra(a.get("flavor", "su2"), int(a.get("m", 4 if a.get("flavor", "su2") == "su2" else 1)))

    @property
    def p(self) -> float:
        return float(self.exponents.get("p", 4.0))


def _fail(where: str, msg: str):
    raise ConfigError(f"{where}: {msg}")


def _check_table(data: dict, name: str, source: str) -> dict:
    val = data.get(name, {})
    if not isinstance(val, dict):
        _fail(f"{source}: field '{name}'", "expected a table")
    return val


def parse_config(text: str, source: str = "<config>", kind: str | None = None,
                 seed: int | None = None) -> ExperimentConfig:
    """Parse and validate; ``kind`` and ``seed`` override the file when given."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    file_kind = data.get("kind")
    if kind is not None and file_kind is not None and file_kind != kind:
        _fail(f"{source}: field 'kind'", f"file says {file_kind!r} but command is {kind!r}")
    kind = kind or file_kind
    if kind not in KINDS:
        _fail(f"{source}: field 'kind'", f"must be one of {', '.join(KINDS)}, got {kind!r}")
    known = {"kind", "seed", "grid", "algebra", "exponents", "smoothing", "tolerances",
             "constants", "input", "immersion", "stability"}
    for key in data:
        if key not in known:
            _fail(f"{source}: field '{key}'", "unknown key")
    cfg = ExperimentConfig(kind=kind, source=source)
    cfg.seed = int(seed if seed is not None else data.get("seed", 0))
    for name in sorted(known - {"kind", "seed"}):
        setattr(cfg, name, _check_table(data, name, source))

    g = cfg.grid
    if kind in ("smooth", "decompose", "constants", "curvature") and not g and not cfg.input:
        _fail(f"{source}: table 'grid'", f"required for kind {kind!r}")
    if g:
        n = g.get("n", 2)
        if n not in (2, 3):
            _fail(f"{source}: field 'grid.n'", f"must be 2 or 3, got {n}")
        if g.get("topology", BOX) not in (BOX, TORUS):
            _fail(f"{source}: field 'grid.topology'", "must be 'box' or 'torus'")
        if "h" in g and not float(g["h"]) > 0:
            _fail(f"{source}: field 'grid.h'", "must be positive")
        try:
            cfg.build_grid()
        except (ValueError, TypeError) as exc:
            _fail(f"{source}: table 'grid'", str(exc))
    if cfg.algebra:
        if cfg.algebra.get("flavor", "su2") not in FLAVORS:
            _fail(f"{source}: field 'algebra.flavor'", f"must be one of {', '.join(FLAVORS)}")
        try:
            cfg.lie_algebra()
        except ValueError as exc:
            _fail(f"{source}: table 'algebra'", str(exc))

    if kind in NEEDS_EXPONENT:
        n = int(g.get("n", 2)) if g else 2
        p = cfg.p
        if not p > n:
            _fail(
                f"{source}: field 'exponents.p'",
                f"p = {p:g} must exceed the dimension n = {n}; the smoothing theorem "
                "is stated for p > n (the critical case p = n is not covered)",
            )
        q = float(cfg.exponents.get("q", p / 2))
        if q < p / 2:
            _fail(f"{source}: field 'exponents.q'", f"q = {q:g} must be at least p/2 = {p / 2:g}")
        s = cfg.exponents.get("s", 0)
        if not isinstance(s, int) or s < 0:
            _fail(f"{source}: field 'exponents.s'", "must be a non-negative integer")
    sched = cfg.smoothing.get("schedule")
    if sched is not None:
        if not sched or any(not isinstance(e, (int, float)) or e <= 0 for e in sched):
            _fail(f"{source}: field 'smoothing.schedule'", "entries must be positive numbers")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            _fail(f"{source}: field 'smoothing.schedule'", "must be strictly decreasing")
    if kind == "stability":
        fam = cfg.stability.get("family", "oscillation")
        if fam not in ("oscillation", "gauge"):
            _fail(f"{source}: field 'stability.family'", "must be 'oscillation' or 'gauge'")
        r = float(cfg.stability.get("r", 4.0))
        if not r > 2:
            _fail(f"{source}: field 'stability.r'", "must exceed 2")
    return cfg


def load_config(path, kind: str | None = None, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()  # OSError is an I/O failure, not a config error
    return parse_config(text, str(path), kind, seed)
