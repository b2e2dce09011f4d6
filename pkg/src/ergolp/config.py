"""Run configuration: a flat text file of dotted keys.

Lines are ``key = value``; blank lines and ``#`` comments are ignored.
Example::

    mode = cheeger
    domain.kind = rectangle
    domain.width = 6
    domain.height = 4
    grid.nx = 96
    grid.ny = 64
    grid.n_u = 64
    test_degree = 8
    output.svg = out/run.svg

Constraints and pins are numbered from 1: ``constraint.1.expr``,
``constraint.1.sense`` (le or eq), ``pin.1.expr``, ``pin.1.values``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ConvexPolygon, Disk, ImplicitDomain, Rectangle

MODES = ("ratio", "pinned_sweep", "cheeger", "generalized_cheeger", "double_well", "schedule")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    entries: dict
    path: str = "<memory>"
    overrides: dict = field(default_factory=dict)

    def get(self, key, default=None):
        if key in self.overrides:
            return self.overrides[key]
        return self.entries.get(key, default)

    def require(self, key):
        value = self.get(key)
        if value is None:
            raise ConfigError(f"missing required key {key!r}")
        return value

    def get_float(self, key, default=None):
        raw = self.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"key {key!r} must be a number, got {raw!r}") from None

    def get_int(self, key, default=None):
        value = self.get_float(key, default)
        if value != int(value):
            raise ConfigError(f"key {key!r} must be an integer")
        return int(value)

    @property
    def mode(self):
        mode = self.require("mode")
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        return mode

    def numbered(self, prefix):
        """Collect blocks prefix.1.*, prefix.2.*, ... as a list of dicts."""
        out = []
        k = 1
        while True:
            block = {
                key[len(f"{prefix}.{k}.") :]: val
                for key, val in self.entries.items()
                if key.startswith(f"{prefix}.{k}.")
            }
            if not block:
                break
            out.append(block)
            k += 1
        return out

    def domain(self):
        kind = self.require("domain.kind")
        if kind == "rectangle":
            return Rectangle(self.get_float("domain.width"), self.get_float("domain.height"))
        if kind == "disk":
            return Disk(self.get_float("domain.radius"))
        if kind == "polygon":
            return ConvexPolygon(parse_points(self.require("domain.vertices")))
        if kind == "implicit":
            bbox = parse_bbox(self.require("domain.bbox"))
            return ImplicitDomain(self.require("domain.expr"), bbox)
        raise ConfigError(f"unknown domain.kind {kind!r}")

    def constraints(self):
        out = []
        for block in self.numbered("constraint"):
            if "expr" not in block:
                raise ConfigError("constraint block needs an expr")
            sense = block.get("sense", "le")
            if sense not in ("le", "eq"):
                raise ConfigError(f"constraint sense must be le or eq, got {sense!r}")
            out.append((block["expr"], sense))
        return out


def parse_points(text):
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ConfigError(f"bad point {chunk!r}; expected 'x, y'")
        pts.append((float(parts[0]), float(parts[1])))
    return np.array(pts)


def parse_bbox(text):
    parts = [float(p) for p in text.replace(";", ",").split(",")]
    if len(parts) != 4:
        raise ConfigError("bbox needs four numbers: x0, x1, y0, y1")
    return (parts[0], parts[1]), (parts[2], parts[3])


def parse_values(text, count_default=41):
    """Value lattice: either 'start:stop:count' or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ConfigError(f"bad range {text!r}; expected start:stop[:count]")
        start, stop = float(parts[0]), float(parts[1])
        count = int(parts[2]) if len(parts) == 3 else count_default
        return np.linspace(start, stop, count)
    return np.array([float(p) for p in text.split(",") if p.strip()])


def parse_config_text(text, path="<memory>"):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = value
    return RunConfig(entries=entries, path=path)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config_text(text, path=str(path))
