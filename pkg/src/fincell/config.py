"""Run configuration: INI files with sections, validated key by key.

Every key lives in exactly one section. The same key names are accepted
as command-line overrides. Unset keys fall back to per-benchmark defaults
when the run starts, so a parsed file round-trips unchanged.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

BENCHMARKS = {
    "rod-linear": "linear rod: energy convergence under p-refinement and strain profiles",
    "rod-nonlinear": "Hencky rod: stress profiles or energy convergence, standard or resetting",
    "transport": "convection-diffusion through a square with circular inclusions",
    "quadrature-study": "sub-cell integration error of the penalization step versus depth",
}

FAMILIES = ("p_version", "bspline")

SECTIONS = {
    "run": ("benchmark", "output"),
    "discretization": ("families", "p", "cells", "depth", "points", "space_rule"),
    "penalty": ("q",),
    "nonlinear": ("mode", "study", "increments", "delta_u", "load", "expect"),
    "transport": ("pe", "inclusions", "samples", "grid"),
    "quadrature": ("lower", "upper"),
}
SECTION_OF = {key: sec for sec, keys in SECTIONS.items() for key in keys}

DEFAULTS = {
    "rod-linear": dict(families=FAMILIES, p=tuple(range(1, 16)), depth=20, q=8),
    "rod-nonlinear": dict(
        families=("bspline",), p=(15,), depth=20, q=12, mode="resetting", study="stress",
        increments=10, delta_u=1.0, load=False, expect="auto",
    ),
    "transport": dict(
        families=("p_version",), p=(8,), cells=8, depth=4, q=6, space_rule="trunk",
        pe=1.0, inclusions="default", samples=101, grid=41,
    ),
    "quadrature-study": dict(p=(15,), depth=10, q=8, lower=0.0, upper=1.5),
}


def _int(key, lo, hi):
    def conv(text):
        try:
            v = int(str(text).strip())
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {text!r}", key) from None
        if not lo <= v <= hi:
            raise ConfigError(f"{key} must lie in [{lo}, {hi}], got {v}", key)
        return v

    return conv


def _float(key, lo=float("-inf"), hi=float("inf")):
    def conv(text):
        try:
            v = float(str(text).strip())
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {text!r}", key) from None
        if not lo <= v <= hi:
            raise ConfigError(f"{key} must lie in [{lo}, {hi}], got {v}", key)
        return v

    return conv


def _choice(key, options):
    def conv(text):
        v = str(text).strip()
        if v not in options:
            raise ConfigError(f"{key} must be one of {', '.join(options)}, got {v!r}", key)
        return v

    return conv


def _bool(key):
    def conv(text):
        v = str(text).strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key} must be a boolean, got {text!r}", key)

    return conv


def parse_degrees(text) -> tuple[int, ...]:
    """``"1-15"``, ``"2,4,8"`` or ``"8"`` to a tuple of degrees in 1..40."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                a, b = (int(s) for s in part.split("-", 1))
                if b < a:
                    raise ValueError
                out.extend(range(a, b + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigError(f"p must be a degree, list or range, got {text!r}", "p") from None
    if not out:
        raise ConfigError("p is empty", "p")
    if any(not 1 <= v <= 40 for v in out):
        raise ConfigError(f"degrees must lie in [1, 40], got {text!r}", "p")
    return tuple(out)


def format_degrees(ps) -> str:
    ps = tuple(ps)
    if len(ps) > 1 and ps == tuple(range(ps[0], ps[-1] + 1)):
        return f"{ps[0]}-{ps[-1]}"
    return ",".join(str(v) for v in ps)


def parse_families(text) -> tuple[str, ...]:
    fams = tuple(s.strip() for s in str(text).split(",") if s.strip())
    bad = [f for f in fams if f not in FAMILIES]
    if not fams or bad:
        raise ConfigError(f"families must be a list of {', '.join(FAMILIES)}, got {text!r}", "families")
    return fams


def parse_inclusions(text):
    """``default``, ``none`` or ``x,y,r; x,y,r`` (circles in the unit square)."""
    v = str(text).strip()
    if v in ("default", "none"):
        return v
    circles = []
    for chunk in v.split(";"):
        if not chunk.strip():
            continue
        try:
            x, y, r = (float(s) for s in chunk.split(","))
        except ValueError:
            raise ConfigError(f"inclusion {chunk.strip()!r} is not 'x, y, r'", "inclusions") from None
        if r <= 0:
            raise ConfigError("inclusion radius must be positive", "inclusions")
        circles.append((x, y, r))
    return tuple(circles) if circles else "none"


def format_inclusions(v) -> str:
    if isinstance(v, str):
        return v
    return "; ".join(f"{x!r}, {y!r}, {r!r}" for x, y, r in v)


PARSERS = {
    "benchmark": _choice("benchmark", tuple(BENCHMARKS)),
    "output": lambda s: str(s).strip(),
    "families": parse_families,
    "p": parse_degrees,
    "cells": _int("cells", 1, 256),
    "depth": _int("depth", 0, 30),
    "points": _int("points", 1, 64),
    "space_rule": _choice("space_rule", ("tensor_product", "trunk")),
    "q": _int("q", 1, 16),
    "mode": _choice("mode", ("standard", "resetting")),
    "study": _choice("study", ("stress", "convergence")),
    "increments": _int("increments", 1, 1000),
    "delta_u": _float("delta_u", 0.0, 10.0),
    "load": _bool("load"),
    "expect": _choice("expect", ("auto", "success", "failure")),
    "pe": _float("pe", 0.0, 100.0),
    "inclusions": parse_inclusions,
    "samples": _int("samples", 2, 100000),
    "grid": _int("grid", 2, 2000),
    "lower": _float("lower"),
    "upper": _float("upper"),
}

FORMATTERS = {
    "families": lambda v: ", ".join(v),
    "p": format_degrees,
    "load": lambda v: "true" if v else "false",
    "inclusions": format_inclusions,
    "delta_u": repr,
    "pe": repr,
    "lower": repr,
    "upper": repr,
}


@dataclass(frozen=True)
class RunConfig:
    """One benchmark run; ``None`` means "use the benchmark default"."""

    benchmark: str
    output: str | None = None
    families: tuple | None = None
    p: tuple | None = None
    cells: int | None = None
    depth: int | None = None
    points: int | None = None
    space_rule: str | None = None
    q: int | None = None
    mode: str | None = None
    study: str | None = None
    increments: int | None = None
    delta_u: float | None = None
    load: bool | None = None
    expect: str | None = None
    pe: float | None = None
    inclusions: object = None
    samples: int | None = None
    grid: int | None = None
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        PARSERS["benchmark"](self.benchmark)

    def get(self, key: str):
        """Value of ``key`` with the benchmark default filled in."""
        v = getattr(self, key)
        return DEFAULTS[self.benchmark].get(key) if v is None else v

    def resolved(self) -> dict:
        return {f.name: self.get(f.name) for f in fields(self)}

    def with_overrides(self, overrides: dict[str, str]) -> "RunConfig":
        changes = {}
        for key, text in overrides.items():
            if key not in PARSERS:
                raise ConfigError(f"unknown key {key!r}", key)
            changes[key] = PARSERS[key](text)
        cfg = replace(self, **changes)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        lo, hi = self.get("lower"), self.get("upper")
        if lo is not None and hi is not None and not lo < hi:
            raise ConfigError("lower must be smaller than upper", "upper")
        if self.benchmark == "transport" and len(self.get("families")) != 1:
            raise ConfigError("transport runs one basis family at a time", "families")

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for sec, keys in SECTIONS.items():
            vals = {k: getattr(self, k) for k in keys if getattr(self, k) is not None}
            if vals:
                cp[sec] = {k: FORMATTERS.get(k, str)(v) for k, v in vals.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, source: str = "<config>") -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text, source)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {source}: {exc}") from None
        values = {}
        for sec in cp.sections():
            if sec not in SECTIONS:
                raise ConfigError(f"unknown section [{sec}]", sec)
            for key, raw in cp[sec].items():
                if key not in PARSERS:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]", key)
                if SECTION_OF[key] != sec:
                    raise ConfigError(f"key {key!r} belongs in [{SECTION_OF[key]}], not [{sec}]", key)
                values[key] = PARSERS[key](raw)
        if "benchmark" not in values:
            raise ConfigError("missing key 'benchmark' in [run]", "benchmark")
        cfg = cls(**values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}", "config") from None
        return cls.from_ini(text, str(path))


__all__ = ["BENCHMARKS", "RunConfig", "format_degrees", "parse_degrees"]
