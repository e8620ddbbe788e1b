"""Run configuration: sectioned ``key = value`` files, environment default,
command-line overrides."""
from __future__ import annotations

import configparser
import os
import re
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Optional

from .curve import CurveTolerances
from .function import FamilyExpZn, EntireFunction, parse_function
from .grid import GridSpec
from .orbit import DEFAULT_BUDGET, Tolerances

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config_text", "ENV_VAR", "ALL_CHECKS"]

ENV_VAR = "NEWTON_BASIN_CONFIG"
ALL_CHECKS = ("holes", "unbounded", "exhaustion", "channels", "conjugation", "absorbing", "separation")


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int = 0, column: int = 0):
        where = f"{source}:{line}:{column}: " if line else f"{source}: "
        super().__init__(where + message)
        self.source = source
        self.line = line
        self.column = column


def _complex(text: str) -> complex:
    """``a,b`` or a Python complex literal such as ``0.5-1j``."""
    text = text.strip()
    if "," in text:
        re_, im = text.split(",", 1)
        return complex(float(re_), float(im))
    return complex(text.replace(" ", "").replace("i", "j"))


def _checks(text: str) -> tuple[str, ...]:
    items = tuple(t.strip() for t in text.split(",") if t.strip())
    if items == ("all",):
        return ALL_CHECKS
    bad = [t for t in items if t not in ALL_CHECKS]
    if bad:
        raise ValueError(f"unknown check(s) {', '.join(bad)}; choose from {', '.join(ALL_CHECKS)} or all")
    return items


_CURVE_FIELDS = {f.name: f for f in fields(CurveTolerances)}
_ORBIT_FIELDS = {f.name: f for f in fields(Tolerances)}


@dataclass
class RunConfig:
    function: Optional[str] = None
    family: Optional[str] = None
    n: Optional[int] = None
    center: complex = 0j
    width: float = 4.0
    height: Optional[float] = None
    cols: int = 512
    rows: Optional[int] = None
    budget: int = DEFAULT_BUDGET
    workers: Optional[int] = None
    seed: int = 0
    checks: tuple[str, ...] = ALL_CHECKS
    radius: float = 2.0
    samples: int = 1440
    t_budget: float = 10.0
    levels: int = 20
    root: Optional[complex] = None
    curve: Optional[str] = None
    out: Optional[str] = None
    report: Optional[str] = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    curve_tolerances: CurveTolerances = field(default_factory=CurveTolerances)

    # key -> (section, parser)
    KEYS = {
        "function": ("function", str),
        "family": ("function", str),
        "n": ("function", int),
        "center": ("grid", _complex),
        "width": ("grid", float),
        "height": ("grid", float),
        "cols": ("grid", int),
        "rows": ("grid", int),
        "budget": ("run", int),
        "workers": ("run", int),
        "seed": ("run", int),
        "checks": ("run", _checks),
        "radius": ("run", float),
        "samples": ("run", int),
        "t_budget": ("run", float),
        "levels": ("run", int),
        "root": ("run", _complex),
        "curve": ("outputs", str),
        "out": ("outputs", str),
        "report": ("outputs", str),
    }

    def __post_init__(self):
        if self.function is not None and self.family is not None:
            raise ConfigError("give either function or family, not both")
        if self.family is not None and self.family != "exp_zn":
            raise ConfigError(f"unknown family {self.family!r}; the only family is exp_zn")
        for name in ("width", "radius", "t_budget"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.height is not None and not self.height > 0:
            raise ConfigError("height must be positive")
        for name in ("cols", "budget", "samples"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.levels < 0:
            raise ConfigError("levels must be nonnegative")

    def make_function(self):
        if self.family is not None:
            if self.n is None:
                raise ConfigError("family exp_zn needs n")
            return FamilyExpZn(self.n)
        if self.function is None:
            raise ConfigError("no function given (use function or family)")
        return parse_function(self.function)

    def entire_function(self) -> EntireFunction:
        f = self.make_function()
        return f.expand() if isinstance(f, FamilyExpZn) else f

    def grid_spec(self) -> GridSpec:
        return GridSpec(
            self.center,
            self.width,
            self.height if self.height is not None else self.width,
            self.cols,
            self.rows if self.rows is not None else self.cols,
        )

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        for key in self.KEYS:
            v = getattr(self, key)
            if isinstance(v, complex):
                v = [v.real, v.imag]
            elif isinstance(v, tuple):
                v = list(v)
            out[key] = v
        out["tolerances"] = asdict(self.tolerances)
        out["curve_tolerances"] = asdict(self.curve_tolerances)
        return out

    def to_ini(self) -> str:
        """Config file text that loads back to an equal RunConfig."""
        sections: dict[str, list[str]] = {"function": [], "grid": [], "run": [], "outputs": [], "tolerances": []}
        for key, (section, _) in self.KEYS.items():
            v = getattr(self, key)
            if v is None:
                continue
            if isinstance(v, complex):
                v = f"{v.real!r},{v.imag!r}"
            elif isinstance(v, tuple):
                v = ",".join(v)
            elif isinstance(v, float):
                v = repr(v)
            sections[section].append(f"{key} = {v}")
        for name, value in asdict(self.tolerances).items():
            sections["tolerances"].append(f"{name} = {value!r}")
        for name, value in asdict(self.curve_tolerances).items():
            if name not in _ORBIT_FIELDS:
                sections["tolerances"].append(f"{name} = {value!r}")
        parts = []
        for name, lines in sections.items():
            if lines:
                parts.append(f"[{name}]\n" + "\n".join(lines) + "\n")
        return "\n".join(parts)

    def with_overrides(self, **values) -> "RunConfig":
        """Copy with non-None values replaced (command line over file)."""
        values = {k: v for k, v in values.items() if v is not None}
        tol_values = {k: values.pop(k) for k in list(values) if k in _ORBIT_FIELDS or k in _CURVE_FIELDS}
        # a function given at a later layer replaces a family and vice versa
        if "family" in values and "function" not in values:
            values["function"] = None
        elif "function" in values and "family" not in values:
            values["family"] = None
            values.setdefault("n", None)
        cfg = replace(self, **values)
        if tol_values:
            cfg = replace(
                cfg,
                tolerances=replace(cfg.tolerances, **{k: v for k, v in tol_values.items() if k in _ORBIT_FIELDS}),
                curve_tolerances=replace(cfg.curve_tolerances, **{k: v for k, v in tol_values.items() if k in _CURVE_FIELDS}),
            )
        return cfg


def _locate(lines: list[str], section: str, key: str) -> tuple[int, int]:
    """1-based line and column of ``key`` inside ``[section]``."""
    current = None
    for i, line in enumerate(lines, start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        m = re.match(r"(\s*)([^=:\s]+)\s*[=:]", line)
        if m and current == section and m.group(2).strip().lower() == key:
            return i, len(m.group(1)) + 1
    return 0, 0


def _value_column(lines: list[str], line: int) -> int:
    if not line:
        return 0
    m = re.match(r"\s*[^=:]+[=:]\s*", lines[line - 1])
    return m.end() + 1 if m else 1


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    """Parse config text to a dict of typed values; unknown sections or keys
    and malformed values raise ConfigError with line and column."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", 0)
        errors = getattr(exc, "errors", None)
        if errors:
            line = errors[0][0]
        raise ConfigError(str(exc).splitlines()[0], source, line, 1) from exc
    lines = text.splitlines()
    known_sections = {s for s, _ in RunConfig.KEYS.values()} | {"tolerances"}
    values: dict[str, Any] = {}
    for section in parser.sections():
        if section not in known_sections:
            line = next((i for i, l in enumerate(lines, 1) if l.strip() == f"[{section}]"), 0)
            raise ConfigError(f"unknown section [{section}]", source, line, 1)
        for key, raw in parser.items(section):
            line, col = _locate(lines, section, key)
            if section == "tolerances":
                spec = _ORBIT_FIELDS.get(key) or _CURVE_FIELDS.get(key)
                if spec is None:
                    raise ConfigError(f"unknown tolerance {key!r}", source, line, col)
                conv = int if spec.type in ("int", int) else float
            else:
                entry = RunConfig.KEYS.get(key)
                if entry is None or entry[0] != section:
                    raise ConfigError(f"unknown key {key!r} in [{section}]", source, line, col)
                conv = entry[1]
            try:
                values[key] = conv(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key}: {exc}", source, line, _value_column(lines, line)) from exc
            if section == "tolerances" and not values[key] > 0:
                raise ConfigError(f"tolerance {key} must be positive", source, line, _value_column(lines, line))
    return values


def load_config(path: Optional[str] = None, **overrides) -> RunConfig:
    """Defaults, then the config file (``path`` or $NEWTON_BASIN_CONFIG),
    then ``overrides``."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    file_values: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
        file_values = parse_config_text(text, str(path))
    try:
        cfg = RunConfig().with_overrides(**file_values)
        return cfg.with_overrides(**overrides)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), str(path) if path else "<command line>") from exc
