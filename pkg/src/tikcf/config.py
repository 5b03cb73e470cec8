"""INI run configuration: ``[weights]``, ``[solver]`` and ``[tracker]`` sections.

Grammar (configparser, ``#`` comments, case-sensitive keys)::

    [weights]
    spatial_weight = 0.6            # plain float
    channel_weights = 1.0, 0.5      # comma-separated list
    component_weights = 1, 1; 0.5   # nested list: groups split by ';'

    [solver]
    max_iter = 200
    mode = online                   # online | auxiliary
    record_history = true

    [tracker]
    scales = 0.985, 1.0, 1.015
    mask_mode = feature             # feature | support | off

Every key is optional; missing keys keep the dataclass defaults. Unknown
sections or keys are rejected by name.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, TikcfError
from .objective import WeightConfig
from .solvers import SolverConfig
from .tracker import TrackerConfig

_SECTIONS = {"weights": WeightConfig, "solver": SolverConfig, "tracker": TrackerConfig}
_NESTED = {"component_weights", "reg_operator_weights"}


@dataclass(frozen=True)
class RunConfig:
    weights: WeightConfig = field(default_factory=WeightConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(_fmt(v) for v in value)
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(raw: str, default, name: str):
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if name in _NESTED:
        return tuple(tuple(float(x) for x in grp.split(",") if x.strip())
                     for grp in raw.split(";") if grp.strip())
    if isinstance(default, tuple):
        return tuple(float(x) for x in raw.split(",") if x.strip())
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def _line_of(text: str, section: str, key: str):
    """1-based line of ``key`` inside ``[section]``, if it can be found."""
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"^{re.escape(key)}\s*[=:]", s):
            return lineno
    return None


def dumps(cfg: RunConfig) -> str:
    out = []
    for section, cls in _SECTIONS.items():
        obj = getattr(cfg, section)
        out.append(f"[{section}]")
        out.extend(f"{f.name} = {_fmt(getattr(obj, f.name))}" for f in fields(cls))
        out.append("")
    return "\n".join(out)


def loads(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                   empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    parts = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        cls = _SECTIONS[section]
        defaults = cls()
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, raw in cp.items(section):
            where = f"{source}:{_line_of(text, section, key) or '?'}"
            if key not in known:
                raise ConfigError(f"{where}: unknown key '{key}' in [{section}]")
            try:
                kwargs[key] = _parse(raw, getattr(defaults, key), key)
            except ValueError as exc:
                raise ConfigError(f"{where}: bad value for '{key}': {exc}") from exc
        try:
            parts[section] = cls(**kwargs)
        except TikcfError as exc:
            raise ConfigError(f"{source}: [{section}] {exc}") from exc
    return RunConfig(**parts)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    return loads(text, str(path))


def save(cfg: RunConfig, path) -> None:
    Path(path).write_text(dumps(cfg))
