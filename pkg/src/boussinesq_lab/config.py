"""Run configuration: a flat ``key = value`` text format with dotted sections.

Grammar (one entry per line)::

    # comment
    section.key = value

Values are numbers, booleans (``true``/``false``), bare words, or comma
separated lists.  Lengths accept a ``pi`` multiple such as ``16pi`` or
``2*pi``.  Unknown keys are errors.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any

from .solvers import IntegratorConfig
from .spectral_ops import Grid
from .systems import CASE_REGISTRY, EXTENDED, CaseParams, validate_params, ValidationError


class ConfigError(ValueError):
    """Malformed or incomplete configuration (harness exit code 2)."""


# Representative coefficients for each registry tag: (a, b, c, d, tau).
REPRESENTATIVES: dict[int, tuple[float, float, float, float, float]] = {
    1: (-1 / 6, 2 / 3, -1 / 6, 0.0, 0.0),
    2: (0.0, 2 / 3, -1 / 3, 0.0, 0.0),
    3: (-1 / 6, 0.0, -1 / 6, 2 / 3, 0.0),
    4: (-1 / 6, 1 / 2, -1 / 6, 1 / 6, 0.0),
    5: (0.0, 1 / 2, -1 / 3, 1 / 6, 0.0),
    6: (-1 / 6, 1 / 3, -1 / 6, 1 / 3, 0.0),
    7: (0.0, 1 / 3, 0.0, 0.0, 0.0),
    8: (-1 / 3, 1 / 3, 0.0, 1 / 3, 0.0),
    9: (-1 / 3, 0.0, 0.0, 2 / 3, 0.0),
    10: (0.0, 1 / 6, 0.0, 1 / 6, 0.0),
    11: (-1 / 2, 0.0, -1 / 2, 0.0, 4 / 3),
    12: (0.0, 0.0, -1.0, 0.0, 4 / 3),
    13: (-1.0, 0.0, 0.0, 0.0, 4 / 3),
}

DATA_FAMILIES = ("gaussian_hump", "cosine_modes", "solitary_like", "random_bandlimited")
VARIABLES = ("eta_u", "eta_v")


@dataclass(frozen=True)
class CaseSection:
    family: str = "abcd"
    id: int | None = None
    a: float | None = None
    b: float | None = None
    c: float | None = None
    d: float | None = None
    tau: float | None = None
    a1: float = 0.0
    b1: float = 0.0
    c1: float = 0.0
    d1: float = 0.0
    beta_fd: float = 0.0
    variables: str = "eta_u"
    nonlinear: bool = True
    with_surface_tension: bool = False
    allow_ill_posed: bool = False


@dataclass(frozen=True)
class GridSection:
    dim: int = 1
    n: int = 256
    length: float = 2.0 * math.pi


@dataclass(frozen=True)
class DataSection:
    family: str = "gaussian_hump"
    amplitude: float = 0.5
    width: float = 1.0
    modes: tuple[int, ...] = (1,)
    seed: int = 0
    velocity_ratio: float = 0.5
    spectrum_power: float = 1.5
    kmax: float | None = None
    curl_free: bool = True


@dataclass(frozen=True)
class IntegratorSection:
    scheme: str = "rk4_integrating_factor"
    dt: float = 1e-3
    t_end: float = 1.0
    report_every: int = 10
    dealias: bool = True


@dataclass(frozen=True)
class MonitorSection:
    growth_factor: float = 16.0
    h: float = 0.1
    sobolev_index: float = 1.6


@dataclass(frozen=True)
class OutputSection:
    dir: str = "run"
    dump_fields: bool = False


@dataclass(frozen=True)
class MollifierSection:
    delta: float | None = None


@dataclass(frozen=True)
class SweepSection:
    eps: tuple[float, ...] = ()
    deltas: tuple[float, ...] = ()
    t_budget: float = 1.0
    workers: int = 1


SECTIONS = {
    "case": CaseSection,
    "grid": GridSection,
    "data": DataSection,
    "integrator": IntegratorSection,
    "monitor": MonitorSection,
    "output": OutputSection,
    "mollifier": MollifierSection,
    "sweep": SweepSection,
}


@dataclass(frozen=True)
class RunConfig:
    case: CaseSection = field(default_factory=CaseSection)
    eps: float = 0.1
    grid: GridSection = field(default_factory=GridSection)
    data: DataSection = field(default_factory=DataSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    monitor: MonitorSection = field(default_factory=MonitorSection)
    output: OutputSection = field(default_factory=OutputSection)
    mollifier: MollifierSection = field(default_factory=MollifierSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    # derived objects -------------------------------------------------------
    def params(self) -> CaseParams:
        """Validated case parameters (raises ``ValidationError``)."""
        c = self.case
        explicit = [c.a, c.b, c.c, c.d]
        if c.family in ("abcd", "bathymetry") and c.id is not None:
            if c.id not in REPRESENTATIVES:
                raise ValidationError([f"unknown registry case {c.id}"])
            a, b, cc, d, tau = REPRESENTATIVES[c.id]
            if any(x is not None for x in explicit):
                a, b, cc, d = (x if x is not None else y for x, y in zip(explicit, (a, b, cc, d)))
                tau = c.tau if c.tau is not None else tau
        else:
            a, b, cc, d = (x if x is not None else 0.0 for x in explicit)
            tau = c.tau if c.tau is not None else 0.0
        p = CaseParams(a=a, b=b, c=cc, d=d, eps=self.eps, tau=tau, family=c.family,
                       a1=c.a1, b1=c.b1, c1=c.c1, d1=c.d1, beta_fd=c.beta_fd)
        p = validate_params(p)
        if c.family == "abcd" and c.id is not None and p.case_id != str(c.id):
            raise ValidationError([f"coefficients match case {p.case_id}, not the requested case {c.id}"])
        return p

    def grid_obj(self) -> Grid:
        return Grid(self.grid.dim, self.grid.n, self.grid.length)

    def integrator_cfg(self) -> IntegratorConfig:
        i = self.integrator
        return IntegratorConfig(i.scheme, i.dt, i.t_end, i.report_every, i.dealias)

    def with_eps(self, eps: float) -> "RunConfig":
        return replace(self, eps=eps)

    def with_t_end(self, t_end: float) -> "RunConfig":
        return replace(self, integrator=replace(self.integrator, t_end=t_end))

    def with_output(self, directory: str) -> "RunConfig":
        return replace(self, output=replace(self.output, dir=directory))


_LINE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*=\s*(.*?)\s*$")
_PI = re.compile(r"^([-+0-9.eE]*)\s*\*?\s*pi$")


def _number(text: str) -> float:
    m = _PI.match(text)
    if m:
        factor = m.group(1)
        return (float(factor) if factor not in ("", "+", "-") else float(factor + "1")) * math.pi
    return float(text)


def _coerce(text: str, kind: Any, key: str) -> Any:
    kind_s = str(kind)
    try:
        if "tuple" in kind_s:
            items = [t.strip() for t in text.split(",") if t.strip()]
            conv = int if "int" in kind_s else _number
            return tuple(conv(t) for t in items)
        if "bool" in kind_s:
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if "int" in kind_s and "float" not in kind_s:
            if text.lower() in ("none", ""):
                return None
            return int(text)
        if "float" in kind_s:
            if text.lower() in ("none", ""):
                return None
            return _number(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def parse_config(text: str) -> RunConfig:
    """Parse config text; raises ``ConfigError`` on syntax errors or unknown keys."""
    values: dict[str, dict[str, Any]] = {name: {} for name in SECTIONS}
    top: dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"line {number}: expected 'key = value', got {raw!r}")
        key, value = m.group(1), m.group(2)
        if key == "eps":
            top["eps"] = _coerce(value, float, key)
            continue
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError(f"line {number}: unknown key {key!r}")
        types = {f.name: f.type for f in fields(SECTIONS[section])}
        if name not in types:
            raise ConfigError(f"line {number}: unknown key {key!r}")
        if name in values[section]:
            raise ConfigError(f"line {number}: duplicate key {key!r}")
        values[section][name] = _coerce(value, types[name], key)
    try:
        sections = {name: cls(**values[name]) for name, cls in SECTIONS.items()}
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(eps=top.get("eps", 0.1), **sections)
    if cfg.case.variables not in VARIABLES:
        raise ConfigError(f"case.variables must be one of {VARIABLES}")
    if cfg.data.family not in DATA_FAMILIES:
        raise ConfigError(f"data.family must be one of {DATA_FAMILIES}")
    return cfg


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: RunConfig) -> str:
    """Canonical text; ``parse_config(format_config(c)) == c``."""
    lines = [f"eps = {_format(cfg.eps)}"]
    for name in SECTIONS:
        section = getattr(cfg, name)
        for f in fields(section):
            value = getattr(section, f.name)
            if value is None:
                continue
            lines.append(f"{name}.{f.name} = {_format(value)}")
    return "\n".join(lines) + "\n"


def registry_description(number: int) -> str:
    for n, text, _ in CASE_REGISTRY:
        if n == number:
            return text
    return EXTENDED
