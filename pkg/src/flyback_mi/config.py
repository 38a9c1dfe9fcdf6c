"""Scenario files: an INI-like ``key = value`` format with SI values.

Example::

    # 150 W corner
    [transformer]
    l_m = 28u
    r1 = 0.24

    [sweep]
    r1 = 0.06, 0.12, 0.24
    power = 150
    filters = CL, LCL

Every key is optional and falls back to the built-in default. Numbers accept
the engineering suffixes ``m``, ``u``, ``n`` and ``k``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace

from .analysis import DEFAULT_H_MAX
from .converter import FlybackParams, ModulatorConfig
from .filters import FilterKind, FilterParams, GridParams
from .simulator import ConfigError, SimConfig

DEFAULT_R1 = (0.06, 0.12, 0.24)
DEFAULT_POWER = (50.0, 75.0, 100.0, 125.0, 150.0)

_SUFFIX = {"": 1.0, "m": 1e-3, "u": 1e-6, "µ": 1e-6, "n": 1e-9, "k": 1e3}
_NUMBER = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*([munkµ]?)$")
_SECTION = re.compile(r"^\[\s*([A-Za-z0-9_.]+)\s*\]$")

# section -> key -> kind of value
_SCHEMA = {
    "source": {"v_dc": "float"},
    "transformer": {"l_m": "float", "n": "float", "r1": "float", "r2": "float", "v_d": "float"},
    "switches": {"r_on": "float"},
    "modulator": {"f_sw": "float", "f0": "float", "d_max": "float"},
    "filter.cl": {"l": "float", "c": "float", "r_series": "float"},
    "filter.lcl": {"l_i": "float", "l_g": "float", "c_f": "float", "c_s": "float",
                   "r_series": "float"},
    "grid": {"v_g_amp": "float", "f0": "float"},
    "sim": {"dt": "float", "t_settle": "float", "t_capture": "float", "h_max": "int"},
    "sweep": {"r1": "floats", "power": "floats", "filters": "kinds", "strict": "bool"},
}

# keys that must be strictly positive / non-negative
_POSITIVE = {"v_dc", "l_m", "n", "f_sw", "f0", "l", "c", "l_i", "l_g", "c_f", "c_s",
             "v_g_amp", "dt", "t_settle", "t_capture", "r1.sweep", "power"}
_NON_NEGATIVE = {"r1", "r2", "v_d", "r_on", "r_series", "d_max"}


@dataclass(frozen=True)
class Scenario:
    """A simulation setup plus the sweep to run over it.

    ``sim`` carries the CL filter; ``lcl`` holds the LCL component values and
    :meth:`config_for` swaps between them.
    """

    sim: SimConfig = field(default_factory=SimConfig)
    lcl: FilterParams = field(default_factory=lambda: FilterParams(kind=FilterKind.LCL))
    sweep_r1: tuple = DEFAULT_R1
    sweep_power: tuple = DEFAULT_POWER
    filters: tuple = (FilterKind.CL, FilterKind.LCL)
    h_max: int = DEFAULT_H_MAX
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sweep_r1", tuple(float(v) for v in self.sweep_r1))
        object.__setattr__(self, "sweep_power", tuple(float(v) for v in self.sweep_power))
        object.__setattr__(self, "filters", tuple(FilterKind.parse(k) for k in self.filters))
        for name in ("sweep_r1", "sweep_power", "filters"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if any(not v > 0 for v in self.sweep_r1 + self.sweep_power):
            raise ConfigError("sweep values must be > 0")
        if len(set(self.filters)) != len(self.filters):
            raise ConfigError("filters must not repeat")
        if self.sim.filter.kind is not FilterKind.CL:
            raise ConfigError("Scenario.sim must carry the CL filter")
        if self.lcl.kind is not FilterKind.LCL:
            raise ConfigError("Scenario.lcl must be an LCL filter")
        if not self.h_max >= 2:
            raise ConfigError("h_max must be >= 2")

    @property
    def cl(self) -> FilterParams:
        return self.sim.filter

    def filter_params(self, kind) -> FilterParams:
        return self.cl if FilterKind.parse(kind) is FilterKind.CL else self.lcl

    def config_for(self, kind, r1: float | None = None) -> SimConfig:
        cfg = replace(self.sim, filter=self.filter_params(kind))
        return cfg if r1 is None else cfg.with_flyback(r1=r1)


def parse_value(text: str, key: str = "value") -> float:
    """Parse a number with an optional engineering suffix (``4.5m`` -> 0.0045)."""
    m = _NUMBER.match(text.strip())
    if not m:
        raise ConfigError(f"{key}: cannot parse number {text.strip()!r}")
    return float(m.group(1)) * _SUFFIX[m.group(2)]


def _convert(kind: str, raw: str, key: str):
    if kind == "float":
        return parse_value(raw, key)
    if kind == "int":
        v = parse_value(raw, key)
        if v != int(v):
            raise ConfigError(f"{key}: expected an integer, got {raw.strip()!r}")
        return int(v)
    if kind == "bool":
        s = raw.strip().lower()
        if s not in ("true", "false", "yes", "no", "1", "0"):
            raise ConfigError(f"{key}: expected true or false, got {raw.strip()!r}")
        return s in ("true", "yes", "1")
    items = [s for s in (p.strip() for p in raw.split(",")) if s]
    if not items:
        raise ConfigError(f"{key}: empty list")
    if kind == "floats":
        return [parse_value(s, key) for s in items]
    try:
        return [FilterKind.parse(s) for s in items]
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _check_sign(section: str, key: str, value, lineno: int):
    values = value if isinstance(value, list) else [value]
    tag = f"{key}.sweep" if section == "sweep" and key == "r1" else key
    for v in values:
        if isinstance(v, float) and tag in _POSITIVE and not v > 0:
            raise ConfigError(f"line {lineno}: [{section}] {key} = {v:g}: {key} must be > 0")
        if isinstance(v, float) and tag in _NON_NEGATIVE and not v >= 0:
            raise ConfigError(f"line {lineno}: [{section}] {key} = {v:g}: {key} must be >= 0")


def _read(text: str) -> dict:
    """Tokenise into ``{section: {key: value}}``, validating names and signs."""
    out: dict = {}
    section = None
    unknown = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1).lower()
            if section not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]; "
                                  f"expected one of {', '.join(_SCHEMA)}")
            out.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value' or '[section]', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if section is None:
            raise ConfigError(f"line {lineno}: '{key}' appears before any [section]")
        if key not in _SCHEMA[section]:
            unknown.append(f"[{section}] {key} (line {lineno})")
            continue
        if key in out[section]:
            raise ConfigError(f"line {lineno}: [{section}] {key} given twice")
        try:
            value = _convert(_SCHEMA[section][key], raw, key)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: [{section}] {exc}") from None
        _check_sign(section, key, value, lineno)
        out[section][key] = value
    if unknown:
        raise ConfigError("unknown keys: " + "; ".join(unknown))
    return out


def _build(ctor, what: str, **kw):
    try:
        return ctor(**kw)
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def parse_config(text: str) -> Scenario:
    """Build a :class:`Scenario` from config text; missing keys keep defaults.

    Raises :class:`ConfigError` with the line number for syntax problems and
    the offending key for constraint violations.
    """
    d = _read(text)
    get = lambda sec: d.get(sec, {})
    base = Scenario()
    fly = _build(FlybackParams, "[source]/[transformer]/[switches]",
                 **{**_asdict(base.sim.flyback), **get("source"), **get("transformer"),
                    **get("switches")})
    grid = _build(GridParams, "[grid]", **{**_asdict(base.sim.grid), **get("grid")})
    mod_kw = {**_asdict(base.sim.modulator), **get("modulator")}
    if "f0" not in get("modulator"):
        mod_kw["f0"] = grid.f0
    mod = _build(ModulatorConfig, "[modulator]", **mod_kw)
    cl_kw, lcl_kw = dict(get("filter.cl")), dict(get("filter.lcl"))
    for kw in (cl_kw, lcl_kw):
        if "r_series" in kw:
            kw["r_l_series"] = kw.pop("r_series")
    cl = _build(lambda **kw: replace(base.cl, **kw), "[filter.cl]", **cl_kw)
    lcl = _build(lambda **kw: replace(base.lcl, **kw), "[filter.lcl]", **lcl_kw)
    sim_kw = {k: v for k, v in get("sim").items() if k != "h_max"}
    sim = _build(SimConfig, "[sim]", flyback=fly, modulator=mod, filter=cl, grid=grid,
                 **{"dt": base.sim.dt, "t_settle": base.sim.t_settle,
                    "t_capture": base.sim.t_capture, **sim_kw})
    sweep = get("sweep")
    return Scenario(
        sim=sim,
        lcl=lcl,
        sweep_r1=sweep.get("r1", base.sweep_r1),
        sweep_power=sweep.get("power", base.sweep_power),
        filters=sweep.get("filters", base.filters),
        h_max=get("sim").get("h_max", base.h_max),
        strict=sweep.get("strict", base.strict),
    )


def _asdict(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def load_config(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def serialize(scn: Scenario) -> str:
    """Config text that :func:`parse_config` maps back to an equal Scenario."""
    s, f, g = scn.sim, scn.sim.flyback, scn.sim.grid
    num = lambda v: repr(float(v))
    lst = lambda vs: ", ".join(num(v) for v in vs)
    lines = [
        "[source]", f"v_dc = {num(f.v_dc)}", "",
        "[transformer]", f"l_m = {num(f.l_m)}", f"n = {num(f.n)}", f"r1 = {num(f.r1)}",
        f"r2 = {num(f.r2)}", f"v_d = {num(f.v_d)}", "",
        "[switches]", f"r_on = {num(f.r_on)}", "",
        "[modulator]", f"f_sw = {num(s.modulator.f_sw)}", f"f0 = {num(s.modulator.f0)}",
        f"d_max = {num(s.modulator.d_max)}", "",
        "[filter.cl]", f"l = {num(scn.cl.l)}", f"c = {num(scn.cl.c)}",
        f"r_series = {num(scn.cl.r_l_series)}", "",
        "[filter.lcl]", f"l_i = {num(scn.lcl.l_i)}", f"l_g = {num(scn.lcl.l_g)}",
        f"c_f = {num(scn.lcl.c_f)}", f"c_s = {num(scn.lcl.c_s)}",
        f"r_series = {num(scn.lcl.r_l_series)}", "",
        "[grid]", f"v_g_amp = {num(g.v_g_amp)}", f"f0 = {num(g.f0)}", "",
        "[sim]", f"dt = {num(s.dt)}", f"t_settle = {num(s.t_settle)}",
        f"t_capture = {num(s.t_capture)}", f"h_max = {scn.h_max}", "",
        "[sweep]", f"r1 = {lst(scn.sweep_r1)}", f"power = {lst(scn.sweep_power)}",
        f"filters = {', '.join(k.value for k in scn.filters)}",
        f"strict = {'true' if scn.strict else 'false'}",
    ]
    return "\n".join(lines) + "\n"
