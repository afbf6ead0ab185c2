"""Scenario, solver and sweep configuration.

Configuration files are INI-style with three sections::

    [scenario]
    n_tx_bs = 8
    n_sudacs = 8
    n_ues = 2
    n_subcarriers = 16
    p_bs_max_dbm = 46
    p_sudac_max_dbm = 23
    backend_gain_db = 20

    [solver]
    max_iterations = 20

    [sweep]
    variable = bs_power
    values_dbm = 30, 38, 46
    n_drops = 100
    systems = sudas, baseline_licensed

Keys ending in ``_dbm`` are converted to watts and keys ending in ``_db`` to
linear ratios while loading; everything downstream works in linear units.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import ConfigError

SWEEP_VARIABLES = ("bs_power", "n_sudacs", "n_tx_bs")
SYSTEMS = ("sudas", "baseline_licensed", "benchmark_mimo", "relaxed_upper_bound")


def dbm_to_watt(dbm):
    return 10.0 ** (dbm / 10.0) / 1000.0


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """All constants of one downlink scenario (linear units).

    ``n_streams=None`` means ``min(n_tx_bs, n_sudacs)``; ``ue_weights=None``
    means unit weight for every UE.
    """

    n_tx_bs: int = 4
    n_sudacs: int = 4
    n_ues: int = 2
    n_subcarriers: int = 16
    p_bs_max: float = dbm_to_watt(46.0)
    p_sudac_max: float = dbm_to_watt(23.0)
    n_streams: Optional[int] = None
    ue_weights: Optional[tuple] = None
    noise_power: float = 1.0
    backend_gain: float = 100.0
    frontend_gain: float = 1.0e4
    direct_gain: float = 10.0
    subcarrier_bandwidth: float = 15.0e3
    rng_seed: int = 0

    def __post_init__(self):
        if self.ue_weights is not None:
            object.__setattr__(self, "ue_weights", tuple(float(w) for w in self.ue_weights))
        self.validate()

    @property
    def num_streams(self) -> int:
        if self.n_streams is None:
            return min(self.n_tx_bs, self.n_sudacs)
        return self.n_streams

    @property
    def weights(self) -> tuple:
        if self.ue_weights is None:
            return (1.0,) * self.n_ues
        return self.ue_weights

    @property
    def sudas_budget(self) -> float:
        """Total SUDAS power allowance ``M * P_max``."""
        return self.n_sudacs * self.p_sudac_max

    def validate(self):
        for name in ("n_tx_bs", "n_sudacs", "n_ues", "n_subcarriers"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"must be a positive integer, got {value!r}", f"scenario.{name}")
        if self.n_streams is not None:
            if not isinstance(self.n_streams, int) or self.n_streams < 1:
                raise ConfigError(
                    f"must be a positive integer, got {self.n_streams!r}", "scenario.n_streams"
                )
            limit = min(self.n_tx_bs, self.n_sudacs)
            if self.n_streams > limit:
                raise ConfigError(
                    f"n_streams={self.n_streams} exceeds min(n_tx_bs, n_sudacs)={limit}; "
                    "the diagonalizing precoders need rank(P) = rank(F) = n_streams "
                    "<= min(rank H_BS->SUDAS, rank H_SUDAS->UE)",
                    "scenario.n_streams",
                )
        # zero budgets and zero gains are allowed: they describe dead links
        for name in ("p_bs_max", "p_sudac_max", "backend_gain", "frontend_gain", "direct_gain"):
            value = getattr(self, name)
            if not value >= 0.0 or value == float("inf"):
                raise ConfigError(f"must be finite and >= 0, got {value!r}", f"scenario.{name}")
        for name in ("noise_power", "subcarrier_bandwidth"):
            value = getattr(self, name)
            if not 0.0 < value < float("inf"):
                raise ConfigError(f"must be finite and > 0, got {value!r}", f"scenario.{name}")
        if self.ue_weights is not None:
            if len(self.ue_weights) != self.n_ues:
                raise ConfigError(
                    f"expected {self.n_ues} weights, got {len(self.ue_weights)}",
                    "scenario.ue_weights",
                )
            if any(not 0.0 < w < float("inf") for w in self.ue_weights):
                raise ConfigError("weights must be finite and > 0", "scenario.ue_weights")

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SolverParams:
    """Controls for the alternating optimization loop."""

    max_iterations: int = 20
    convergence_eps: float = 1e-5
    dual_search_tolerance: float = 1e-9
    dual_bracket_max: float = 1e12

    def __post_init__(self):
        if not isinstance(self.max_iterations, int) or self.max_iterations < 1:
            raise ConfigError("must be an integer >= 1", "solver.max_iterations")
        for name in ("convergence_eps", "dual_search_tolerance", "dual_bracket_max"):
            if not getattr(self, name) > 0.0:
                raise ConfigError("must be > 0", f"solver.{name}")


@dataclass(frozen=True)
class SweepSpec:
    """One Monte-Carlo sweep over a single scenario variable.

    ``values`` are linear (watts for ``bs_power``, counts otherwise).
    """

    variable: str
    values: tuple
    n_drops: int = 100
    base_config: SystemConfig = field(default_factory=SystemConfig)
    systems: tuple = ("sudas", "baseline_licensed")

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "systems", tuple(self.systems))
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(
                f"unknown sweep variable {self.variable!r}, expected one of {SWEEP_VARIABLES}",
                "sweep.variable",
            )
        if not self.values:
            raise ConfigError("must not be empty", "sweep.values")
        if list(self.values) != sorted(self.values):
            raise ConfigError("must be sorted ascending", "sweep.values")
        if not isinstance(self.n_drops, int) or self.n_drops < 1:
            raise ConfigError("must be an integer >= 1", "sweep.n_drops")
        if not self.systems:
            raise ConfigError("must not be empty", "sweep.systems")
        for name in self.systems:
            if name not in SYSTEMS:
                raise ConfigError(f"unknown system {name!r}, expected one of {SYSTEMS}", "sweep.systems")

    def config_for(self, value) -> SystemConfig:
        """Base config with the swept variable set to ``value``."""
        if self.variable == "bs_power":
            return self.base_config.replace(p_bs_max=float(value))
        if self.variable == "n_sudacs":
            return self.base_config.replace(n_sudacs=int(value))
        return self.base_config.replace(n_tx_bs=int(value))


# ---------------------------------------------------------------------------
# file format

_INT_KEYS = {"n_tx_bs", "n_sudacs", "n_ues", "n_subcarriers", "n_streams", "rng_seed"}
_FLOAT_KEYS = {
    "p_bs_max", "p_sudac_max", "noise_power", "backend_gain", "frontend_gain",
    "direct_gain", "subcarrier_bandwidth",
}
_REQUIRED_SCENARIO = ("n_tx_bs", "n_sudacs", "n_ues", "n_subcarriers", "p_bs_max", "p_sudac_max")
_SOLVER_TYPES = {
    "max_iterations": int,
    "convergence_eps": float,
    "dual_search_tolerance": float,
    "dual_bracket_max": float,
}
_SECTIONS = ("scenario", "solver", "sweep")


def _parse_scalar(raw, kind, key):
    try:
        if kind is int:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected {kind.__name__}, got {raw!r}", key) from None


def _parse_list(raw, kind, key):
    items = [item.strip() for item in raw.split(",") if item.strip()]
    return tuple(_parse_scalar(item, kind, key) for item in items)


def _unit_key(section, name):
    """Split a key into (base name, converter)."""
    if name.endswith("_dbm"):
        return name[:-4], dbm_to_watt
    if name.endswith("_db"):
        return name[:-3], db_to_linear
    return name, None


def apply_overrides(parser: configparser.ConfigParser, overrides: Sequence[str]):
    """Apply ``key=value`` or ``section.key=value`` strings to ``parser``."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        if "." in key:
            section, name = key.split(".", 1)
        else:
            name = key
            base, _ = _unit_key(None, name)
            if base in _INT_KEYS | _FLOAT_KEYS or base == "ue_weights":
                section = "scenario"
            elif name in _SOLVER_TYPES:
                section = "solver"
            elif name in ("variable", "values", "values_dbm", "n_drops", "systems"):
                section = "sweep"
            else:
                raise ConfigError("unknown configuration key", key)
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section {section!r}", key)
        if not parser.has_section(section):
            parser.add_section(section)
        # a linear override must beat a dB entry in the file and vice versa
        base, _ = _unit_key(section, name)
        for variant in (base, base + "_db", base + "_dbm"):
            if variant != name and parser.has_option(section, variant):
                parser.remove_option(section, variant)
        parser.set(section, name, value)


def _read_scenario(items) -> SystemConfig:
    values = {}
    for name, raw in items:
        key = f"scenario.{name}"
        base, convert = _unit_key("scenario", name)
        if base in values:
            raise ConfigError("given more than once (linear and dB forms)", key)
        if base == "ue_weights":
            if convert is not None:
                raise ConfigError("weights have no dB form", key)
            values[base] = _parse_list(raw, float, key)
        elif base in _INT_KEYS:
            if convert is not None:
                raise ConfigError("integer key has no dB form", key)
            values[base] = _parse_scalar(raw, int, key)
        elif base in _FLOAT_KEYS:
            value = _parse_scalar(raw, float, key)
            values[base] = convert(value) if convert else value
        else:
            raise ConfigError("unknown configuration key", key)
    for name in _REQUIRED_SCENARIO:
        if name not in values:
            raise ConfigError("missing required key", f"scenario.{name}")
    return SystemConfig(**values)


def _read_solver(items) -> SolverParams:
    values = {}
    for name, raw in items:
        key = f"solver.{name}"
        if name not in _SOLVER_TYPES:
            raise ConfigError("unknown configuration key", key)
        values[name] = _parse_scalar(raw, _SOLVER_TYPES[name], key)
    return SolverParams(**values)


def _read_sweep(items, base_config) -> SweepSpec:
    raw = dict(items)
    unknown = set(raw) - {"variable", "values", "values_dbm", "n_drops", "systems"}
    if unknown:
        raise ConfigError("unknown configuration key", f"sweep.{sorted(unknown)[0]}")
    if "variable" not in raw:
        raise ConfigError("missing required key", "sweep.variable")
    variable = raw["variable"].strip()
    if "values" in raw and "values_dbm" in raw:
        raise ConfigError("given more than once (linear and dB forms)", "sweep.values")
    if "values_dbm" in raw:
        if variable != "bs_power":
            raise ConfigError("only bs_power values have a dBm form", "sweep.values_dbm")
        values = tuple(dbm_to_watt(v) for v in _parse_list(raw["values_dbm"], float, "sweep.values_dbm"))
    elif "values" in raw:
        kind = float if variable == "bs_power" else int
        values = _parse_list(raw["values"], kind, "sweep.values")
    else:
        raise ConfigError("missing required key", "sweep.values")
    kwargs = {"variable": variable, "values": values, "base_config": base_config}
    if "n_drops" in raw:
        kwargs["n_drops"] = _parse_scalar(raw["n_drops"], int, "sweep.n_drops")
    if "systems" in raw:
        kwargs["systems"] = tuple(s.strip() for s in raw["systems"].split(",") if s.strip())
    return SweepSpec(**kwargs)


def parse_config(text: str, overrides: Sequence[str] = ()):
    """Parse configuration text.

    Returns
    -------
    (SystemConfig, SolverParams, SweepSpec or None)
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", section)
    apply_overrides(parser, overrides)
    if not parser.has_section("scenario"):
        raise ConfigError("missing [scenario] section", "scenario")
    system = _read_scenario(parser.items("scenario"))
    solver = _read_solver(parser.items("solver")) if parser.has_section("solver") else SolverParams()
    sweep = _read_sweep(parser.items("sweep"), system) if parser.has_section("sweep") else None
    return system, solver, sweep


def load_config(path, overrides: Sequence[str] = ()):
    """Read and validate a configuration file; see :func:`parse_config`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, overrides)


def dump_config(system: SystemConfig, solver: Optional[SolverParams] = None,
                sweep: Optional[SweepSpec] = None) -> str:
    """Serialize to the file format using linear keys (lossless round trip)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser["scenario"] = {}
    for f in dataclasses.fields(SystemConfig):
        value = getattr(system, f.name)
        if value is None:
            continue
        if f.name == "ue_weights":
            parser["scenario"][f.name] = ", ".join(repr(w) for w in value)
        else:
            parser["scenario"][f.name] = repr(value)
    if solver is not None:
        parser["solver"] = {f.name: repr(getattr(solver, f.name)) for f in dataclasses.fields(SolverParams)}
    if sweep is not None:
        parser["sweep"] = {
            "variable": sweep.variable,
            "values": ", ".join(repr(v) for v in sweep.values),
            "n_drops": repr(sweep.n_drops),
            "systems": ", ".join(sweep.systems),
        }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
