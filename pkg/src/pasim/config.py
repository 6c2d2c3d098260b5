"""Experiment configuration: YAML schema, validation, and named presets.

A configuration document is a nested mapping; every key has a typed
default, unknown or mistyped keys are rejected with the offending key
path. Physical constants (wavelength, fiber parameters, baud rate) are
pinned in the schema defaults.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .dsp import BpsConfig
from .fiber import FiberSpanParams, LinkConfig, StepPolicy
from .frontend import GridPlan

# schema leaves: (type tag, default). Type tags: int, float, bool, str,
# opt_float, opt_str, list[int], list[float], list[str].
_SCHEMA = {
    "master_seed": ("int", 20230817),
    "trellis_cache_dir": ("opt_str", "~/.cache/pasim"),
    "grid": {
        "n_channels": ("int", 3),
        "baud_rate_gbaud": ("float", 41.67),
        "channel_spacing_ghz": ("float", 75.0),
        "rolloff": ("float", 0.1),
        "span_symbols": ("int", 64),
        "samples_per_symbol_channel": ("int", 4),
    },
    "link": {
        "n_spans": ("int", 15),
        "edfa_noise_figure_db": ("opt_float", 5.0),
        "step_km": ("float", 1.0),
        "span": {
            "length_km": ("float", 80.0),
            "dispersion_ps_nm_km": ("float", 17.0),
            "gamma_per_w_km": ("float", 1.3),
            "alpha_db_km": ("float", 0.2),
            "ref_wavelength_nm": ("float", 1550.0),
        },
    },
    "shaping": {
        "block_lengths": ("list[int]", [8, 32, 128, 512]),
        "interleaved_lengths": ("list[int]", []),
        "include_mb": ("bool", True),
        "rate_bits_per_amp": ("float", 2.0),
        "interleaver_block": ("int", 512),
    },
    "dsp": {
        "comp_modes": ("list[str]", ["edc", "dbp"]),
        "cpr_modes": ("list[str]", ["mpr", "bps"]),
        "nbps_edc": ("int", 64),
        "nbps_dbp": ("int", 64),
        "nbps_grid": ("list[int]", [4, 8, 12, 16, 24, 32, 48, 64, 96, 128]),
    },
    "sweep": {
        "powers_dbm": ("list[float]", [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0]),
        "n_symbols": ("int", 16384),
        "seeds": ("list[int]", [0, 1, 2, 3, 4]),
    },
}

_COMP_MODES = ("edc", "dbp")
_CPR_MODES = ("mpr", "bps")


class ConfigError(ValueError):
    pass


def _type_ok(tag, value):
    if tag == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if tag == "float":
        return (isinstance(value, (int, float))
                and not isinstance(value, bool))
    if tag == "bool":
        return isinstance(value, bool)
    if tag == "str":
        return isinstance(value, str)
    if tag == "opt_float":
        return value is None or _type_ok("float", value)
    if tag == "opt_str":
        return value is None or isinstance(value, str)
    if tag.startswith("list["):
        inner = tag[5:-1]
        return (isinstance(value, list)
                and all(_type_ok(inner, v) for v in value))
    raise AssertionError(f"bad schema tag {tag}")


def _merge(schema, data, path=""):
    """Validate `data` against `schema` and fill defaults; returns a fully
    populated plain dict."""
    if not isinstance(data, dict):
        raise ConfigError(f"config section {path or '<root>'} must be a "
                          f"mapping, got {type(data).__name__}")
    out = {}
    for key, spec in schema.items():
        where = f"{path}.{key}" if path else key
        if isinstance(spec, dict):
            out[key] = _merge(spec, data.get(key, {}), where)
        else:
            tag, default = spec
            value = data.get(key, default)
            if not _type_ok(tag, value):
                raise ConfigError(
                    f"config key {where}: expected {tag}, "
                    f"got {value!r}")
            out[key] = value
    for key in data:
        if key not in schema:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown config key: {where}")
    return out


@dataclass(frozen=True)
class ShapingSweep:
    block_lengths: tuple
    interleaved_lengths: tuple
    include_mb: bool
    rate_bits_per_amp: float
    interleaver_block: int


@dataclass(frozen=True)
class DspSweep:
    comp_modes: tuple
    cpr_modes: tuple
    nbps_edc: int
    nbps_dbp: int
    nbps_grid: tuple

    def bps_config(self, comp_mode) -> BpsConfig:
        n = self.nbps_edc if comp_mode == "edc" else self.nbps_dbp
        return BpsConfig(half_window=n)


@dataclass(frozen=True)
class SweepConfig:
    powers_dbm: tuple
    n_symbols: int
    seeds: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridPlan
    link: LinkConfig
    shaping: ShapingSweep
    dsp: DspSweep
    sweep: SweepConfig
    master_seed: int
    trellis_cache_dir: str | None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not (self.shaping.block_lengths
                or self.shaping.interleaved_lengths
                or self.shaping.include_mb):
            raise ConfigError("shaping sweep is empty")
        rate = self.shaping.rate_bits_per_amp
        for n in (tuple(self.shaping.block_lengths)
                  + tuple(self.shaping.interleaved_lengths)):
            if n <= 0:
                raise ConfigError(f"block length {n} must be positive")
            if abs(rate * n - round(rate * n)) > 1e-9:
                raise ConfigError(
                    f"rate_bits_per_amp {rate} gives a non-integer bit "
                    f"count for block length {n}")
            if 4 * self.sweep.n_symbols % n != 0:
                raise ConfigError(
                    f"block length {n} must divide the per-channel "
                    f"amplitude count 4*n_symbols = {4 * self.sweep.n_symbols}")
        blk = self.shaping.interleaver_block
        for n in self.shaping.interleaved_lengths:
            if n % blk != 0:
                raise ConfigError(
                    f"interleaved length {n} must be a multiple of the "
                    f"interleaver block {blk}")
        for m in self.dsp.comp_modes:
            if m not in _COMP_MODES:
                raise ConfigError(f"config key dsp.comp_modes: unknown "
                                  f"mode {m!r}")
        for m in self.dsp.cpr_modes:
            if m not in _CPR_MODES:
                raise ConfigError(f"config key dsp.cpr_modes: unknown "
                                  f"mode {m!r}")
        if not self.dsp.comp_modes or not self.dsp.cpr_modes:
            raise ConfigError("dsp sweep is empty")
        if not self.sweep.powers_dbm:
            raise ConfigError("sweep.powers_dbm is empty")
        if not self.sweep.seeds:
            raise ConfigError("sweep.seeds is empty")
        if self.sweep.n_symbols <= 0:
            raise ConfigError("sweep.n_symbols must be positive")
        if not math.isfinite(self.master_seed) or self.master_seed < 0:
            raise ConfigError("master_seed must be a nonnegative integer")

    @property
    def cache_dir(self):
        if self.trellis_cache_dir is None:
            return None
        return str(Path(self.trellis_cache_dir).expanduser())


def config_from_dict(data: dict) -> ExperimentConfig:
    full = _merge(_SCHEMA, data or {})
    g = full["grid"]
    grid = GridPlan(
        n_channels=g["n_channels"],
        baud_rate=g["baud_rate_gbaud"] * 1e9,
        channel_spacing=g["channel_spacing_ghz"] * 1e9,
        rolloff=g["rolloff"],
        span_symbols=g["span_symbols"],
        samples_per_symbol_channel=g["samples_per_symbol_channel"],
    )
    li = full["link"]
    link = LinkConfig(
        span=FiberSpanParams(**li["span"]),
        n_spans=li["n_spans"],
        edfa_noise_figure_db=li["edfa_noise_figure_db"],
        step_policy=StepPolicy(h_km=li["step_km"]),
    )
    sh = full["shaping"]
    shaping = ShapingSweep(
        block_lengths=tuple(sh["block_lengths"]),
        interleaved_lengths=tuple(sh["interleaved_lengths"]),
        include_mb=sh["include_mb"],
        rate_bits_per_amp=sh["rate_bits_per_amp"],
        interleaver_block=sh["interleaver_block"],
    )
    d = full["dsp"]
    dsp = DspSweep(
        comp_modes=tuple(d["comp_modes"]),
        cpr_modes=tuple(d["cpr_modes"]),
        nbps_edc=d["nbps_edc"],
        nbps_dbp=d["nbps_dbp"],
        nbps_grid=tuple(d["nbps_grid"]),
    )
    sw = full["sweep"]
    sweep = SweepConfig(
        powers_dbm=tuple(float(p) for p in sw["powers_dbm"]),
        n_symbols=sw["n_symbols"],
        seeds=tuple(sw["seeds"]),
    )
    return ExperimentConfig(
        grid=grid, link=link, shaping=shaping, dsp=dsp, sweep=sweep,
        master_seed=full["master_seed"],
        trellis_cache_dir=full["trellis_cache_dir"],
        raw=full,
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Load a YAML config file, optionally on top of a preset dict."""
    with open(path) as f:
        data = yaml.safe_load(f)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    base = dict(overrides or {})
    merged = _deep_update(base, data)
    return config_from_dict(merged)


def _deep_update(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_update(out[k], v)
        else:
            out[k] = v
    return out


# Named presets. Desk presets shrink the channel count and frame length
# (never the baud rate or span count, to keep the dispersion/nonlinearity
# regime qualitatively intact); they are NOT value-matched to the
# full-scale figures, and their BPS windows are recalibrated for the
# smaller system: the 3-channel link needs wider averaging (64/96) than
# the 12-channel one (24/16 and 92), whose stronger and faster
# cross-channel phase noise rewards short windows. Full presets carry the
# published system parameters and are long-running.
_PRESETS = {
    "fig2_desk": {},  # the schema defaults
    "fig3_desk": {
        "link": {"n_spans": 27},
        "dsp": {"nbps_edc": 96, "nbps_dbp": 96},
        "sweep": {"powers_dbm": [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0]},
    },
    "fig2_full": {
        "grid": {"n_channels": 12},
        "link": {"n_spans": 15, "step_km": 0.25},
        "shaping": {
            "block_lengths": [4, 8, 16, 32, 64, 128, 256, 512],
            "interleaved_lengths": [1024, 2048, 4096],
        },
        "dsp": {"nbps_edc": 24, "nbps_dbp": 16},
        "sweep": {
            "powers_dbm": [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
            "n_symbols": 65536,
            "seeds": [0, 1, 2],
        },
    },
    "fig3_full": {
        "grid": {"n_channels": 12},
        "link": {"n_spans": 27, "step_km": 0.25},
        "shaping": {
            "block_lengths": [4, 8, 16, 32, 64, 128, 256, 512],
            "interleaved_lengths": [1024, 2048, 4096],
        },
        "dsp": {"nbps_edc": 92, "nbps_dbp": 92},
        "sweep": {
            "powers_dbm": [-2.0, -1.0, 0.0, 1.0, 2.0],
            "n_symbols": 65536,
            "seeds": [0, 1, 2],
        },
    },
    "backtoback": {
        "link": {"n_spans": 0, "edfa_noise_figure_db": None},
        "shaping": {"block_lengths": [8, 512]},
        "dsp": {"comp_modes": ["edc"], "cpr_modes": ["mpr"]},
        "sweep": {"powers_dbm": [0.0], "n_symbols": 8192, "seeds": [0]},
    },
}


def preset_names():
    return tuple(sorted(_PRESETS))


def preset(name: str) -> ExperimentConfig:
    if name not in _PRESETS:
        raise ConfigError(
            f"unknown preset {name!r} (choose from {', '.join(preset_names())})")
    return config_from_dict(_PRESETS[name])


def preset_overrides(name: str) -> dict:
    """The raw preset dict, for layering a user config file on top."""
    if name not in _PRESETS:
        raise ConfigError(
            f"unknown preset {name!r} (choose from {', '.join(preset_names())})")
    return _PRESETS[name]
