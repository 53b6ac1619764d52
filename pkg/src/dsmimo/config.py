"""Experiment configuration, INI (de)serialization and named presets.

Config files are INI with the sections below; every key is optional and
defaults to the 4-cell reference setup. Unknown sections or keys are
rejected. A ``[run]`` section is tolerated and ignored so that run manifests
can be parsed back as configs.

.. code-block:: ini

    [network]
    L = 4
    K = 5
    M = 100
    area_side_km = 1.0
    min_bs_user_distance_km = 0.1
    shadowing_std_db = 7.0
    noise_power_dbm = -96.0
    edge_snr_db = -3.0
    tau_c = 200
    bandwidth_hz = 20000000.0

    [channel]
    models = rayleigh, ds-S11-dl0.5
    angular_spread_rad = 2.0943951023931953
    scatterer_spacing = 10.0
    carrier_hz = 2000000000.0

    [detection]
    detectors = mmse, zf, mr

    [pilot]
    reuse_factor = 1

    [sampling]
    drops = 100
    realizations = 1000
    chunk_size = 250
    seed = 0
    workers = 1

    [output]
    dir = out
    preset = custom
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import re
from dataclasses import dataclass, field

import numpy as np

from .channel import DEFAULT_ANGULAR_SPREAD, DEFAULT_CARRIER_HZ, DEFAULT_SCATTERER_SPACING
from .detection import DetectorKind
from .errors import ConfigError, DomainError
from .geometry import NetworkConfig

_MODEL_RE = re.compile(r"^ds-S(\d+)-dl([0-9]*\.?[0-9]+(?:[eE][-+]?\d+)?)$")


@dataclass(frozen=True)
class ModelTemplate:
    """Channel model applied to every link: Rayleigh or double scattering."""

    kind: str  # "rayleigh" | "ds"
    S: int | None = None
    d_l: float | None = None

    def __post_init__(self):
        if self.kind == "rayleigh":
            if self.S is not None or self.d_l is not None:
                raise ConfigError("rayleigh takes no parameters", key="models")
        elif self.kind == "ds":
            if self.S is None or self.S < 1 or self.S % 2 == 0:
                raise ConfigError(f"S must be odd and positive, got {self.S}", key="models")
            if self.d_l is None or self.d_l <= 0:
                raise ConfigError(f"d_l must be positive, got {self.d_l}", key="models")
        else:
            raise ConfigError(f"unknown model kind {self.kind!r}", key="models")

    @property
    def label(self) -> str:
        if self.kind == "rayleigh":
            return "rayleigh"
        return f"ds-S{self.S}-dl{self.d_l:g}"

    @classmethod
    def parse(cls, text: str) -> "ModelTemplate":
        text = text.strip()
        if text == "rayleigh":
            return cls("rayleigh")
        m = _MODEL_RE.match(text)
        if m is None:
            raise ConfigError(
                f"cannot parse model {text!r} (expected 'rayleigh' or 'ds-S<odd>-dl<spacing>')",
                key="models",
            )
        return cls("ds", int(m.group(1)), float(m.group(2)))


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    models: tuple = (ModelTemplate("rayleigh"),)
    detectors: tuple = (DetectorKind.MMSE,)
    angular_spread_rad: float = DEFAULT_ANGULAR_SPREAD
    scatterer_spacing: float = DEFAULT_SCATTERER_SPACING
    carrier_hz: float = DEFAULT_CARRIER_HZ
    reuse_factor: int = 1
    n_drops: int = 100
    n_fading: int = 1000
    chunk_size: int = 250
    master_seed: int = 0
    workers: int = 1
    output_dir: str = "out"
    preset: str = "custom"

    def __post_init__(self):
        if not self.models:
            raise ConfigError("at least one model is required", key="models")
        if not self.detectors:
            raise ConfigError("at least one detector is required", key="detectors")
        if len({m.label for m in self.models}) != len(self.models):
            raise ConfigError("duplicate model", key="models")
        if not 0 < self.angular_spread_rad <= 2 * np.pi:
            raise ConfigError("must lie in (0, 2*pi]", key="angular_spread_rad")
        if self.scatterer_spacing < 0:
            raise ConfigError("must be nonnegative", key="scatterer_spacing")
        if self.carrier_hz <= 0:
            raise ConfigError("must be positive", key="carrier_hz")
        if self.reuse_factor < 1:
            raise ConfigError("must be a positive integer", key="f")
        if self.reuse_factor * self.network.K > self.network.tau_c:
            raise ConfigError(
                f"f*K = {self.reuse_factor * self.network.K} exceeds "
                f"tau_c = {self.network.tau_c}",
                key="f",
            )
        for key in ("n_drops", "n_fading", "chunk_size", "workers"):
            if getattr(self, key) < 1:
                raise ConfigError("must be a positive integer", key=key)
        if self.master_seed < 0:
            raise ConfigError("must be a nonnegative integer", key="seed")

    @property
    def tau_p(self) -> int:
        return self.reuse_factor * self.network.K


def _int(s):
    try:
        return int(s)
    except ValueError:
        raise ValueError(f"expected an integer, got {s!r}") from None


def _list(parse):
    return lambda s: tuple(parse(x) for x in s.split(",") if x.strip())


def _detector(s):
    try:
        return DetectorKind.parse(s)
    except DomainError as exc:
        raise ValueError(str(exc)) from None


_NETWORK_KEYS = {
    "L": _int,
    "K": _int,
    "M": _int,
    "area_side_km": float,
    "min_bs_user_distance_km": float,
    "shadowing_std_db": float,
    "noise_power_dbm": float,
    "edge_snr_db": float,
    "tau_c": _int,
    "bandwidth_hz": float,
}

# section -> key -> (ExperimentConfig attribute, parser, formatter)
_SCHEMA = {
    "channel": {
        "models": ("models", _list(ModelTemplate.parse), lambda v: ", ".join(m.label for m in v)),
        "angular_spread_rad": ("angular_spread_rad", float, repr),
        "scatterer_spacing": ("scatterer_spacing", float, repr),
        "carrier_hz": ("carrier_hz", float, repr),
    },
    "detection": {
        "detectors": ("detectors", _list(_detector), lambda v: ", ".join(d.value for d in v)),
    },
    "pilot": {"reuse_factor": ("reuse_factor", _int, str)},
    "sampling": {
        "drops": ("n_drops", _int, str),
        "realizations": ("n_fading", _int, str),
        "chunk_size": ("chunk_size", _int, str),
        "seed": ("master_seed", _int, str),
        "workers": ("workers", _int, str),
    },
    "output": {"dir": ("output_dir", str, str), "preset": ("preset", str, str)},
}

_IGNORED_SECTIONS = {"run"}


def _new_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep key case (L, K, M)
    return cp


def _apply(cp: configparser.ConfigParser, base: ExperimentConfig) -> ExperimentConfig:
    net = {}
    top = {}
    for section in cp.sections():
        if section in _IGNORED_SECTIONS:
            continue
        if section == "network":
            keys = _NETWORK_KEYS
        elif section in _SCHEMA:
            keys = _SCHEMA[section]
        else:
            raise ConfigError("unknown section", key=f"[{section}]")
        for key, raw in cp.items(section):
            if key not in keys:
                raise ConfigError("unknown key", key=f"{section}.{key}")
            if section == "network":
                parse, attr, dest = keys[key], key, net
            else:
                attr, parse, _ = keys[key]
                dest = top
            try:
                dest[attr] = parse(raw)
            except (ValueError, ConfigError) as exc:
                raise ConfigError(str(exc), key=f"{section}.{key}") from None
    try:
        network = dataclasses.replace(base.network, **net)
        return dataclasses.replace(base, network=network, **top)
    except ConfigError as exc:
        if exc.key in _NETWORK_KEYS:
            raise ConfigError(str(exc).split(": ", 1)[-1], key=f"network.{exc.key}") from None
        raise


def parse_config(text: str = "", overrides=(), base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse INI text plus ``section.key=value`` overrides into a config.

    Missing keys fall back to ``base`` (the reference preset by default).
    """
    cp = _new_parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        path, value = item.split("=", 1)
        section, key = path.strip().split(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key.strip(), value.strip())
    return _apply(cp, base if base is not None else PRESETS["paper"])


def load_config(path, overrides=(), base=None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", key=str(path)) from None
    return parse_config(text, overrides, base)


def to_ini(config: ExperimentConfig) -> configparser.ConfigParser:
    cp = _new_parser()
    cp.add_section("network")
    for key in _NETWORK_KEYS:
        v = getattr(config.network, key)
        cp.set("network", key, repr(v) if isinstance(v, float) else str(v))
    for section, keys in _SCHEMA.items():
        cp.add_section(section)
        for key, (attr, _, fmt) in keys.items():
            cp.set(section, key, fmt(getattr(config, attr)))
    return cp


def emit_config(config: ExperimentConfig, extra: dict | None = None) -> str:
    """INI text of ``config``; ``extra`` adds an informational ``[run]`` section."""
    cp = to_ini(config)
    if extra:
        cp.add_section("run")
        for k, v in extra.items():
            cp.set("run", k, str(v))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(emit_config(config).encode()).hexdigest()[:16]


def _models(*labels):
    return tuple(ModelTemplate.parse(x) for x in labels)


_ALL = (DetectorKind.MMSE, DetectorKind.ZF, DetectorKind.MR)

PRESETS = {
    # every model/detector combination used by the SE figures, in one run
    "paper": ExperimentConfig(
        models=_models(
            "rayleigh",
            "ds-S11-dl0.5",
            "ds-S21-dl0.1",
            "ds-S21-dl0.5",
            "ds-S21-dl1",
            "ds-S41-dl0.5",
        ),
        detectors=_ALL,
        preset="paper",
    ),
    "fig7": ExperimentConfig(
        models=_models("rayleigh", "ds-S11-dl0.5", "ds-S21-dl0.5", "ds-S41-dl0.5"),
        detectors=(DetectorKind.MMSE,),
        preset="fig7",
    ),
    "fig8": ExperimentConfig(
        models=_models("rayleigh", "ds-S21-dl0.1", "ds-S21-dl0.5", "ds-S21-dl1"),
        detectors=(DetectorKind.MMSE,),
        preset="fig8",
    ),
    "fig9": ExperimentConfig(
        models=_models("ds-S21-dl0.5"),
        detectors=_ALL,
        preset="fig9",
    ),
    "smoke": ExperimentConfig(
        network=NetworkConfig(M=32),
        models=_models("rayleigh", "ds-S21-dl0.5"),
        detectors=_ALL,
        n_drops=10,
        n_fading=200,
        preset="smoke",
    ),
}

def get_preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}", key="preset"
        ) from None
