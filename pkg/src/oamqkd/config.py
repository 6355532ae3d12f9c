"""Run configuration: an INI file with one section per subsystem.

Defaults reproduce the experiment's parameters.  Any value can be
overridden with ``section.key=value`` strings (the CLI's ``--set``).

Example::

    [system]
    d = 7
    [source]
    mu = 0.1
    f_rep = 4000
    [link]
    components = sorter:0.85, slm_fanout:0.45, slm_phase:0.45, fiber_coupling:0.18
    [errors]
    delta = 0.065
    epsilon = 0.04
    [session]
    pulses = 4000000
    transport = inproc
"""
from __future__ import annotations

import configparser
import io
import secrets
from dataclasses import dataclass, field, fields, replace

from .channel import ChannelModel, DetectorModel, LinkBudget, PulseConfig, synthetic_crosstalk_matrix
from .hilbert import Basis, Dimension
from .protocol.session import Seeds, SessionParams
from .reconcile import CascadeConfig
from .security import ErrorBudget


class ConfigError(ValueError):
    pass


def _auto(value: str):
    return None if value.strip().lower() in ("auto", "none", "") else value


@dataclass(frozen=True)
class RunConfig:
    d: int = 7
    mu: float = 0.1
    f_rep: float = 4000.0
    pulse_width: float = 125e-9
    link: tuple[tuple[str, float], ...] = LinkBudget.experiment().component_efficiencies
    quantum_efficiency: float = 0.65
    dark_rate: float = 50.0
    gate_width: float = 125e-9
    after_pulse_prob: float = 0.003
    num_detectors: int | None = None
    delta: float = 0.065
    epsilon: float = 0.04
    crosstalk_model: str = "uniform"
    crosstalk_decay: float = 0.5
    pulses: int = 4_000_000
    sample_fraction: float = 0.1
    abort_threshold: float | None = None
    safety_margin: int = 0
    transport: str = "inproc"
    cascade_passes: int = 4
    initial_block_size: int | None = None
    seeds: Seeds = field(default_factory=Seeds)

    # section -> (attribute, ini key) in file order
    LAYOUT = {
        "system": [("d", "d")],
        "source": [("mu", "mu"), ("f_rep", "f_rep"), ("pulse_width", "pulse_width")],
        "link": [("link", "components")],
        "detector": [("quantum_efficiency", "quantum_efficiency"), ("dark_rate", "dark_rate"),
                     ("gate_width", "gate_width"), ("after_pulse_prob", "after_pulse_prob"),
                     ("num_detectors", "num_detectors")],
        "errors": [("delta", "delta"), ("epsilon", "epsilon"), ("crosstalk_model", "crosstalk_model"),
                   ("crosstalk_decay", "crosstalk_decay")],
        "session": [("pulses", "pulses"), ("sample_fraction", "sample_fraction"),
                    ("abort_threshold", "abort_threshold"), ("safety_margin", "safety_margin"),
                    ("transport", "transport")],
        "cascade": [("cascade_passes", "passes"), ("initial_block_size", "initial_block_size")],
    }

    def validate(self) -> "RunConfig":
        try:
            Dimension(self.d)
            if self.d < 3:
                raise ValueError("d must be at least 3")
            self.channel_model().background_click_prob()
            self.error_budget()
            self.session_params()
            CascadeConfig(self.cascade_passes, self.initial_block_size)
            if not (self.transport == "inproc" or self.transport.startswith("tcp")):
                raise ValueError(f"transport must be 'inproc' or 'tcp[:host:port]', got {self.transport!r}")
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        return self

    # -- builders ---------------------------------------------------------------
    def pulse_config(self) -> PulseConfig:
        return PulseConfig(self.mu, self.f_rep, self.pulse_width)

    def link_budget(self) -> LinkBudget:
        return LinkBudget(self.link)

    def detector_model(self) -> DetectorModel:
        return DetectorModel(self.quantum_efficiency, self.dark_rate, self.gate_width, self.after_pulse_prob,
                             self.num_detectors or self.d, self.epsilon)

    def error_budget(self) -> ErrorBudget:
        return ErrorBudget(self.delta, self.epsilon)

    def channel_model(self) -> ChannelModel:
        xt = {b: synthetic_crosstalk_matrix(self.d, self.delta, self.crosstalk_model, self.crosstalk_decay, b)
              for b in Basis}
        return ChannelModel(self.pulse_config(), self.link_budget(), self.detector_model(), xt, self.d)

    def session_params(self) -> SessionParams:
        return SessionParams(self.d, self.pulses, self.sample_fraction, self.abort_threshold, self.safety_margin,
                             self.cascade_passes, self.initial_block_size, self.seeds)

    def cascade_config(self) -> CascadeConfig:
        return CascadeConfig(self.cascade_passes, self.initial_block_size, self.seeds.cascade)

    def with_fresh_seeds(self) -> "RunConfig":
        return replace(self, seeds=Seeds(*(secrets.randbits(63) for _ in fields(Seeds))))

    # -- serialisation ----------------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for section, items in self.LAYOUT.items():
            cp[section] = {key: _fmt(getattr(self, attr)) for attr, key in items}
        cp["seeds"] = {f.name: str(getattr(self.seeds, f.name)) for f in fields(Seeds)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, overrides: list[str] | tuple = ()) -> "RunConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        for item in overrides:
            key, sep, value = item.partition("=")
            section, dot, name = key.strip().partition(".")
            if not sep or not dot:
                raise ConfigError(f"override {item!r} must look like section.key=value")
            if not cp.has_section(section):
                cp.add_section(section)
            cp[section][name] = value.strip()
        return cls.from_parser(cp)

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser) -> "RunConfig":
        known = {s: {k for _, k in items} for s, items in cls.LAYOUT.items()}
        known["seeds"] = {f.name for f in fields(Seeds)}
        for section in cp.sections():
            if section not in known:
                raise ConfigError(f"unknown config section [{section}]")
            for key in cp[section]:
                if key not in known[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for section, items in cls.LAYOUT.items():
            if not cp.has_section(section):
                continue
            for attr, key in items:
                if key in cp[section]:
                    kw[attr] = _parse(attr, types[attr], cp[section][key])
        if cp.has_section("seeds"):
            seeds = {k: _int(k, v) for k, v in cp["seeds"].items()}
            kw["seeds"] = Seeds(**seeds)
        try:
            cfg = cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg.validate()

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        text = ""
        if path is not None:
            try:
                with open(path) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_ini(text, overrides)


def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ", ".join(f"{label}:{eff!r}" for label, eff in value)
    return repr(value) if isinstance(value, float) else str(value)


def _int(name, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {value!r}") from None


def _parse(attr: str, typ: str, value: str):
    if attr == "link":
        comps = []
        for part in value.split(","):
            label, sep, eff = part.strip().rpartition(":")
            if not sep:
                raise ConfigError(f"link component {part!r} must be label:efficiency")
            try:
                comps.append((label.strip(), float(eff)))
            except ValueError:
                raise ConfigError(f"bad efficiency in {part!r}") from None
        return tuple(comps)
    if "None" in typ:
        if _auto(value) is None:
            return None
    try:
        if typ.startswith("int"):
            return int(value)
        if typ.startswith("float"):
            return float(value)
    except ValueError:
        raise ConfigError(f"{attr} has invalid value {value!r}") from None
    return value.strip()
