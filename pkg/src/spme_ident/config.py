"""Experiment configuration stored as an INI file.

Every key has a default, so an empty file describes the full desk-scale
study.  ``dump_config(load_config(path))`` is a complete, self-contained
description of a run.
"""
from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .discretization import DEFAULT_NODE_COUNTS
from .excitation import SOC_POINTS, SignalSpec, local_signal, wide_signal
from .parameters import ParameterSet, load as load_parameters
from .theta import ThetaVector

OUTPUT_DIR_ENV = "SPME_IDENT_OUTPUT_DIR"
KINDS = ("local", "wide", "both")
INITS = ("prior", "mle")


class ConfigError(ValueError):
    pass


@dataclass
class LocalSettings:
    fs: float = 4000.0
    duration: float = 10.0
    frequencies: tuple = (0.1, 1.0, 10.0, 100.0)
    target_amplitude: float = 0.008        # V, peak deviation from rest
    chain_init: str = "prior"


@dataclass
class WideSettings:
    fs: float = 1.0
    duration: float = 1000.0
    frequency: float = 1e-3
    amplitude: float = 1.0
    bias: float = 24.0
    start_point: int = 3
    chain_init: str = "mle"


@dataclass
class McmcSettings:
    iterations: int = 20000
    burn_in: int = 5000
    sigma0_scale: float = 1e-3
    target_acceptance: float = 0.234
    gamma: float = 2.0 / 3.0
    max_init_tries: int = 1000


@dataclass
class MleSettings:
    xatol: float = 1e-6
    max_evaluations: int = 20000
    init_spread: float = 0.1
    fd_step: float = 1e-4


@dataclass
class ExperimentConfig:
    parameter_file: str = ""
    node_counts: tuple = DEFAULT_NODE_COUNTS
    theta_true: dict = field(default_factory=dict)     # physical units; empty = nominal
    kind: str = "both"
    points: tuple = tuple(range(1, len(SOC_POINTS) + 1))
    noise_percent: float = 1.0
    reference_amplitude: float = 0.008                 # V, sets sigma for every dataset
    seed: int = 2020
    output_dir: str = "spme-output"
    bins: int = 50
    workers: int = 1
    method: str = "both"
    local: LocalSettings = field(default_factory=LocalSettings)
    wide: WideSettings = field(default_factory=WideSettings)
    mcmc: McmcSettings = field(default_factory=McmcSettings)
    mle: MleSettings = field(default_factory=MleSettings)
    source: str = ""

    # ----------------------------------------------------------- derived views
    def params(self) -> ParameterSet:
        if not self.parameter_file:
            return ParameterSet()
        path = Path(self.parameter_file)
        if not path.is_absolute() and self.source:
            path = Path(self.source).parent / path
        return load_parameters(path)

    def truth(self, params: ParameterSet | None = None) -> ThetaVector:
        params = params or self.params()
        sigma2 = (self.noise_percent / 100.0 * self.reference_amplitude / 2.0) ** 2
        d = {"D_n": params.D_n, "D_p": params.D_p, "D_e": params.D_e_typ,
             "t_plus": params.t_plus}
        d.update(self.theta_true)
        return ThetaVector.from_physical(d["D_n"], d["D_p"], d["D_e"], d["t_plus"],
                                         sigma2 if sigma2 > 0 else 1.0)

    def local_signal(self, amplitude: float = 1.0) -> SignalSpec:
        return local_signal(amplitude, self.local.fs, self.local.duration, self.local.frequencies)

    def wide_signal(self) -> SignalSpec:
        w = self.wide
        return wide_signal(w.amplitude, w.bias, w.frequency, w.fs, w.duration)

    def run_local(self) -> bool:
        return self.kind in ("local", "both")

    def run_wide(self) -> bool:
        return self.kind in ("wide", "both")

    def resolved_output_dir(self) -> Path:
        env = os.environ.get(OUTPUT_DIR_ENV)
        return Path(env) if env else Path(self.output_dir)

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"experiment kind must be one of {KINDS}, got {self.kind!r}")
        if self.method not in ("mcmc", "mle", "both"):
            raise ConfigError(f"method must be mcmc, mle or both, got {self.method!r}")
        bad = [p for p in self.points if not 1 <= p <= len(SOC_POINTS)]
        if bad or not self.points:
            raise ConfigError(f"SoC points must be a non-empty subset of 1..{len(SOC_POINTS)}")
        if not 1 <= self.wide.start_point <= len(SOC_POINTS):
            raise ConfigError("wide.start_point out of range")
        for name, init in (("local", self.local.chain_init), ("wide", self.wide.chain_init)):
            if init not in INITS:
                raise ConfigError(f"{name}.chain_init must be one of {INITS}")
        if self.noise_percent < 0:
            raise ConfigError("noise_percent must be non-negative")
        if self.bins < 1 or self.workers < 1:
            raise ConfigError("bins and workers must be positive")
        m = self.mcmc
        if not (m.iterations >= 1 and 0 <= m.burn_in < m.iterations):
            raise ConfigError("need 0 <= burn_in < iterations")
        unknown = set(self.theta_true) - {"D_n", "D_p", "D_e", "t_plus"}
        if unknown:
            raise ConfigError(f"unknown truth keys {sorted(unknown)}")
        try:
            self.truth().validate()
            self.local_signal()
            self.wide_signal()
        except (ValueError, OSError) as err:
            raise ConfigError(str(err)) from err
        return self


# ------------------------------------------------------------------ INI codec

def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _points(text):
    out = []
    for part in text.replace(",", " ").split():
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _node_counts(text):
    v = [int(x) for x in text.replace(",", " ").split()]
    if len(v) != 5:
        raise ConfigError("node_counts needs 5 integers: particle_n particle_p elec_n elec_s elec_p")
    return (v[0], v[1], (v[2], v[3], v[4]))


def _parse_section(dc, section, parser):
    """Overwrite dataclass fields of ``dc`` from an INI section."""
    if not parser.has_section(section):
        return dc
    updates = {}
    known = {f.name: f for f in fields(dc)}
    for key, raw in parser.items(section):
        if key not in known:
            raise ConfigError(f"unknown key [{section}] {key}")
        current = getattr(dc, key)
        try:
            if isinstance(current, bool):
                updates[key] = parser.getboolean(section, key)
            elif isinstance(current, int):
                updates[key] = int(raw)
            elif isinstance(current, float):
                updates[key] = float(raw)
            elif isinstance(current, tuple):
                updates[key] = _floats(raw)
            else:
                updates[key] = raw.strip()
        except ValueError as err:
            raise ConfigError(f"[{section}] {key}: {err}") from err
    return replace(dc, **updates)


_TOP = {
    "model": ("parameter_file", "node_counts"),
    "experiment": ("kind", "points", "noise_percent", "reference_amplitude", "method"),
    "seeds": ("seed",),
    "output": ("output_dir", "bins", "workers"),
}


def parse_config(text: str, source: str = "") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as err:
        raise ConfigError(str(err)) from err
    allowed = set(_TOP) | {"truth", "local", "wide", "mcmc", "mle"}
    extra = set(parser.sections()) - allowed
    if extra:
        raise ConfigError(f"unknown section(s) {sorted(extra)}")
    cfg = ExperimentConfig(source=source)
    updates = {}
    try:
        for section, keys in _TOP.items():
            if not parser.has_section(section):
                continue
            for key, raw in parser.items(section):
                if key not in keys:
                    raise ConfigError(f"unknown key [{section}] {key}")
                if key == "node_counts":
                    updates[key] = _node_counts(raw)
                elif key == "points":
                    updates[key] = _points(raw)
                elif key in ("seed", "bins", "workers"):
                    updates[key] = int(raw)
                elif key in ("noise_percent", "reference_amplitude"):
                    updates[key] = float(raw)
                else:
                    updates[key] = raw.strip()
        if parser.has_section("truth"):
            updates["theta_true"] = {k: float(v) for k, v in parser.items("truth")}
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from err
    cfg = replace(cfg, **updates)
    cfg = replace(cfg, local=_parse_section(cfg.local, "local", parser),
                  wide=_parse_section(cfg.wide, "wide", parser),
                  mcmc=_parse_section(cfg.mcmc, "mcmc", parser),
                  mle=_parse_section(cfg.mle, "mle", parser))
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(text, str(path))


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    """Complete INI text; parsing it back yields an equal configuration."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    n = cfg.node_counts
    parser["model"] = {"parameter_file": cfg.parameter_file,
                       "node_counts": f"{n[0]}, {n[1]}, {n[2][0]}, {n[2][1]}, {n[2][2]}"}
    if cfg.theta_true:
        parser["truth"] = {k: repr(float(v)) for k, v in sorted(cfg.theta_true.items())}
    parser["experiment"] = {"kind": cfg.kind,
                            "points": ", ".join(str(p) for p in cfg.points),
                            "noise_percent": repr(cfg.noise_percent),
                            "reference_amplitude": repr(cfg.reference_amplitude),
                            "method": cfg.method}
    parser["seeds"] = {"seed": str(cfg.seed)}
    parser["output"] = {"output_dir": cfg.output_dir, "bins": str(cfg.bins),
                        "workers": str(cfg.workers)}
    for name in ("local", "wide", "mcmc", "mle"):
        dc = getattr(cfg, name)
        parser[name] = {f.name: _fmt(getattr(dc, f.name)) for f in fields(dc)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
