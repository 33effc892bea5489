"""Current excitations, synthetic voltage datasets and their file format.

A dataset is stored as ``<stem>.csv`` (columns ``t, current, v_clean,
v_noisy``, full float precision) plus a ``<stem>.json`` sidecar carrying the
seed, noise variance, initial stoichiometries, signal and true parameters.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .discretization import DEFAULT_NODE_COUNTS, assemble_model, simulate
from .ioutil import atomic_write_text, write_csv_columns, read_csv_columns
from .parameters import ParameterSet
from .theta import ThetaVector

KINDS = ("multiharmonic", "biased-sinusoid", "constant")

# initial (negative, positive) surface stoichiometries of the 11 local points
SOC_POINTS = (
    (0.80, 0.51), (0.73, 0.55), (0.67, 0.59), (0.61, 0.62), (0.55, 0.66),
    (0.49, 0.69), (0.43, 0.73), (0.37, 0.76), (0.31, 0.80), (0.25, 0.83),
    (0.19, 0.87),
)


class SignalError(ValueError):
    pass


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SignalSpec:
    """Sampled current excitation; frequencies in Hz, amplitudes in A/m^2."""
    kind: str
    fs: float
    duration: float
    frequencies: tuple = ()
    amplitudes: tuple = ()
    bias: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise SignalError(f"unknown signal kind {self.kind!r}")
        if not (self.fs > 0 and self.duration > 0):
            raise SignalError("sample rate and duration must be positive")
        if len(self.frequencies) != len(self.amplitudes):
            raise SignalError("one amplitude per frequency required")
        if self.kind == "constant":
            return
        if not self.frequencies:
            raise SignalError(f"{self.kind} signal needs at least one frequency")
        if self.kind == "biased-sinusoid" and len(self.frequencies) != 1:
            raise SignalError("biased sinusoid takes exactly one frequency")
        if min(self.frequencies) <= 0:
            raise SignalError("frequencies must be positive")
        if not self.fs > 2.0 * max(self.frequencies):
            raise SignalError(f"fs = {self.fs} Hz violates Nyquist for {max(self.frequencies)} Hz")
        if self.duration * min(self.frequencies) < 1.0 - 1e-9:
            raise SignalError("duration shorter than one period of the lowest frequency")

    @property
    def dt(self) -> float:
        return 1.0 / self.fs

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.fs))

    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.fs

    def scaled(self, factor: float) -> "SignalSpec":
        """Same signal with every harmonic amplitude multiplied by ``factor``."""
        return SignalSpec(self.kind, self.fs, self.duration, self.frequencies,
                          tuple(a * factor for a in self.amplitudes), self.bias)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frequencies"] = list(self.frequencies)
        d["amplitudes"] = list(self.amplitudes)
        return d

    @classmethod
    def from_dict(cls, d) -> "SignalSpec":
        return cls(**d)


def local_signal(amplitude: float = 1.0, fs: float = 4000.0, duration: float = 10.0,
                 frequencies=(0.1, 1.0, 10.0, 100.0)) -> SignalSpec:
    """Zero-bias multiharmonic, one harmonic per decade, equal amplitudes."""
    return SignalSpec("multiharmonic", fs, duration, frequencies,
                      (amplitude,) * len(frequencies))


def wide_signal(amplitude: float = 1.0, bias: float = 24.0, frequency: float = 1e-3,
                fs: float = 1.0, duration: float = 1000.0) -> SignalSpec:
    """1C-biased C/24 sinusoid sweeping a wide SoC range."""
    return SignalSpec("biased-sinusoid", fs, duration, (frequency,), (amplitude,), bias)


def multiharmonic_current(spec: SignalSpec) -> np.ndarray:
    if spec.kind != "multiharmonic":
        raise SignalError(f"expected a multiharmonic spec, got {spec.kind!r}")
    t = spec.time()
    current = np.zeros_like(t)
    for f, a in zip(spec.frequencies, spec.amplitudes):
        current += a * np.sin(2.0 * np.pi * f * t)
    return current


def biased_sinusoid_current(spec: SignalSpec) -> np.ndarray:
    if spec.kind != "biased-sinusoid":
        raise SignalError(f"expected a biased-sinusoid spec, got {spec.kind!r}")
    t = spec.time()
    return spec.bias + spec.amplitudes[0] * np.sin(2.0 * np.pi * spec.frequencies[0] * t)


def current_series(spec: SignalSpec) -> np.ndarray:
    if spec.kind == "multiharmonic":
        return multiharmonic_current(spec)
    if spec.kind == "biased-sinusoid":
        return biased_sinusoid_current(spec)
    return np.full(spec.n_samples, float(spec.bias))


def soc_points() -> list:
    return list(SOC_POINTS)


def resolve_soc_point(soc_point):
    """Accept a 1-based point index or an explicit ``(x_n, x_p)`` pair."""
    if isinstance(soc_point, (int, np.integer)):
        if not 1 <= soc_point <= len(SOC_POINTS):
            raise ValueError(f"SoC point index must be 1..{len(SOC_POINTS)}")
        return SOC_POINTS[soc_point - 1]
    x_n, x_p = soc_point
    return float(x_n), float(x_p)


def clean_voltage(signal: SignalSpec, soc_point, theta: ThetaVector, params: ParameterSet,
                  node_counts=DEFAULT_NODE_COUNTS):
    x_n, x_p = resolve_soc_point(soc_point)
    model = assemble_model(theta, params, signal.dt, node_counts)
    current = current_series(signal)
    return current, simulate(model, current, model.uniform_state(x_n, x_p))


def peak_deviation(voltage: np.ndarray) -> float:
    """Largest excursion of the voltage from its initial (rest) value."""
    return float(np.max(np.abs(voltage - voltage[0])))


def calibrate_current_amplitude(target_voltage_amplitude: float, soc_point,
                                params: ParameterSet, theta: ThetaVector | None = None,
                                signal: SignalSpec | None = None,
                                node_counts=DEFAULT_NODE_COUNTS,
                                max_amplitude: float = 240.0) -> float:
    """Per-harmonic current amplitude whose response peaks at the target.

    ``signal`` supplies the waveform shape (default: the local multiharmonic
    with unit amplitudes); the returned value replaces every amplitude.
    """
    if not target_voltage_amplitude > 0:
        raise CalibrationError("target voltage amplitude must be positive")
    theta = theta or ThetaVector.from_params(params)
    base = signal or local_signal(1.0)
    unit = SignalSpec(base.kind, base.fs, base.duration, base.frequencies,
                      (1.0,) * len(base.frequencies), base.bias)

    def excess(amplitude):
        try:
            _, v = clean_voltage(unit.scaled(amplitude), soc_point, theta, params, node_counts)
        except ValueError:
            return math.inf
        return peak_deviation(v) - target_voltage_amplitude

    lo, hi = 0.0, 1e-3
    while excess(hi) < 0:
        lo, hi = hi, 2.0 * hi
        if hi > max_amplitude:
            raise CalibrationError(
                f"no amplitude below {max_amplitude} A/m^2 reaches {target_voltage_amplitude} V")
    if not math.isfinite(excess(hi)):
        # the bracket end breaks the simulator; shrink it onto the finite region
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if math.isfinite(excess(mid)):
                if excess(mid) >= 0:
                    hi = mid
                    break
                lo = mid
            else:
                hi = mid
        else:
            raise CalibrationError("could not bracket the target amplitude")
    return brentq(excess, lo, hi, xtol=1e-12, rtol=1e-10)


@dataclass
class Dataset:
    t: np.ndarray
    current: np.ndarray
    v_clean: np.ndarray
    v_noisy: np.ndarray
    sigma2: float
    seed: int
    label: str
    x_n0: float
    x_p0: float
    signal: SignalSpec
    theta_true: ThetaVector
    node_counts: tuple = DEFAULT_NODE_COUNTS
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(self.t), len(self.current), len(self.v_clean), len(self.v_noisy)}
        if len(lengths) != 1:
            raise ValueError("dataset series must have equal length")

    @property
    def n(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return self.signal.dt

    def sidecar(self) -> dict:
        return {
            "label": self.label,
            "seed": int(self.seed),
            "sigma2": self.sigma2,
            "soc_point": {"x_n": self.x_n0, "x_p": self.x_p0},
            "signal": self.signal.to_dict(),
            "theta_true": list(self.theta_true.scaled),
            "theta_true_physical": self.theta_true.physical(),
            "node_counts": [self.node_counts[0], self.node_counts[1], list(self.node_counts[2])],
            "n_samples": self.n,
            "metadata": self.metadata,
        }


def generate_dataset(signal: SignalSpec, soc_point, theta_true: ThetaVector,
                     params: ParameterSet, noise_percent: float, seed: int,
                     response_amplitude: float | None = None,
                     node_counts=DEFAULT_NODE_COUNTS, label: str = "",
                     metadata: dict | None = None) -> Dataset:
    """Simulate the clean response and add i.i.d. Gaussian voltage noise.

    The noise standard deviation is ``noise_percent`` % of the response
    amplitude, read as a two-sigma bound.  ``response_amplitude`` defaults to
    the measured peak deviation from rest.
    """
    if noise_percent < 0:
        raise ValueError("noise_percent must be non-negative")
    x_n, x_p = resolve_soc_point(soc_point)
    current, v_clean = clean_voltage(signal, (x_n, x_p), theta_true, params, node_counts)
    amplitude = peak_deviation(v_clean) if response_amplitude is None else response_amplitude
    sigma = noise_percent / 100.0 * amplitude / 2.0
    sigma2 = sigma * sigma
    rng = np.random.default_rng(seed)
    v_noisy = v_clean + rng.normal(0.0, 1.0, v_clean.shape) * sigma
    meta = {"response_amplitude": amplitude, "noise_percent": noise_percent}
    meta.update(metadata or {})
    return Dataset(t=signal.time(), current=current, v_clean=v_clean, v_noisy=v_noisy,
                   sigma2=sigma2, seed=int(seed), label=label or f"soc({x_n:.2f},{x_p:.2f})",
                   x_n0=x_n, x_p0=x_p, signal=signal, theta_true=theta_true,
                   node_counts=node_counts, metadata=meta)


COLUMNS = ("t", "current", "v_clean", "v_noisy")


def save_dataset(dataset: Dataset, stem) -> tuple:
    stem = Path(stem)
    csv_path = stem.with_suffix(".csv")
    json_path = stem.with_suffix(".json")
    write_csv_columns(csv_path, COLUMNS, [dataset.t, dataset.current,
                                          dataset.v_clean, dataset.v_noisy])
    atomic_write_text(json_path, json.dumps(dataset.sidecar(), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def load_dataset(stem) -> Dataset:
    stem = Path(stem)
    if stem.suffix in (".csv", ".json"):
        stem = stem.with_suffix("")
    meta = json.loads(stem.with_suffix(".json").read_text())
    cols = read_csv_columns(stem.with_suffix(".csv"), COLUMNS)
    nc = meta["node_counts"]
    return Dataset(t=cols["t"], current=cols["current"], v_clean=cols["v_clean"],
                   v_noisy=cols["v_noisy"], sigma2=float(meta["sigma2"]),
                   seed=int(meta["seed"]), label=meta["label"],
                   x_n0=float(meta["soc_point"]["x_n"]), x_p0=float(meta["soc_point"]["x_p"]),
                   signal=SignalSpec.from_dict(meta["signal"]),
                   theta_true=ThetaVector(tuple(meta["theta_true"])),
                   node_counts=(int(nc[0]), int(nc[1]), tuple(int(c) for c in nc[2])),
                   metadata=meta.get("metadata", {}))
