"""Physical parameter set for the SPMe cell and its text-file format.

All values are SI.  The defaults are the LiCoO2/graphite cell used in the
fastDFN parameter set (particle radii, surface areas and thicknesses
converted from micrometres).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

REGION_PREFIXES = ("n", "s", "p")


class ParameterError(ValueError):
    """Raised for a physically invalid or malformed parameter set."""


@dataclass(frozen=True)
class ParameterSet:
    # negative electrode
    eps_n: float = 0.3
    c_max_n: float = 2.4983e4
    sigma_n: float = 100.0
    D_n: float = 3.9e-14
    R_n: float = 10e-6
    a_n: float = 0.18e6
    m_n: float = 2e-5
    L_n: float = 100e-6
    U_ref_n: float = 0.18
    # separator
    eps_s: float = 1.0
    L_s: float = 25e-6
    # positive electrode
    eps_p: float = 0.3
    c_max_p: float = 5.1218e4
    sigma_p: float = 10.0
    D_p: float = 1e-13
    R_p: float = 10e-6
    a_p: float = 0.15e6
    m_p: float = 6e-7
    L_p: float = 100e-6
    U_ref_p: float = 3.94
    # shared
    c_e_typ: float = 1e3
    D_e_typ: float = 5.34e-10
    kappa_e_typ: float = 1.1
    F: float = 96485.0
    R_gas: float = 8.314472
    T: float = 298.15
    brug: float = 1.5
    t_plus: float = 0.4
    I_typ: float = 24.0
    ocp_n: str = field(default="graphite")
    ocp_p: str = field(default="lco")

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = (
            "c_max_n", "c_max_p", "sigma_n", "sigma_p", "D_n", "D_p", "R_n",
            "R_p", "a_n", "a_p", "m_n", "m_p", "L_n", "L_s", "L_p", "c_e_typ",
            "D_e_typ", "kappa_e_typ", "F", "R_gas", "T", "brug", "I_typ",
        )
        for name in positive:
            value = getattr(self, name)
            if not value > 0:
                raise ParameterError(f"{name} must be strictly positive, got {value!r}")
        for name in ("eps_n", "eps_s", "eps_p"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ParameterError(f"{name} must lie in (0, 1], got {value!r}")
        if not 0 < self.t_plus < 1:
            raise ParameterError(f"t_plus must lie in (0, 1), got {self.t_plus!r}")

    @property
    def thermal_voltage(self) -> float:
        """RT/F in volts."""
        return self.R_gas * self.T / self.F

    @property
    def L(self) -> float:
        return self.L_n + self.L_s + self.L_p

    def replace(self, **changes) -> "ParameterSet":
        return dataclasses.replace(self, **changes)


def _file_key(name: str) -> str:
    # eps_n -> n.eps ; D_e_typ stays shared
    stem, _, suffix = name.rpartition("_")
    if suffix in REGION_PREFIXES and stem:
        return f"{suffix}.{stem}"
    return name


def _field_name(key: str) -> str:
    prefix, dot, stem = key.partition(".")
    if dot:
        if prefix not in REGION_PREFIXES:
            raise ParameterError(f"unknown region prefix in key {key!r}")
        return f"{stem}_{prefix}"
    return key


def dumps(params: ParameterSet) -> str:
    lines = ["# SPMe parameter set, SI units"]
    for f in dataclasses.fields(params):
        value = getattr(params, f.name)
        text = value if isinstance(value, str) else repr(float(value))
        lines.append(f"{_file_key(f.name)} = {text}")
    return "\n".join(lines) + "\n"


def loads(text: str, base: ParameterSet | None = None) -> ParameterSet:
    """Parse ``key = value`` lines; keys not present keep ``base`` values."""
    base = base or ParameterSet()
    kinds = {f.name: f.type for f in dataclasses.fields(ParameterSet)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ParameterError(f"line {lineno}: expected 'key = value'")
        name = _field_name(key.strip())
        if name not in kinds:
            raise ParameterError(f"line {lineno}: unknown parameter {key.strip()!r}")
        value = value.strip()
        changes[name] = value if kinds[name] == "str" else float(value)
    return dataclasses.replace(base, **changes)


def save(params: ParameterSet, path) -> None:
    Path(path).write_text(dumps(params))


def load(path, base: ParameterSet | None = None) -> ParameterSet:
    return loads(Path(path).read_text(), base)
