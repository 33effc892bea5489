"""The five estimated quantities and their sampling-space scaling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# sampling coordinate = physical value * SCALES (diffusivities only)
SCALES = (1e14, 1e13, 1e10)
NAMES = ("D_n", "D_p", "D_e", "t_plus", "log_sigma2")
# reporting coordinates used for summary tables: sigma^2 in units of 1e-9 V^2
REPORT_NAMES = ("D_n", "D_p", "D_e", "t_plus", "sigma2")
SIGMA2_REPORT_SCALE = 1e9


class InvalidTheta(ValueError):
    pass


@dataclass(frozen=True)
class ThetaVector:
    """``(D_n*1e14, D_p*1e13, D_e*1e10, t_plus, ln sigma^2)``."""
    scaled: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.scaled)
        if len(values) != 5:
            raise InvalidTheta(f"theta needs 5 components, got {len(values)}")
        object.__setattr__(self, "scaled", values)

    @classmethod
    def from_array(cls, arr) -> "ThetaVector":
        return cls(tuple(np.asarray(arr, dtype=float).ravel()))

    @classmethod
    def from_physical(cls, D_n, D_p, D_e, t_plus, sigma2=1.6e-9) -> "ThetaVector":
        return cls((D_n * SCALES[0], D_p * SCALES[1], D_e * SCALES[2],
                    t_plus, math.log(sigma2)))

    @classmethod
    def from_params(cls, params, sigma2=1.6e-9) -> "ThetaVector":
        return cls.from_physical(params.D_n, params.D_p, params.D_e_typ,
                                 params.t_plus, sigma2)

    def as_array(self) -> np.ndarray:
        return np.array(self.scaled)

    @property
    def D_n(self) -> float:
        return self.scaled[0] / SCALES[0]

    @property
    def D_p(self) -> float:
        return self.scaled[1] / SCALES[1]

    @property
    def D_e(self) -> float:
        return self.scaled[2] / SCALES[2]

    @property
    def t_plus(self) -> float:
        return self.scaled[3]

    @property
    def sigma2(self) -> float:
        return math.exp(self.scaled[4])

    def physical(self) -> dict:
        return {"D_n": self.D_n, "D_p": self.D_p, "D_e": self.D_e,
                "t_plus": self.t_plus, "sigma2": self.sigma2}

    def is_valid(self) -> bool:
        d_n, d_p, d_e, tp, ls2 = self.scaled
        # physical values can underflow to zero for tiny positive scaled ones
        return (self.D_n > 0 and self.D_p > 0 and self.D_e > 0 and 0 < tp < 1
                and math.isfinite(ls2) and math.isfinite(d_n + d_p + d_e))

    def validate(self) -> "ThetaVector":
        if not self.is_valid():
            raise InvalidTheta(f"invalid theta {self.scaled}")
        return self

    def with_sigma2(self, sigma2: float) -> "ThetaVector":
        return ThetaVector(self.scaled[:4] + (math.log(sigma2),))


def to_report(samples) -> np.ndarray:
    """Map sampling coordinates to reporting coordinates (sigma^2 * 1e9)."""
    samples = np.array(samples, dtype=float, copy=True)
    samples[..., 4] = np.exp(samples[..., 4]) * SIGMA2_REPORT_SCALE
    return samples
