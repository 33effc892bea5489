"""Open-circuit potential fits.

Graphite (negative) and LiCoO2 (positive) stoichiometry-to-potential fits,
as distributed with the fastDFN/SPMeT ``params_LCO`` parameter set that
also supplies the default :class:`~spme_ident.parameters.ParameterSet`::

    U_n(x) = 0.194 + 1.5 exp(-120 x)
             + 0.0351 tanh((x - 0.286)/0.083) - 0.0045 tanh((x - 0.849)/0.119)
             - 0.035 tanh((x - 0.9233)/0.05) - 0.0147 tanh((x - 0.5)/0.034)
             - 0.102 tanh((x - 0.194)/0.142) - 0.022 tanh((x - 0.9)/0.0164)
             - 0.011 tanh((x - 0.124)/0.0226) + 0.0155 tanh((x - 0.105)/0.029)

    U_p(y) = 2.16216 + 0.07645 tanh(30.834 - 54.4806 y)
             + 2.1581 tanh(52.294 - 50.294 y) - 0.14169 tanh(11.0923 - 19.8543 y)
             + 0.2051 tanh(1.4684 - 5.4888 y) + 0.2531 tanh((0.56478 - y)/0.1316)
             - 0.02167 tanh((y - 0.525)/0.006)

The functions are written with plain numpy expressions so that the same
source compiles under numba for the fused voltage kernel.  Further fits can
be added to :data:`OCP_FUNCTIONS` and selected by name through
``ParameterSet.ocp_n`` / ``ParameterSet.ocp_p``.
"""
import numpy as np
from scipy.optimize import brentq


class DomainError(ValueError):
    """Input outside the domain of a model relation."""


def graphite(x):
    return (0.194 + 1.5 * np.exp(-120.0 * x)
            + 0.0351 * np.tanh((x - 0.286) / 0.083)
            - 0.0045 * np.tanh((x - 0.849) / 0.119)
            - 0.035 * np.tanh((x - 0.9233) / 0.05)
            - 0.0147 * np.tanh((x - 0.5) / 0.034)
            - 0.102 * np.tanh((x - 0.194) / 0.142)
            - 0.022 * np.tanh((x - 0.9) / 0.0164)
            - 0.011 * np.tanh((x - 0.124) / 0.0226)
            + 0.0155 * np.tanh((x - 0.105) / 0.029))


def lco(y):
    return (2.16216 + 0.07645 * np.tanh(30.834 - 54.4806 * y)
            + 2.1581 * np.tanh(52.294 - 50.294 * y)
            - 0.14169 * np.tanh(11.0923 - 19.8543 * y)
            + 0.2051 * np.tanh(1.4684 - 5.4888 * y)
            + 0.2531 * np.tanh((-y + 0.56478) / 0.1316)
            - 0.02167 * np.tanh((y - 0.525) / 0.006))


OCP_FUNCTIONS = {"graphite": graphite, "lco": lco}

# Brackets containing the unique stoichiometry where each default fit hits
# the tabulated reference OCP (0.18 V and 3.94 V).
_REFERENCE_BRACKETS = {"graphite": (0.5, 0.6), "lco": (0.7, 0.8)}


def ocp_function(name: str):
    try:
        return OCP_FUNCTIONS[name]
    except KeyError:
        raise KeyError(f"unknown OCP function {name!r}; known: {sorted(OCP_FUNCTIONS)}")


def ocp(electrode: str, stoichiometry, params=None):
    """Half-cell open-circuit potential (V) of electrode ``'n'`` or ``'p'``."""
    if electrode not in ("n", "p"):
        raise ValueError(f"electrode must be 'n' or 'p', got {electrode!r}")
    x = np.asarray(stoichiometry, dtype=float)
    if np.any(~(x >= 0.0)) or np.any(~(x <= 1.0)):
        raise DomainError("stoichiometry must lie in [0, 1]")
    if params is None:
        name = "graphite" if electrode == "n" else "lco"
    else:
        name = params.ocp_n if electrode == "n" else params.ocp_p
    value = ocp_function(name)(x)
    return float(value) if np.ndim(value) == 0 else value


def reference_stoichiometry(name: str, target: float) -> float:
    """Stoichiometry at which fit ``name`` equals ``target`` volts."""
    lo, hi = _REFERENCE_BRACKETS.get(name, (1e-6, 1 - 1e-6))
    fn = ocp_function(name)
    return brentq(lambda s: fn(s) - target, lo, hi, xtol=1e-14)
