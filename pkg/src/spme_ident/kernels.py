"""Hot loops of the simulator.

Two interchangeable implementations of each kernel:

* ``*_numba``: explicit per-sample loops compiled with numba.
* ``*_numpy``: vectorized numpy.  State propagation is done in modal
  coordinates with an FFT convolution instead of a time loop.

The module-level ``propagate`` is the numba version unless
``SPME_IDENT_DISABLE_NUMBA`` is set (see :mod:`spme_ident._jit`).
"""
from __future__ import annotations

import numpy as np

from . import _jit
from .ocp import ocp_function

# layout of the constants vector consumed by the voltage kernels
(C_MAX_N, C_MAX_P, M_N, M_P, AL_N, AL_P, TWO_VT, ETA_C_GAIN, OHMIC_R) = range(9)


def voltage_constants(params, t_plus: float) -> np.ndarray:
    from .voltage import electrolyte_resistance, solid_resistance

    two_vt = 2.0 * params.thermal_voltage
    return np.array([
        params.c_max_n, params.c_max_p, params.m_n, params.m_p,
        params.a_n * params.L_n, params.a_p * params.L_p, two_vt,
        two_vt / params.c_e_typ * (1.0 - t_plus),
        electrolyte_resistance(params) + solid_resistance(params),
    ])


# ---------------------------------------------------------------- propagation

def _propagate_loop(Ad, Bd, x0, current, rows):
    """Outputs ``rows @ x_k`` for k = 0..n-1 with ``x_{k+1} = Ad x_k + Bd u_k``."""
    n = current.shape[0]
    m = x0.shape[0]
    p = rows.shape[0]
    out = np.empty((n, p))
    x = x0.copy()
    nxt = np.empty(m)
    for k in range(n):
        for r in range(p):
            acc = 0.0
            for i in range(m):
                acc += rows[r, i] * x[i]
            out[k, r] = acc
        if k == n - 1:
            break
        u = current[k]
        for i in range(m):
            acc = Bd[i] * u
            for j in range(m):
                acc += Ad[i, j] * x[j]
            nxt[i] = acc
        for i in range(m):
            x[i] = nxt[i]
    return out


def _as_rows(rows, m):
    if rows is None:
        return np.eye(m)
    return np.atleast_2d(np.asarray(rows, dtype=float))


def propagate_numpy(Ad, Bd, x0, current, rows=None):
    """Modal/FFT evaluation of the recursion in :func:`_propagate_loop`.

    Returns the full state trajectory when ``rows`` is None.
    """
    Ad = np.asarray(Ad, dtype=float)
    Bd = np.asarray(Bd, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    current = np.asarray(current, dtype=float)
    C = _as_rows(rows, x0.shape[0])
    n = current.shape[0]
    if n == 0:
        return np.empty((0, C.shape[0]))
    lam, V = np.linalg.eig(Ad)
    if np.max(np.abs(lam.imag), initial=0.0) > 1e-10:
        # complex spectrum: keep to the plain recursion
        return _propagate_loop(Ad, Bd, x0, current, C)
    lam = lam.real
    V = V.real
    Vinv = np.linalg.inv(V)
    z0 = Vinv @ x0
    b = Vinv @ Bd
    powers = lam[None, :] ** np.arange(n)[:, None]
    z = powers * z0
    if n > 1:
        h = np.zeros_like(powers)
        h[1:] = powers[:-1] * b
        size = 1 << int(2 * n - 1).bit_length()
        spec = np.fft.rfft(h, size, axis=0) * np.fft.rfft(current, size)[:, None]
        z += np.fft.irfft(spec, size, axis=0)[:n]
    return z @ (C @ V).T


# -------------------------------------------------------------------- voltage

def voltage_numpy(c_ss_n, c_ss_p, c_e_n, c_e_p, current, consts, un, up):
    """Terminal voltage series and the index of the first invalid sample.

    The index is -1 when every readout lies in its physical domain; the
    voltage is only meaningful in that case.
    """
    c_ss_n = np.asarray(c_ss_n)
    c_ss_p = np.asarray(c_ss_p)
    bad = ((c_ss_n < 0.0) | (c_ss_n > consts[C_MAX_N]) | (c_ss_p < 0.0)
           | (c_ss_p > consts[C_MAX_P]) | ~(c_e_n > 0.0) | ~(c_e_p > 0.0)
           | ~np.isfinite(c_ss_n) | ~np.isfinite(c_ss_p))
    if bad.any():
        return np.full(c_ss_n.shape, np.nan), int(np.argmax(bad))
    u_eq = up(c_ss_p / consts[C_MAX_P]) - un(c_ss_n / consts[C_MAX_N])
    j0_n = consts[M_N] * np.sqrt(c_ss_n * (consts[C_MAX_N] - c_ss_n) * c_e_n)
    j0_p = consts[M_P] * np.sqrt(c_ss_p * (consts[C_MAX_P] - c_ss_p) * c_e_p)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg_n = np.where(current == 0.0, 0.0, current / (consts[AL_N] * j0_n))
        arg_p = np.where(current == 0.0, 0.0, current / (consts[AL_P] * j0_p))
    eta_r = -consts[TWO_VT] * (np.arcsinh(arg_n) + np.arcsinh(arg_p))
    eta_c = consts[ETA_C_GAIN] * (c_e_p - c_e_n)
    v = u_eq + eta_r + eta_c - consts[OHMIC_R] * current
    if not np.all(np.isfinite(v)):
        return v, int(np.argmax(~np.isfinite(v)))
    return v, -1


def _voltage_loop_factory(un, up):
    def kernel(c_ss_n, c_ss_p, c_e_n, c_e_p, current, consts):
        n = current.shape[0]
        v = np.empty(n)
        cmax_n = consts[0]
        cmax_p = consts[1]
        for k in range(n):
            cn = c_ss_n[k]
            cp = c_ss_p[k]
            en = c_e_n[k]
            ep = c_e_p[k]
            if not (cn >= 0.0 and cn <= cmax_n and cp >= 0.0 and cp <= cmax_p
                    and en > 0.0 and ep > 0.0):
                return v, k
            i = current[k]
            eta = 0.0
            if i != 0.0:
                j0n = consts[2] * np.sqrt(cn * (cmax_n - cn) * en)
                j0p = consts[3] * np.sqrt(cp * (cmax_p - cp) * ep)
                if j0n == 0.0 or j0p == 0.0:
                    return v, k
                eta = -consts[6] * (np.arcsinh(i / (consts[4] * j0n))
                                    + np.arcsinh(i / (consts[5] * j0p)))
            v[k] = (up(cp / cmax_p) - un(cn / cmax_n) + eta
                    + consts[7] * (ep - en) - consts[8] * i)
        return v, -1
    return kernel


_VOLTAGE_KERNELS = {}


def _numba_voltage_kernel(ocp_n: str, ocp_p: str):
    key = (ocp_n, ocp_p)
    if key not in _VOLTAGE_KERNELS:
        un = _jit.njit(ocp_function(ocp_n))
        up = _jit.njit(ocp_function(ocp_p))
        _VOLTAGE_KERNELS[key] = _jit.njit(_voltage_loop_factory(un, up))
    return _VOLTAGE_KERNELS[key]


if _jit.HAVE_NUMBA:
    _propagate_jit = _jit.njit(cache=True)(_propagate_loop)

    def propagate_numba(Ad, Bd, x0, current, rows=None):
        x0 = np.ascontiguousarray(x0, dtype=float)
        return _propagate_jit(np.ascontiguousarray(Ad, dtype=float),
                              np.ascontiguousarray(Bd, dtype=float), x0,
                              np.ascontiguousarray(current, dtype=float),
                              np.ascontiguousarray(_as_rows(rows, x0.shape[0])))

    def voltage_numba(c_ss_n, c_ss_p, c_e_n, c_e_p, current, consts,
                      ocp_n="graphite", ocp_p="lco"):
        kernel = _numba_voltage_kernel(ocp_n, ocp_p)
        v, bad = kernel(*(np.ascontiguousarray(a, dtype=float) for a in
                          (c_ss_n, c_ss_p, c_e_n, c_e_p, current, consts)))
        return v, int(bad)
else:  # pragma: no cover
    propagate_numba = None
    voltage_numba = None


def _voltage_numpy_by_name(c_ss_n, c_ss_p, c_e_n, c_e_p, current, consts,
                           ocp_n="graphite", ocp_p="lco"):
    return voltage_numpy(c_ss_n, c_ss_p, c_e_n, c_e_p, np.asarray(current, dtype=float),
                         consts, ocp_function(ocp_n), ocp_function(ocp_p))


def backend() -> str:
    return "numba" if _jit.USE_NUMBA else "numpy"


# The voltage stage is dominated by tanh/exp/asinh; numpy's SIMD ufuncs run
# several times faster than numba's scalar libm calls, so it stays on numpy
# for both backends (see benchmarks/bench_kernels.py).
voltage_series = _voltage_numpy_by_name
propagate = propagate_numba if _jit.USE_NUMBA else propagate_numpy
