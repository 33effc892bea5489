"""Chebyshev-Gauss-Lobatto grids, differentiation and quadrature."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class ChebyshevGrid:
    """Nodes ``a + (b - a)(1 + cos(pi j / N)) / 2``, j = 0..N (so node 0 is ``b``).

    ``D1``/``D2`` map nodal values to nodal first/second derivatives of the
    interpolant; ``weights`` is the Clenshaw-Curtis rule on ``[a, b]``.
    """
    N: int
    domain: tuple
    nodes: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.N + 1

    def barycentric_weights(self) -> np.ndarray:
        w = (-1.0) ** np.arange(self.N + 1)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def interpolation_matrix(self, points) -> np.ndarray:
        """Rows evaluating the nodal interpolant at ``points``."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        w = self.barycentric_weights()
        out = np.zeros((points.size, self.size))
        for i, x in enumerate(points):
            diff = x - self.nodes
            hit = np.flatnonzero(diff == 0.0)
            if hit.size:
                out[i, hit[0]] = 1.0
                continue
            t = w / diff
            out[i] = t / t.sum()
        return out


def _clenshaw_curtis(N: int) -> np.ndarray:
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    inner = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N ** 2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(N * theta[inner]) / (N ** 2 - 1)
    else:
        w[0] = w[N] = 1.0 / N ** 2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / N
    return w


def _reference_diff(N: int):
    xi = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.ones(N + 1)
    c[0] = c[N] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    dX = xi[:, None] - xi[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return xi, D


@lru_cache(maxsize=64)
def _cached_grid(N: int, a: float, b: float) -> ChebyshevGrid:
    xi, D = _reference_diff(N)
    half = 0.5 * (b - a)
    nodes = a + half * (1.0 + xi)
    nodes[0], nodes[-1] = b, a
    D1 = D / half
    D2 = D1 @ D1
    weights = _clenshaw_curtis(N) * half
    for arr in (nodes, D1, D2, weights):
        arr.setflags(write=False)
    return ChebyshevGrid(N=N, domain=(a, b), nodes=nodes, D1=D1, D2=D2, weights=weights)


def chebyshev_grid(N: int, domain=(-1.0, 1.0)) -> ChebyshevGrid:
    """Grid with ``N + 1`` Gauss-Lobatto nodes on ``domain``.

    Grids are cached and their arrays are read-only.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"Chebyshev order must be an integer >= 1, got {N!r}")
    a, b = (float(v) for v in domain)
    if not (np.isfinite(a) and np.isfinite(b)) or not b > a:
        raise ValueError(f"degenerate domain {domain!r}")
    return _cached_grid(int(N), a, b)


@lru_cache(maxsize=64)
def _galerkin(N: int, a: float, b: float, weight_power: int):
    grid = chebyshev_grid(N, (a, b))
    # Gauss-Legendre with N + 2 points integrates r^2 * (degree 2N) exactly.
    g, gw = np.polynomial.legendre.leggauss(N + 2 + weight_power)
    q = a + 0.5 * (b - a) * (g + 1.0)
    qw = gw * 0.5 * (b - a) * q ** weight_power
    phi = grid.interpolation_matrix(q)
    dphi = phi @ grid.D1
    M = phi.T @ (qw[:, None] * phi)
    K = dphi.T @ (qw[:, None] * dphi)
    M = 0.5 * (M + M.T)
    K = 0.5 * (K + K.T)
    for arr in (M, K):
        arr.setflags(write=False)
    return M, K


def galerkin_matrices(grid: ChebyshevGrid, weight_power: int = 0):
    """Exact mass and stiffness matrices of the nodal Lagrange basis.

    ``M[i, j] = int x^p l_i l_j dx`` and ``K[i, j] = int x^p l_i' l_j' dx``
    over the grid domain, with ``p = weight_power`` (2 for spherical
    particles).  ``ones @ M`` reproduces the Clenshaw-Curtis weights when
    ``p = 0``.
    """
    a, b = grid.domain
    return _galerkin(grid.N, a, b, int(weight_power))
