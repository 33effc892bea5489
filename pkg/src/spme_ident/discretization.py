"""Spectral semi-discretization of the SPMe and its exact discrete-time form.

Both PDEs are discretized with a nodal Chebyshev spectral method: the
unknowns are the values at Chebyshev-Gauss-Lobatto nodes and the equations
are the weak (Galerkin) form with exactly integrated mass and stiffness
matrices.  Flux boundary conditions enter as natural boundary terms, so the
input of every subsystem is the raw applied current density.  The weak form
makes the discrete operators conserve lithium exactly: the volume-average
row of each particle and the porosity-weighted quadrature row of the
electrolyte are left null vectors of the state matrices.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import kernels
from .chebyshev import chebyshev_grid, galerkin_matrices
from .ocp import DomainError
from .parameters import ParameterSet
from .theta import InvalidTheta, ThetaVector

# nodes per particle, per electrolyte region (n, s, p): 3 + 3 + 8 states
DEFAULT_NODE_COUNTS = (3, 3, (4, 2, 4))


class SimulationDomainError(DomainError):
    def __init__(self, step: int, message: str = ""):
        self.step = int(step)
        super().__init__(message or f"concentration left its physical range at step {step}")


@dataclass(frozen=True)
class ContinuousSystem:
    """``dx/dt = A x + B I`` with named output rows."""
    A: np.ndarray
    B: np.ndarray
    labels: tuple
    rows: dict = field(default_factory=dict)
    nodes: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class DiscreteBlock:
    Ad: np.ndarray
    Bd: np.ndarray
    labels: tuple
    rows: dict


@dataclass(frozen=True)
class ModelState:
    """Nodal concentrations (mol/m^3) of both particles and the electrolyte.

    Arrays are 1-D for a single state, 2-D (time x nodes) for trajectories.
    """
    c_s_n: np.ndarray
    c_s_p: np.ndarray
    c_e: np.ndarray

    def check(self):
        for arr in (self.c_s_n, self.c_s_p, self.c_e):
            if not np.all(np.isfinite(arr)):
                raise DomainError("model state contains non-finite values")
        if np.any(self.c_e <= 0):
            raise DomainError("electrolyte concentration must be positive")


@dataclass(frozen=True)
class DiscreteModel:
    negative: DiscreteBlock
    positive: DiscreteBlock
    electrolyte: DiscreteBlock
    dt: float
    theta: ThetaVector
    params: ParameterSet
    node_counts: tuple

    @property
    def state_size(self) -> int:
        return sum(b.Ad.shape[0] for b in (self.negative, self.positive, self.electrolyte))

    @property
    def labels(self) -> tuple:
        return self.negative.labels + self.positive.labels + self.electrolyte.labels

    def uniform_state(self, x_n: float, x_p: float, c_e: float | None = None) -> ModelState:
        """Rest state at surface stoichiometries ``x_n``, ``x_p``."""
        p = self.params
        c_e = p.c_e_typ if c_e is None else c_e
        return ModelState(
            c_s_n=np.full(self.negative.Ad.shape[0], x_n * p.c_max_n),
            c_s_p=np.full(self.positive.Ad.shape[0], x_p * p.c_max_p),
            c_e=np.full(self.electrolyte.Ad.shape[0], float(c_e)),
        )


def build_particle_system(D_s, R_k, a_k, L_k, sign, N, F=96485.0, name="c_s") -> ContinuousSystem:
    """Spherical diffusion in one electrode-averaged particle.

    ``N`` is the number of nodes on ``[0, R_k]``.  ``sign`` is +1 for the
    negative electrode (lithium leaves on discharge) and -1 for the positive.
    Rows: ``surface`` (value at r = R) and ``volume_average``.
    """
    if not (D_s > 0 and R_k > 0 and a_k > 0 and L_k > 0 and F > 0):
        raise ValueError("particle parameters must be positive")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    grid = chebyshev_grid(int(N) - 1, (0.0, R_k))
    M, K = galerkin_matrices(grid, weight_power=2)
    Minv = np.linalg.inv(M)
    A = -D_s * (Minv @ K)
    surface = np.zeros(grid.size)
    surface[0] = 1.0  # node 0 sits at r = R
    # weak form boundary term: D r^2 dc/dr |_R = -R^2 * sign * I / (F a L)
    B = -(sign * R_k ** 2 / (F * a_k * L_k)) * (Minv @ surface)
    volume_average = 3.0 / R_k ** 3 * M.sum(axis=0)
    labels = tuple(f"{name}[r={r:.4g}]" for r in grid.nodes)
    return ContinuousSystem(A=A, B=B, labels=labels, nodes=grid.nodes.copy(),
                            rows={"surface": surface, "volume_average": volume_average})


def build_electrolyte_system(params: ParameterSet, t_plus, N_n=4, N_s=2, N_p=4,
                             D_e=None) -> ContinuousSystem:
    """Three-region electrolyte diffusion with shared interface nodes.

    Each region carries its own Chebyshev grid (``N_k`` nodes).  The interface
    nodes are shared, which enforces continuity of concentration; continuity
    of the flux ``eps^b D dc/dx`` and the zero-flux outer walls are natural
    conditions of the weak form.  Nodes are ordered by increasing x.
    Rows: ``average_n``, ``average_p`` (electrode means) and ``total``
    (integral of eps * c over the cell, mol/m^2).
    """
    counts = (int(N_n), int(N_s), int(N_p))
    if min(counts) < 2:
        raise ValueError("each electrolyte region needs at least 2 nodes")
    if not 0 < t_plus < 1:
        raise ValueError("t_plus must lie in (0, 1)")
    D_e = params.D_e_typ if D_e is None else D_e
    if not D_e > 0:
        raise ValueError("electrolyte diffusivity must be positive")
    eps = (params.eps_n, params.eps_s, params.eps_p)
    lengths = (params.L_n, params.L_s, params.L_p)
    gain = (1.0 - t_plus) / params.F
    sources = (gain / params.L_n, 0.0, -gain / params.L_p)

    size = sum(counts) - 2
    M = np.zeros((size, size))
    K = np.zeros((size, size))
    load = np.zeros(size)
    nodes = np.zeros(size)
    averages = []
    offset, x0 = 0, 0.0
    for k, (count, L_k) in enumerate(zip(counts, lengths)):
        grid = chebyshev_grid(count - 1, (x0, x0 + L_k))
        Mk, Kk = galerkin_matrices(grid)
        order = np.arange(count)[::-1]  # ascending x
        Mk = Mk[np.ix_(order, order)]
        Kk = Kk[np.ix_(order, order)]
        idx = np.arange(offset, offset + count)
        M[np.ix_(idx, idx)] += eps[k] * Mk
        K[np.ix_(idx, idx)] += eps[k] ** params.brug * D_e * Kk
        weights = Mk.sum(axis=0)
        load[idx] += sources[k] * weights
        nodes[idx] = grid.nodes[order]
        row = np.zeros(size)
        row[idx] = weights / L_k
        averages.append(row)
        offset += count - 1
        x0 += L_k

    Minv = np.linalg.inv(M)
    A = -(Minv @ K)
    B = Minv @ load
    labels = tuple(f"c_e[x={x:.4g}]" for x in nodes)
    rows = {"average_n": averages[0], "average_p": averages[2], "total": M.sum(axis=0)}
    return ContinuousSystem(A=A, B=B, labels=labels, rows=rows, nodes=nodes)


def c2d_zoh(A, B, dt):
    """Exact zero-order-hold discretization ``(exp(A dt), int_0^dt exp(A s) ds B)``.

    Uses the exponential of the augmented matrix ``[[A, B], [0, 0]]``, which
    stays valid for singular ``A``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("non-finite entries in system matrices")
    vector = B.ndim == 1
    B2 = B[:, None] if vector else B
    n, m = B2.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A
    aug[:n, n:] = B2
    E = expm(aug * dt)
    Ad = E[:n, :n]
    Bd = E[:n, n:]
    return Ad, (Bd[:, 0] if vector else Bd)


def _discrete(system: ContinuousSystem, dt: float) -> DiscreteBlock:
    Ad, Bd = c2d_zoh(system.A, system.B, dt)
    for arr in (Ad, Bd):
        arr.setflags(write=False)
    return DiscreteBlock(Ad=Ad, Bd=Bd, labels=system.labels, rows=system.rows)


def continuous_systems(theta: ThetaVector, params: ParameterSet,
                       node_counts=DEFAULT_NODE_COUNTS):
    """``(negative, positive, electrolyte)`` continuous systems for ``theta``."""
    if not isinstance(theta, ThetaVector):
        theta = ThetaVector.from_array(theta)
    if not theta.is_valid():
        raise InvalidTheta(f"invalid theta {theta.scaled}")
    n_n, n_p, electrolyte_counts = node_counts
    neg = build_particle_system(theta.D_n, params.R_n, params.a_n, params.L_n, +1,
                                n_n, params.F, name="c_s_n")
    pos = build_particle_system(theta.D_p, params.R_p, params.a_p, params.L_p, -1,
                                n_p, params.F, name="c_s_p")
    ele = build_electrolyte_system(params, theta.t_plus, *electrolyte_counts, D_e=theta.D_e)
    return neg, pos, ele


def assemble_model(theta: ThetaVector, params: ParameterSet, dt: float,
                   node_counts=DEFAULT_NODE_COUNTS) -> DiscreteModel:
    neg, pos, ele = continuous_systems(theta, params, node_counts)
    node_counts = (int(node_counts[0]), int(node_counts[1]),
                   tuple(int(c) for c in node_counts[2]))
    if not isinstance(theta, ThetaVector):
        theta = ThetaVector.from_array(theta)
    return DiscreteModel(negative=_discrete(neg, dt), positive=_discrete(pos, dt),
                         electrolyte=_discrete(ele, dt), dt=float(dt), theta=theta,
                         params=params, node_counts=node_counts)


def readouts(model: DiscreteModel, state: ModelState):
    """``(c_ss_n, c_ss_p, c_e_n_avg, c_e_p_avg)`` for a state or trajectory."""
    ele = model.electrolyte.rows
    return (state.c_s_n @ model.negative.rows["surface"],
            state.c_s_p @ model.positive.rows["surface"],
            state.c_e @ ele["average_n"],
            state.c_e @ ele["average_p"])


def simulate(model: DiscreteModel, current, x0: ModelState, return_states: bool = False):
    """Voltage response to a current sampled at ``model.dt``.

    Sample 0 uses ``x0``; sample k+1 uses the state after stepping with
    current k.  Raises :class:`SimulationDomainError` with the first
    offending step when a concentration leaves its physical range.
    """
    current = np.ascontiguousarray(current, dtype=float)
    if current.ndim != 1:
        raise ValueError("current must be a 1-D series")
    x0.check()
    neg, pos, ele = model.negative, model.positive, model.electrolyte
    if return_states:
        traj = ModelState(
            c_s_n=kernels.propagate(neg.Ad, neg.Bd, x0.c_s_n, current),
            c_s_p=kernels.propagate(pos.Ad, pos.Bd, x0.c_s_p, current),
            c_e=kernels.propagate(ele.Ad, ele.Bd, x0.c_e, current),
        )
        outputs = readouts(model, traj)
    else:
        e_rows = np.vstack([ele.rows["average_n"], ele.rows["average_p"]])
        c_e_avg = kernels.propagate(ele.Ad, ele.Bd, x0.c_e, current, e_rows)
        outputs = (kernels.propagate(neg.Ad, neg.Bd, x0.c_s_n, current, neg.rows["surface"])[:, 0],
                   kernels.propagate(pos.Ad, pos.Bd, x0.c_s_p, current, pos.rows["surface"])[:, 0],
                   c_e_avg[:, 0], c_e_avg[:, 1])
    consts = kernels.voltage_constants(model.params, model.theta.t_plus)
    v, bad = kernels.voltage_series(*outputs, current, consts,
                                    model.params.ocp_n, model.params.ocp_p)
    if bad >= 0:
        raise SimulationDomainError(bad)
    if return_states:
        return v, traj
    return v


def write_trajectory_csv(path, model: DiscreteModel, trajectory: ModelState,
                         voltage: Sequence[float], t0: float = 0.0):
    """Debug dump: one row per sample with time, every node value and V."""
    stacked = np.hstack([trajectory.c_s_n, trajectory.c_s_p, trajectory.c_e])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t",) + model.labels + ("V",))
        for k, (row, v) in enumerate(zip(stacked, voltage)):
            writer.writerow([repr(t0 + k * model.dt)] + [repr(float(x)) for x in row]
                            + [repr(float(v))])
