"""Posterior over the five estimated quantities and an adaptive Metropolis sampler.

Sampling coordinates are those of :class:`~spme_ident.theta.ThetaVector`.
Priors: Gamma on the three scaled diffusivities (mode at the nominal value,
99 % of the mass below ``upper``), Beta(4, 5.5) on t+, flat on ln sigma^2.

The sampler is robust adaptive Metropolis: proposals ``theta + S w`` with
``w ~ N(0, I)``; after every step the lower-triangular ``S`` is updated so
that ``S S^T`` becomes ``S (I + eta (alpha - alpha*) w w^T / |w|^2) S^T`` with
``eta = n^-gamma``, steering the acceptance rate towards ``alpha*``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import betaln, gammainc

from .discretization import SimulationDomainError, assemble_model, simulate
from .ioutil import atomic_write_text, format_csv, read_csv_columns
from .ocp import DomainError
from .parameters import ParameterSet
from .theta import NAMES, REPORT_NAMES, InvalidTheta, ThetaVector, to_report


class PriorError(ValueError):
    pass


class InitializationError(RuntimeError):
    pass


# ----------------------------------------------------------------------- priors

def fit_gamma_prior(mode: float, upper: float = 100.0, mass: float = 0.99):
    """Shape ``k`` and scale ``s`` with ``(k-1) s = mode`` and ``P(X < upper) = mass``."""
    if not 0 < mode < upper:
        raise PriorError(f"need 0 < mode < upper, got mode={mode}, upper={upper}")
    if not 0 < mass < 1:
        raise PriorError("mass must lie in (0, 1)")

    def gap(k):
        return gammainc(k, upper * (k - 1.0) / mode) - mass

    lo, hi = 1.0 + 1e-12, 2.0
    while gap(hi) < 0:
        lo, hi = hi, hi * 2.0
        if hi > 1e8:
            raise PriorError("gamma prior fit did not bracket")
    k = brentq(gap, lo, hi, xtol=1e-14, rtol=1e-14)
    return k, mode / (k - 1.0)


@dataclass(frozen=True)
class PriorSpec:
    gamma: tuple                       # ((k, s),) * 3 for the scaled diffusivities
    beta: tuple = (4.0, 5.5)           # t+

    @classmethod
    def from_modes(cls, modes, upper: float = 100.0, mass: float = 0.99,
                   beta=(4.0, 5.5)) -> "PriorSpec":
        return cls(tuple(fit_gamma_prior(m, upper, mass) for m in modes), tuple(beta))

    @classmethod
    def default(cls, theta_nominal: ThetaVector | None = None) -> "PriorSpec":
        theta_nominal = theta_nominal or ThetaVector.from_params(ParameterSet())
        return cls.from_modes(theta_nominal.scaled[:3])

    def sample(self, rng: np.random.Generator, log_sigma2_range=(-25.0, -5.0)) -> np.ndarray:
        ds = [rng.gamma(k, s) for k, s in self.gamma]
        tp = rng.beta(*self.beta)
        return np.array(ds + [tp, rng.uniform(*log_sigma2_range)])

    def to_dict(self) -> dict:
        return {"gamma": [list(g) for g in self.gamma], "beta": list(self.beta)}


def _gamma_logpdf(x, k, s):
    return (k - 1.0) * math.log(x) - x / s - math.lgamma(k) - k * math.log(s)


def log_prior(theta, priors: PriorSpec) -> float:
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        return -math.inf
    total = 0.0
    for x, (k, s) in zip(theta[:3], priors.gamma):
        if x <= 0:
            return -math.inf
        total += _gamma_logpdf(x, k, s)
    tp = theta[3]
    if not 0 < tp < 1:
        return -math.inf
    a, b = priors.beta
    total += (a - 1.0) * math.log(tp) + (b - 1.0) * math.log1p(-tp) - betaln(a, b)
    return total


def log_likelihood(y, f, log_sigma2: float) -> float:
    """Gaussian i.i.d. log-likelihood with variance ``exp(log_sigma2)``."""
    r = np.asarray(y) - np.asarray(f)
    n = r.size
    rss = float(r @ r)
    return -0.5 * n * (math.log(2.0 * math.pi) + log_sigma2) - 0.5 * rss * math.exp(-log_sigma2)


class ForwardModel:
    """Clean voltage ``f(theta)`` for a dataset's excitation and initial state."""

    def __init__(self, dataset, params: ParameterSet | None = None, node_counts=None):
        self.params = params or ParameterSet()
        self.current = np.ascontiguousarray(dataset.current, dtype=float)
        self.dt = dataset.dt
        self.x_n0 = dataset.x_n0
        self.x_p0 = dataset.x_p0
        self.node_counts = node_counts or dataset.node_counts

    def __call__(self, theta) -> np.ndarray:
        if not isinstance(theta, ThetaVector):
            # the noise variance does not enter the simulation
            theta = ThetaVector(tuple(np.asarray(theta, dtype=float)[:4]) + (0.0,))
        theta.validate()
        model = assemble_model(theta, self.params, self.dt, self.node_counts)
        return simulate(model, self.current, model.uniform_state(self.x_n0, self.x_p0))


def log_posterior(theta, dataset, model_builder: Callable, priors: PriorSpec) -> float:
    """Unnormalized log posterior; ``-inf`` outside the support or on simulator failure."""
    theta = np.asarray(theta, dtype=float)
    lp = log_prior(theta, priors)
    if lp == -math.inf:
        return lp
    try:
        f = model_builder(theta)
    except (SimulationDomainError, DomainError, InvalidTheta, FloatingPointError):
        return -math.inf
    if not np.all(np.isfinite(f)):
        return -math.inf
    return lp + log_likelihood(dataset.v_noisy, f, theta[4])


class Posterior:
    """Callable log posterior bound to one dataset."""

    def __init__(self, dataset, priors: PriorSpec | None = None,
                 params: ParameterSet | None = None, node_counts=None):
        self.dataset = dataset
        self.priors = priors or PriorSpec.default(dataset.theta_true)
        self.model = ForwardModel(dataset, params, node_counts)

    def __call__(self, theta) -> float:
        return log_posterior(theta, self.dataset, self.model, self.priors)

    def sample_prior(self, rng):
        return self.priors.sample(rng)


# ---------------------------------------------------------------------- sampler

@dataclass
class ChainConfig:
    iterations: int = 20000
    burn_in: int = 5000
    seed: int = 0
    sigma0_scale: float = 1e-3        # initial proposal covariance = sigma0_scale * I
    target_acceptance: float = 0.234
    gamma: float = 2.0 / 3.0
    max_init_tries: int = 1000
    adapt: bool = True                # False gives plain random-walk Metropolis

    def validate(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must lie in [0, iterations)")
        if not self.sigma0_scale > 0:
            raise ValueError("sigma0_scale must be positive")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target acceptance must lie in (0, 1)")
        if not 0.5 < self.gamma <= 1:
            raise ValueError("adaptation exponent must lie in (0.5, 1]")
        return self


@dataclass
class ChainState:
    theta: np.ndarray
    log_post: float
    S: np.ndarray
    n: int
    rng: np.random.Generator
    target_acceptance: float = 0.234
    gamma: float = 2.0 / 3.0
    adaptation_skips: int = 0
    adapt: bool = True


def adapt_factor(S, w, alpha, n, target, gamma):
    """Cholesky factor of ``S (I + eta (alpha - target) u u^T) S^T`` or None if not PD."""
    norm2 = float(w @ w)
    if norm2 == 0.0:
        return S
    eta = n ** (-gamma) * (alpha - target)
    Sw = S @ w
    M = S @ S.T + (eta / norm2) * np.outer(Sw, Sw)
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None


def ramh_step(state: ChainState, log_post: Callable):
    """One propose / accept / adapt cycle. Returns ``(state, accepted, alpha)``."""
    d = state.theta.size
    w = state.rng.standard_normal(d)
    candidate = state.theta + state.S @ w
    lp_c = log_post(candidate)
    if lp_c == -math.inf or not math.isfinite(lp_c):
        alpha = 0.0
    else:
        alpha = math.exp(min(0.0, lp_c - state.log_post))
    u = state.rng.uniform()
    accepted = u < alpha
    if accepted:
        state.theta = candidate
        state.log_post = lp_c
    if not state.adapt:
        S_new = state.S
    else:
        S_new = adapt_factor(state.S, w, alpha, state.n, state.target_acceptance, state.gamma)
    if S_new is None:
        state.adaptation_skips += 1
        warnings.warn(f"proposal adaptation skipped at iteration {state.n}: not positive definite",
                      RuntimeWarning, stacklevel=2)
    else:
        state.S = S_new
    state.n += 1
    return state, accepted, alpha


@dataclass
class Chain:
    samples: np.ndarray            # (iterations, d), state after each iteration
    accepted: np.ndarray           # (iterations,) bool
    burn_in: int
    seed: int
    dataset: str = ""
    initial: np.ndarray | None = None
    final_factor: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return self.samples.shape[0]

    @property
    def kept(self) -> np.ndarray:
        return self.samples[self.burn_in:]

    def acceptance_rate(self, after_burn_in: bool = True) -> float:
        acc = self.accepted[self.burn_in:] if after_burn_in else self.accepted
        return float(acc.mean()) if acc.size else math.nan


def initial_state(log_post, sampler, rng, tries):
    for _ in range(tries):
        theta = np.asarray(sampler(rng), dtype=float)
        lp = log_post(theta)
        if math.isfinite(lp):
            return theta, lp
    raise InitializationError(f"no finite log posterior in {tries} initial draws")


def run_chain(log_post: Callable, config: ChainConfig, initial=None, dim: int | None = None,
              dataset_label: str = "", progress: Callable | None = None,
              initial_factor=None) -> Chain:
    """Run the adaptive sampler.

    ``initial`` is either a starting point or a callable ``rng -> theta``
    drawn from until the log posterior is finite (``log_post.sample_prior``
    when omitted).  ``initial_factor`` replaces ``sqrt(sigma0_scale) * I`` as
    the starting proposal factor.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    if initial is None:
        initial = getattr(log_post, "sample_prior", None)
        if initial is None:
            raise ValueError("an initial point or sampler is required")
    if callable(initial):
        theta0, lp0 = initial_state(log_post, initial, rng, config.max_init_tries)
    else:
        theta0 = np.asarray(initial, dtype=float).copy()
        lp0 = log_post(theta0)
        if not math.isfinite(lp0):
            raise InitializationError("log posterior is not finite at the initial point")
    d = dim or theta0.size
    if initial_factor is None:
        S0 = math.sqrt(config.sigma0_scale) * np.eye(d)
    else:
        S0 = np.array(initial_factor, dtype=float)
        if S0.shape != (d, d) or not np.all(np.isfinite(S0)):
            raise ValueError("initial factor must be a finite d x d matrix")
    state = ChainState(theta=theta0, log_post=lp0, S=S0,
                       n=1, rng=rng, target_acceptance=config.target_acceptance,
                       gamma=config.gamma, adapt=config.adapt)
    samples = np.empty((config.iterations, d))
    accepted = np.zeros(config.iterations, dtype=bool)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i in range(config.iterations):
            state, acc, _ = ramh_step(state, log_post)
            samples[i] = state.theta
            accepted[i] = acc
            if progress is not None:
                progress(i + 1, state)
    if state.adaptation_skips:
        warnings.warn(f"{state.adaptation_skips} adaptation updates skipped", RuntimeWarning)
    return Chain(samples=samples, accepted=accepted, burn_in=config.burn_in, seed=config.seed,
                 dataset=dataset_label, initial=theta0, final_factor=state.S,
                 metadata={"adaptation_skips": state.adaptation_skips,
                           "config": asdict(config)})


# ------------------------------------------------------------------ chain files

CHAIN_COLUMNS = NAMES + ("accepted",)


def save_chain(chain: Chain, path) -> Path:
    path = Path(path)
    text = format_csv(CHAIN_COLUMNS, list(chain.samples.T) + [chain.accepted.astype(float)],
                      fmt=["%.17g"] * chain.samples.shape[1] + ["%d"])
    atomic_write_text(path, text)
    meta = {"burn_in": chain.burn_in, "seed": chain.seed, "dataset": chain.dataset,
            "iterations": chain.iterations,
            "initial": None if chain.initial is None else [float(v) for v in chain.initial],
            "metadata": chain.metadata}
    atomic_write_text(path.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_chain(path) -> Chain:
    path = Path(path)
    cols = read_csv_columns(path, CHAIN_COLUMNS)
    meta = json.loads(path.with_suffix(".json").read_text())
    samples = np.column_stack([cols[n] for n in NAMES]) if len(cols[NAMES[0]]) else np.empty((0, 5))
    return Chain(samples=samples, accepted=cols["accepted"].astype(bool),
                 burn_in=int(meta["burn_in"]), seed=int(meta["seed"]),
                 dataset=meta.get("dataset", ""),
                 initial=None if meta.get("initial") is None else np.array(meta["initial"]),
                 metadata=meta.get("metadata", {}))


# -------------------------------------------------------------------- summaries

JOINT_PAIRS = (("D_n", "D_p"), ("D_e", "t_plus"))


@dataclass
class PosteriorSummary:
    mmse: np.ndarray            # sampling coordinates
    std: np.ndarray
    report_mmse: np.ndarray     # reporting coordinates (sigma^2 * 1e9)
    report_std: np.ndarray
    n_samples: int
    acceptance_rate: float
    marginals: dict             # name -> (counts, edges), reporting coordinates
    joints: dict                # (name_x, name_y) -> (counts, x_edges, y_edges)

    def as_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "acceptance_rate": self.acceptance_rate,
            "mmse": dict(zip(REPORT_NAMES, map(float, self.report_mmse))),
            "std": dict(zip(REPORT_NAMES, map(float, self.report_std))),
        }


def _shifted_moments(x):
    # shifting by the first row keeps constant columns exact (std 0, mean x0)
    dev = x - x[0]
    mean = x[0] + dev.mean(axis=0)
    if x.shape[0] < 2:
        return mean, np.full(x.shape[1], np.nan)
    return mean, dev.std(axis=0, ddof=1)


def summarize(chain: Chain, bins: int = 50, burn_in: int | None = None) -> PosteriorSummary:
    """Posterior mean and standard deviation after burn-in plus histograms."""
    if int(bins) != bins or bins < 1:
        raise ValueError("bins must be a positive integer")
    burn = chain.burn_in if burn_in is None else burn_in
    kept = chain.samples[burn:]
    if kept.shape[0] == 0:
        raise ValueError("no samples left after burn-in")
    report = to_report(kept)
    mean, std = _shifted_moments(kept)
    rmean, rstd = _shifted_moments(report)
    marginals = {name: np.histogram(report[:, i], bins=bins)
                 for i, name in enumerate(REPORT_NAMES)}
    index = {n: i for i, n in enumerate(REPORT_NAMES)}
    joints = {}
    for a, b in JOINT_PAIRS:
        H, xe, ye = np.histogram2d(report[:, index[a]], report[:, index[b]], bins=bins)
        joints[(a, b)] = (H, xe, ye)
    acc = chain.accepted[burn:]
    return PosteriorSummary(mmse=mean, std=std, report_mmse=rmean,
                            report_std=rstd, n_samples=kept.shape[0],
                            acceptance_rate=float(acc.mean()), marginals=marginals,
                            joints=joints)


def bimodality_coefficient(x) -> float:
    """Sample bimodality coefficient ``(g^2 + 1) / (kurtosis + 3 (n-1)^2 / ((n-2)(n-3)))``.

    Values above 5/9 (the uniform distribution) suggest more than one mode.
    """
    from scipy.stats import kurtosis, skew

    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        raise ValueError("need at least 4 samples")
    g = skew(x, bias=False)
    k = kurtosis(x, bias=False)
    return float((g * g + 1.0) / (k + 3.0 * (n - 1) ** 2 / ((n - 2) * (n - 3))))
