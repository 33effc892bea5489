"""Maximum likelihood estimation and Cramer-Rao bounds.

The noise variance is profiled out of the Gaussian likelihood, so the MLE
minimizes the residual sum of squares over the four physical parameters
(searched in log / logit coordinates) and ``sigma^2 = RSS / n``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .bayes import ForwardModel
from .discretization import SimulationDomainError
from .ioutil import atomic_write_text
from .ocp import DomainError
from .theta import REPORT_NAMES, SIGMA2_REPORT_SCALE, InvalidTheta, ThetaVector

CONDITION_LIMIT = 1e12


class MLEConvergenceError(RuntimeError):
    def __init__(self, message, best: ThetaVector, evaluations: int):
        super().__init__(message)
        self.best = best
        self.evaluations = evaluations


class NonIdentifiableError(np.linalg.LinAlgError):
    def __init__(self, message, null_direction=None, condition=math.inf):
        super().__init__(message)
        self.null_direction = null_direction
        self.condition = condition


class JacobianError(ValueError):
    pass


@dataclass
class MLEOptions:
    xatol: float = 1e-6
    max_evaluations: int = 20000
    fd_step: float = 1e-4


def _to_search(theta4):
    d = np.asarray(theta4, dtype=float)
    return np.array([math.log(d[0]), math.log(d[1]), math.log(d[2]),
                     math.log(d[3] / (1.0 - d[3]))])


def _from_search(u):
    return np.array([math.exp(u[0]), math.exp(u[1]), math.exp(u[2]),
                     1.0 / (1.0 + math.exp(-u[3]))])


@dataclass
class MLEResult:
    theta: ThetaVector
    rss: float
    evaluations: int
    converged: bool = True


def mle(dataset, theta_init, options: MLEOptions | None = None, forward: Callable | None = None,
        params=None) -> MLEResult:
    """Nelder-Mead over (log D_n, log D_p, log D_e, logit t+).

    Stops when the simplex diameter falls below ``xatol`` in search
    coordinates; raises :class:`MLEConvergenceError` (carrying the best point)
    when the evaluation cap is hit first.
    """
    options = options or MLEOptions()
    forward = forward or ForwardModel(dataset, params)
    start = theta_init.as_array() if isinstance(theta_init, ThetaVector) else np.asarray(theta_init, float)
    if not ThetaVector.from_array(np.append(start[:4], 0.0)).is_valid():
        raise InvalidTheta(f"invalid initial theta {start}")
    y = np.asarray(dataset.v_noisy, dtype=float)

    def rss(u):
        try:
            r = y - forward(_from_search(u))
        except (SimulationDomainError, DomainError, InvalidTheta, OverflowError):
            return math.inf
        val = float(r @ r)
        return val if math.isfinite(val) else math.inf

    u0 = _to_search(start[:4])
    res = minimize(rss, u0, method="Nelder-Mead",
                   options={"xatol": options.xatol, "fatol": math.inf,
                            "maxfev": options.max_evaluations,
                            "maxiter": options.max_evaluations})
    # fatol = inf makes the simplex diameter the only stopping test
    best4 = _from_search(res.x)
    best_rss = float(res.fun)
    n = y.size
    sigma2 = best_rss / n
    # a perfect fit leaves ln sigma^2 = -inf
    theta = ThetaVector(tuple(best4) + (math.log(sigma2) if sigma2 > 0 else -math.inf,))
    if not res.success:
        raise MLEConvergenceError(f"Nelder-Mead stopped without convergence: {res.message}",
                                  theta, int(res.nfev))
    return MLEResult(theta=theta, rss=best_rss, evaluations=int(res.nfev))


def jacobian_fd(fn: Callable, theta, step: float = 1e-4) -> np.ndarray:
    """Central-difference Jacobian of ``fn`` with relative steps ``step * |theta_i|``."""
    theta = np.asarray(theta, dtype=float)
    base = np.asarray(fn(theta), dtype=float)
    if not np.all(np.isfinite(base)):
        raise JacobianError("model output is not finite at theta")
    J = np.empty((base.size, theta.size))
    for i in range(theta.size):
        h = step * abs(theta[i]) if theta[i] != 0 else step
        plus = theta.copy()
        minus = theta.copy()
        plus[i] += h
        minus[i] -= h
        J[:, i] = (np.asarray(fn(plus), dtype=float) - np.asarray(fn(minus), dtype=float)) / (2 * h)
    if not np.all(np.isfinite(J)):
        raise JacobianError("non-finite finite-difference Jacobian")
    return J


def fisher_information(J, sigma2: float, n: int | None = None, include_noise: bool = True):
    """``J^T J / sigma^2``, bordered by the noise-variance entry ``n / (2 sigma^4)``."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    block = J.T @ J / sigma2
    block = 0.5 * (block + block.T)
    if not include_noise:
        return block
    n = J.shape[0] if n is None else n
    p = block.shape[0]
    fim = np.zeros((p + 1, p + 1))
    fim[:p, :p] = block
    fim[p, p] = n / (2.0 * sigma2 * sigma2)
    return fim


def crlb(fim, condition_limit: float = CONDITION_LIMIT):
    """Inverse FIM and marginal standard deviations.

    Conditioning is judged after symmetric diagonal (Jacobi) scaling so that
    differing parameter units do not count as ill-conditioning.
    """
    fim = np.asarray(fim, dtype=float)
    d = np.diag(fim)
    if np.any(~(d > 0)):
        bad = np.zeros(d.size)
        bad[int(np.argmin(np.where(d > 0, np.inf, 0.0)))] = 1.0
        raise NonIdentifiableError("FIM has a non-positive diagonal entry", bad)
    s = 1.0 / np.sqrt(d)
    scaled = fim * np.outer(s, s)
    evals, evecs = np.linalg.eigh(scaled)
    cond = evals[-1] / evals[0] if evals[0] > 0 else math.inf
    if not cond < condition_limit:
        v = evecs[:, 0] * s
        raise NonIdentifiableError(
            f"FIM is singular or ill-conditioned (scaled condition {cond:.3g}); "
            f"null direction {np.round(v / np.linalg.norm(v), 6).tolist()}",
            v / np.linalg.norm(v), cond)
    cov = (evecs / evals) @ evecs.T
    cov = np.outer(s, s) * cov
    cov = 0.5 * (cov + cov.T)
    return cov, np.sqrt(np.diag(cov))


@dataclass
class FimResult:
    theta_mle: ThetaVector
    fim: np.ndarray                # coordinates (D_n, D_p, D_e scaled, t+, sigma^2 [V^2])
    covariance: np.ndarray
    sigma_crlb: np.ndarray         # reporting coordinates (sigma^2 * 1e9)
    rss: float
    evaluations: int
    converged: bool = True
    dataset: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def report_theta(self) -> np.ndarray:
        v = np.array(self.theta_mle.scaled)
        v[4] = self.theta_mle.sigma2 * SIGMA2_REPORT_SCALE
        return v

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "converged": self.converged,
            "evaluations": self.evaluations,
            "rss": self.rss,
            "theta_mle": dict(zip(REPORT_NAMES, map(float, self.report_theta))),
            "sigma_crlb": dict(zip(REPORT_NAMES, map(float, self.sigma_crlb))),
            "theta_mle_scaled": list(self.theta_mle.scaled),
            "fim": self.fim.tolist(),
            "covariance": self.covariance.tolist(),
            "extra": self.extra,
        }


def crlb_at(dataset, theta: ThetaVector, sigma2: float, forward: Callable | None = None,
            params=None, step: float = 1e-4):
    """FIM and CRLB at ``theta`` with noise variance ``sigma2``."""
    forward = forward or ForwardModel(dataset, params)
    J = jacobian_fd(lambda th: forward(th), theta.as_array()[:4], step)
    fim = fisher_information(J, sigma2, n=dataset.n)
    cov, sig = crlb(fim)
    sig = sig.copy()
    sig[4] *= SIGMA2_REPORT_SCALE
    return fim, cov, sig


def fit_mle_crlb(dataset, theta_init, options: MLEOptions | None = None, params=None) -> FimResult:
    """MLE followed by the CRLB at the estimate.

    An MLE that hits the evaluation cap is kept (``converged=False``) and the
    bound is evaluated at the best point found.
    """
    options = options or MLEOptions()
    forward = ForwardModel(dataset, params)
    try:
        res = mle(dataset, theta_init, options, forward)
        theta, rss, nfev, ok = res.theta, res.rss, res.evaluations, True
    except MLEConvergenceError as err:
        theta, nfev, ok = err.best, err.evaluations, False
        r = dataset.v_noisy - forward(theta)
        rss = float(r @ r)
    extra = {}
    try:
        fim, cov, sig = crlb_at(dataset, theta, theta.sigma2, forward, step=options.fd_step)
    except NonIdentifiableError as err:
        # keep the estimate; the bound is reported as unbounded
        J = jacobian_fd(forward, theta.as_array()[:4], options.fd_step)
        fim = fisher_information(J, theta.sigma2, n=dataset.n)
        cov = np.full(fim.shape, np.nan)
        sig = np.full(fim.shape[0], np.inf)
        extra = {"non_identifiable": str(err),
                 "null_direction": [float(v) for v in err.null_direction]}
    return FimResult(theta_mle=theta, fim=fim, covariance=cov, sigma_crlb=sig, rss=rss,
                     evaluations=nfev, converged=ok, dataset=dataset.label, extra=extra)


def proposal_factor(result: FimResult, scale: float = 2.38) -> np.ndarray | None:
    """Cholesky factor of ``scale^2 / d`` times the CRLB covariance in sampling coordinates.

    The noise coordinate is mapped from sigma^2 to ln sigma^2.  Returns None
    when the bound is unavailable.
    """
    cov = result.covariance
    if not np.all(np.isfinite(cov)):
        return None
    d = cov.shape[0]
    T = np.ones(d)
    T[-1] = 1.0 / result.theta_mle.sigma2
    C = cov * np.outer(T, T) * scale ** 2 / d
    try:
        return np.linalg.cholesky(0.5 * (C + C.T))
    except np.linalg.LinAlgError:
        return None


def random_initial_guess(theta_true: ThetaVector, rng: np.random.Generator,
                         spread: float = 0.1) -> ThetaVector:
    """Each physical coordinate scaled by an independent U(1 - spread, 1 + spread)."""
    v = np.array(theta_true.scaled)
    v[:4] *= rng.uniform(1.0 - spread, 1.0 + spread, 4)
    return ThetaVector(tuple(v))


def save_fim_result(result: FimResult, path) -> Path:
    return atomic_write_text(path, json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")


def load_fim_result(path) -> FimResult:
    d = json.loads(Path(path).read_text())
    return FimResult(theta_mle=ThetaVector(tuple(d["theta_mle_scaled"])), fim=np.array(d["fim"]),
                     covariance=np.array(d["covariance"]),
                     sigma_crlb=np.array([d["sigma_crlb"][k] for k in REPORT_NAMES]),
                     rss=float(d["rss"]), evaluations=int(d["evaluations"]),
                     converged=bool(d["converged"]), dataset=d.get("dataset", ""),
                     extra=d.get("extra", {}))
