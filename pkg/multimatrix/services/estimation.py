"""
Maximum likelihood for (a0, a) in the beta-II law of a dependent sample of
SPD matrices F1..Fk, with a common shape a for every block.

Per replicate the log-likelihood is

    ln G((a0 + k a) m) - ln G(a0 m) - k ln G_m(a)
      + (a - (m+1)/2) sum ln|Fi| - (a0 + k a) m ln(1 + sum tr Fi)

and only sum tr Fi and sum ln|Fi| depend on the data, so they are computed
once. Optimisation runs Nelder-Mead on theta = (ln a0, ln(a - (m-1)/2)).
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.special import gammaln

from multimatrix.errors import DomainError
from multimatrix.matcore import as_spd, log_det
from multimatrix.models import FitConfig, FitReport
from multimatrix.special import log_multigamma

logger = logging.getLogger(__name__)

HESSIAN_STEP = 1e-4
GRADIENT_STEP = 1e-5

# Restart i > 0 starts from the configured point shifted by RESTART_OFFSETS[i-1] in theta.
RESTART_OFFSETS = (
    (0.5, -0.5),
    (-0.5, 0.5),
    (1.0, 1.0),
    (-1.0, -1.0),
    (1.5, -1.0),
    (-1.0, 1.5),
)


class Beta2Likelihood:
    """Negative log-likelihood bound to a data set of F-block replicates"""

    def __init__(self, data: Sequence[Sequence], m: int):
        if not data:
            raise DomainError("at least one replicate is needed")
        self.m = int(m)
        ks = set()
        traces, log_dets = [], []
        for index, replicate in enumerate(data):
            try:
                grams = [as_spd(f) for f in replicate]
            except DomainError as exc:
                raise type(exc)(f"replicate {index}: {exc}") from exc
            if not grams:
                raise DomainError(f"replicate {index} has no matrices")
            for g in grams:
                if g.order != self.m:
                    raise DomainError(f"replicate {index} holds a matrix of order {g.order}, expected {self.m}")
            ks.add(len(grams))
            traces.append(math.fsum(float(np.trace(g.entries)) for g in grams))
            log_dets.append(math.fsum(log_det(g) for g in grams))
        if len(ks) != 1:
            raise DomainError(f"replicates must all hold the same number of matrices, got {sorted(ks)}")
        self.k = ks.pop()
        self.replicates = len(traces)
        self._log1p_trace = math.fsum(math.log1p(t) for t in traces)
        self._log_det = math.fsum(log_dets)

    @property
    def floor(self) -> float:
        return 0.5 * (self.m - 1)

    def __call__(self, a0: float, a: float) -> float:
        if not a0 > 0:
            raise DomainError(f"a0 must be positive, got {a0}")
        if not a > self.floor:
            raise DomainError(f"a must exceed (m-1)/2 = {self.floor}, got {a}")
        m, k = self.m, self.k
        total = (a0 + k * a) * m
        per_replicate = float(gammaln(total) - gammaln(a0 * m)) - k * log_multigamma(m, a)
        loglik = self.replicates * per_replicate
        loglik += (a - 0.5 * (m + 1)) * self._log_det - total * self._log1p_trace
        return -loglik

    def to_theta(self, a0: float, a: float) -> np.ndarray:
        return np.array([math.log(a0), math.log(a - self.floor)])

    def from_theta(self, theta) -> tuple[float, float]:
        return math.exp(theta[0]), self.floor + math.exp(theta[1])

    def objective(self, theta) -> float:
        """NLL in the unconstrained space; np.inf where it cannot be evaluated"""
        try:
            value = self(*self.from_theta(theta))
        except (DomainError, OverflowError):
            return np.inf
        return value if math.isfinite(value) else np.inf


def nll_beta2(data: Sequence[Sequence], m: int, a0: float, a: float) -> float:
    return Beta2Likelihood(data, m)(a0, a)


def _standard_errors(hessian: np.ndarray) -> Optional[tuple[float, float]]:
    if not np.all(np.isfinite(hessian)):
        return None
    try:
        chol = linalg.cholesky(hessian, lower=True)
    except linalg.LinAlgError:
        return None
    cov = linalg.cho_solve((chol, True), np.eye(hessian.shape[0]))
    return tuple(float(math.sqrt(x)) for x in np.diag(cov))


def _hessian(func, x: np.ndarray, steps: np.ndarray) -> np.ndarray:
    n = len(x)
    hess = np.zeros((n, n))
    f0 = func(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        hess[i, i] = (func(x + ei) - 2.0 * f0 + func(x - ei)) / steps[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = steps[j]
            value = (
                func(x + ei + ej) - func(x + ei - ej) - func(x - ei + ej) + func(x - ei - ej)
            ) / (4.0 * steps[i] * steps[j])
            hess[i, j] = hess[j, i] = value
    return hess


def numerical_hessian_se(
    data: Sequence[Sequence], m: int, at: tuple[float, float], likelihood: Optional[Beta2Likelihood] = None
) -> Optional[tuple[float, float]]:
    """Standard errors of (a0, a) from the inverse central-difference Hessian.

    None when the Hessian is not positive definite.
    """
    lik = likelihood or Beta2Likelihood(data, m)
    point = np.array(at, dtype=float)
    lik(*point)
    steps = HESSIAN_STEP * np.maximum(np.abs(point), 1e-8)
    hess = _hessian(lambda x: lik(x[0], x[1]), point, steps)
    return _standard_errors(hess)


def gradient_norm(
    likelihood: Beta2Likelihood, a0: float, a: float, step: float = GRADIENT_STEP
) -> Optional[float]:
    """Euclidean norm of the central-difference gradient in theta space, None if not finite"""
    theta = likelihood.to_theta(a0, a)
    grad = np.zeros(2)
    for i in range(2):
        e = np.zeros(2)
        e[i] = step
        grad[i] = (likelihood.objective(theta + e) - likelihood.objective(theta - e)) / (2.0 * step)
    norm = float(np.linalg.norm(grad))
    return norm if math.isfinite(norm) else None


def _minimize(lik: Beta2Likelihood, start: np.ndarray, config: FitConfig):
    trace = []

    def record(intermediate_result):
        trace.append((len(trace) + 1, float(intermediate_result.fun)))

    result = optimize.minimize(
        lik.objective,
        start,
        method="Nelder-Mead",
        callback=record,
        options={
            "maxiter": config.max_iterations,
            "xatol": config.tolerance,
            "fatol": config.tolerance,
        },
    )
    return result, tuple(trace)


def fit_beta2(data: Sequence[Sequence], m: int, config: Optional[FitConfig] = None) -> FitReport:
    """Fit (a0, a) by restarted Nelder-Mead and return the best run"""
    config = config or FitConfig()
    config.check(m)
    lik = Beta2Likelihood(data, m)
    origin = lik.to_theta(*config.start(m))

    best = None
    for index in range(config.restarts + 1):
        offset = RESTART_OFFSETS[(index - 1) % len(RESTART_OFFSETS)] if index else (0.0, 0.0)
        result, trace = _minimize(lik, origin + np.array(offset), config)
        logger.info(
            f"Start {index}: nll={result.fun:.10g} after {result.nit} iterations "
            f"(success={result.success})"
        )
        if best is None or result.fun < best[0].fun:
            best = (result, trace, index)

    result, trace, index = best
    if not math.isfinite(result.fun):
        raise DomainError("the likelihood could not be evaluated at any start point")
    a0_hat, a_hat = lik.from_theta(result.x)
    if not result.success:
        logger.warning(f"Nelder-Mead did not converge: {result.message}")

    report = FitReport(
        a0_hat=a0_hat,
        a_hat=a_hat,
        log_likelihood=-float(result.fun),
        converged=bool(result.success),
        iterations=int(result.nit),
        optimizer_trace=trace,
        standard_errors=_safe_se(lik, a0_hat, a_hat),
        gradient_norm=gradient_norm(lik, a0_hat, a_hat),
        restart_index=index,
    )
    logger.info(f"Fitted a0={a0_hat:.6g}, a={a_hat:.6g} from {lik.replicates} replicates (k={lik.k})")
    return report


def _safe_se(lik: Beta2Likelihood, a0: float, a: float) -> Optional[tuple[float, float]]:
    try:
        return numerical_hessian_se([], lik.m, (a0, a), likelihood=lik)
    except DomainError as exc:
        logger.warning(f"Standard errors unavailable at the estimate: {exc}")
        return None
