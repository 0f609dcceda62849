"""Residual bootstrap for fitted nonlinear regressions on fixed regressors.

Replicate ``b`` draws ``n`` residuals with replacement from its own
counter-based stream, adds them to the fitted values and refits by
Gauss-Newton from the original estimate.  The regressors stay fixed, as
they come from a designed experiment.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import ExcessDropError, InvalidArgumentError
from .gauss_newton import (
    _STATUS,
    FitResult,
    SolverConfig,
    _generic_callbacks,
    _reciprocal_callbacks,
    gn_loop,
)
from .ipm import PHI_MIN, Dataset, ModelSpec
from .rng import ReplicateStream
from .stats import interpolated_quantile, norm_ppf

BOOTSTRAP_MEAN = "bootstrap_mean"
ORIGINAL_ESTIMATE = "original_estimate"

RESIDUAL_MODES = ("raw", "centered", "rescaled", "leverage")


@dataclass(frozen=True)
class BootstrapConfig:
    """Replicate count, seed and interval settings.

    `residuals` selects how the fitted residuals are prepared before
    resampling: ``raw`` uses them as is, ``centered`` subtracts their mean,
    ``rescaled`` also multiplies by ``sqrt(n / (n - p))`` so the resampled
    variance matches the unbiased residual variance, and ``leverage``
    divides each residual by ``sqrt(1 - h_ii)`` from the Jacobian hat matrix
    before centering.
    """

    B: int = 1000
    seed: int = 0
    alpha_level: float = 0.05
    center: str = BOOTSTRAP_MEAN
    max_drop_frac: float = 0.05
    residuals: str = "rescaled"

    def __post_init__(self):
        if isinstance(self.B, bool) or int(self.B) != self.B or self.B < 1:
            raise InvalidArgumentError(f"B must be an integer >= 1, got {self.B!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not 0.0 < self.alpha_level < 1.0:
            raise InvalidArgumentError(f"alpha_level must lie in (0, 1), got {self.alpha_level!r}")
        if self.center not in (BOOTSTRAP_MEAN, ORIGINAL_ESTIMATE):
            raise InvalidArgumentError(f"center must be {BOOTSTRAP_MEAN!r} or {ORIGINAL_ESTIMATE!r}")
        if not 0.0 <= self.max_drop_frac <= 1.0:
            raise InvalidArgumentError(f"max_drop_frac must lie in [0, 1], got {self.max_drop_frac!r}")
        if self.residuals not in RESIDUAL_MODES:
            raise InvalidArgumentError(f"residuals must be one of {RESIDUAL_MODES}")


@dataclass(frozen=True)
class BootstrapResult:
    param_names: tuple
    theta_hat: np.ndarray
    theta_star: np.ndarray
    dropped: int
    se: np.ndarray
    ci_normal: np.ndarray
    ci_percentile: np.ndarray
    seed: int
    B: int
    alpha_level: float
    replicate_index: np.ndarray
    first_failure: str | None = None

    @property
    def bootstrap_mean(self) -> np.ndarray:
        return self.theta_star.mean(axis=0)

    def to_dict(self) -> dict:
        names = self.param_names
        return {
            "B": int(self.B),
            "dropped": int(self.dropped),
            "seed": int(self.seed),
            "alpha_level": float(self.alpha_level),
            "estimate": {k: float(v) for k, v in zip(names, self.theta_hat)},
            "bootstrap_mean": {k: float(v) for k, v in zip(names, self.bootstrap_mean)},
            "se": {k: float(v) for k, v in zip(names, self.se)},
            "ci_normal": {k: [float(lo), float(hi)] for k, (lo, hi) in zip(names, self.ci_normal)},
            "ci_percentile": {k: [float(lo), float(hi)] for k, (lo, hi) in zip(names, self.ci_percentile)},
        }


def resample_residuals(residuals, stream: ReplicateStream) -> np.ndarray:
    """`n` draws with replacement from `residuals` using `stream`."""
    r = np.asarray(residuals, dtype=float)
    if r.ndim != 1 or r.size < 1:
        raise InvalidArgumentError("residuals must be a nonempty vector")
    return r[stream.integers(r.size, r.size)]


def make_replicate(result: FitResult, e_star) -> np.ndarray:
    """Bootstrap response: fitted values plus resampled residuals."""
    e_star = np.asarray(e_star, dtype=float)
    if e_star.shape != result.fitted.shape:
        raise InvalidArgumentError("resampled residuals must match the fitted values in length")
    return result.fitted + e_star


def leverages(jacobian: np.ndarray) -> np.ndarray:
    """Diagonal of the hat matrix ``J (J'J)^-1 J'``."""
    q, _ = np.linalg.qr(jacobian)
    return np.sum(q * q, axis=1)


def prepared_residuals(residuals: np.ndarray, p: int, mode: str, jacobian=None) -> np.ndarray:
    r = np.asarray(residuals, dtype=float)
    if mode == "raw":
        return r.copy()
    if mode == "leverage":
        h = np.minimum(leverages(jacobian), 1.0 - 1e-12)
        r = r / np.sqrt(1.0 - h)
        return r - r.mean()
    r = r - r.mean()
    if mode == "rescaled":
        n = r.size
        if n > p:
            r = r * math.sqrt(n / (n - p))
    return r


def replicate_responses(result: FitResult, bcfg: BootstrapConfig) -> np.ndarray:
    """The B x n matrix of bootstrap responses, row b from stream (seed, b)."""
    pool = prepared_residuals(result.residuals, len(result.param_names), bcfg.residuals, result.jacobian)
    Y = np.empty((bcfg.B, pool.size))
    for b in range(bcfg.B):
        Y[b] = make_replicate(result, resample_residuals(pool, ReplicateStream(bcfg.seed, b)))
    return Y


def standard_error(theta_star, center: str = BOOTSTRAP_MEAN, theta_hat=None) -> np.ndarray:
    """Root mean squared deviation of the replicates (divisor B', not B'-1)."""
    ts = np.atleast_2d(np.asarray(theta_star, dtype=float))
    if ts.shape[0] < 1:
        raise InvalidArgumentError("need at least one replicate")
    if center == BOOTSTRAP_MEAN:
        # shifted mean: exact for identical rows
        c = ts[0] + (ts - ts[0]).mean(axis=0)
    elif center == ORIGINAL_ESTIMATE:
        if theta_hat is None:
            raise InvalidArgumentError("original_estimate centering needs theta_hat")
        c = np.asarray(theta_hat, dtype=float)
    else:
        raise InvalidArgumentError(f"unknown center rule {center!r}")
    return np.sqrt(np.mean((ts - c) ** 2, axis=0))


def ci_normal(theta_hat, se, alpha_level: float = 0.05) -> np.ndarray:
    """``theta_hat -/+ z_{1-alpha/2} se`` per parameter, shape (p, 2)."""
    if not 0.0 < alpha_level < 1.0:
        raise InvalidArgumentError(f"alpha_level must lie in (0, 1), got {alpha_level!r}")
    se = np.atleast_1d(np.asarray(se, dtype=float))
    if np.any(se < 0):
        raise InvalidArgumentError("standard errors must be >= 0")
    th = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    z = norm_ppf(1.0 - alpha_level / 2.0)
    return np.column_stack([th - z * se, th + z * se])


def ci_percentile(theta_star, alpha_level: float = 0.05) -> np.ndarray:
    """Empirical alpha/2 and 1-alpha/2 quantiles of each replicate column."""
    if not 0.0 < alpha_level < 1.0:
        raise InvalidArgumentError(f"alpha_level must lie in (0, 1), got {alpha_level!r}")
    ts = np.asarray(theta_star, dtype=float)
    if ts.ndim == 1:
        ts = ts[:, None]
    lo_q, hi_q = alpha_level / 2.0, 1.0 - alpha_level / 2.0
    return np.array(
        [[interpolated_quantile(col, lo_q), interpolated_quantile(col, hi_q)] for col in ts.T]
    )


def refit_replicates(model, data: Dataset, theta0, Y: np.ndarray, scfg: SolverConfig,
                     backend: str = "auto", threads: int | None = None):
    """Refit each row of `Y`; returns ``(theta_star, status_codes)`` in row order."""
    threads = _backend.default_threads() if threads is None else max(1, int(threads))
    theta0 = np.ascontiguousarray(theta0, dtype=float)
    reciprocal = isinstance(model, ModelSpec)
    if reciprocal and _backend.resolve(backend):
        G = np.ascontiguousarray(model.data_basis(data))
        ts, status, _ = _backend._kernels.refit_batch(
            G, np.ascontiguousarray(Y), theta0, scfg.delta, scfg.sse_rel_tol,
            int(scfg.max_iter), int(scfg.max_halvings), PHI_MIN, threads,
        )
        return np.asarray(ts), np.asarray(status, dtype=int)

    if reciprocal:
        G = model.data_basis(data)
        evaluate, jac = _reciprocal_callbacks(G)
        callbacks = lambda y: (evaluate, jac)  # noqa: E731
    else:
        callbacks = lambda y: _generic_callbacks(model, data.with_response(y))  # noqa: E731

    def one(b):
        evaluate, jac = callbacks(Y[b])
        theta, _, _, status = gn_loop(evaluate, jac, Y[b], theta0, scfg)
        return theta, status

    if threads == 1:
        rows = [one(b) for b in range(Y.shape[0])]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(Y.shape[0])))
    return np.array([r[0] for r in rows]), np.array([r[1] for r in rows], dtype=int)


def run(model, data: Dataset, result: FitResult, scfg: SolverConfig | None = None,
        bcfg: BootstrapConfig | None = None, backend: str = "auto",
        threads: int | None = None) -> BootstrapResult:
    """Residual bootstrap of `result`.

    Non-convergent replicates are dropped and counted; ExcessDropError is
    raised when their fraction exceeds ``bcfg.max_drop_frac``.
    """
    scfg = scfg or SolverConfig()
    bcfg = bcfg or BootstrapConfig()
    if not result.converged:
        raise InvalidArgumentError("bootstrap requires a converged fit")
    if result.fitted.shape != data.y.shape:
        raise InvalidArgumentError("fit does not belong to this dataset")
    Y = replicate_responses(result, bcfg)
    theta_star, status = refit_replicates(model, data, result.theta_hat, Y, scfg, backend, threads)
    ok = (status == _backend.PARAM) | (status == _backend.SSE)
    ok &= np.all(np.isfinite(theta_star), axis=1)
    dropped = int(np.sum(~ok))
    first_failure = None
    if dropped:
        b = int(np.flatnonzero(~ok)[0])
        first_failure = f"replicate {b}: {_STATUS.get(int(status[b]), 'non-finite estimate')}"
    if dropped / bcfg.B > bcfg.max_drop_frac or dropped == bcfg.B:
        raise ExcessDropError(dropped, bcfg.B, first_failure)
    kept = theta_star[ok]
    se = standard_error(kept, bcfg.center, result.theta_hat)
    if kept.shape[0] >= 2:
        pct = ci_percentile(kept, bcfg.alpha_level)
    else:
        pct = np.column_stack([kept[0], kept[0]])
    return BootstrapResult(
        param_names=tuple(result.param_names),
        theta_hat=np.array(result.theta_hat),
        theta_star=kept,
        dropped=dropped,
        se=se,
        ci_normal=ci_normal(result.theta_hat, se, bcfg.alpha_level),
        ci_percentile=pct,
        seed=int(bcfg.seed),
        B=int(bcfg.B),
        alpha_level=float(bcfg.alpha_level),
        replicate_index=np.flatnonzero(ok),
        first_failure=first_failure,
    )
