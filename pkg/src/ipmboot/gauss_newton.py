"""Damped Gauss-Newton minimization of the residual sum of squares.

Each iteration linearizes the mean function around the current parameters
and solves the resulting linear least-squares problem for the step.  A step
that raises the SSE (or drives the mean through a singularity) is halved
until it does not, so accepted SSE values never increase.

Any object with ``param_names``, ``predict(theta, data)`` and
``jacobian(theta, data)`` can be fitted.  Models that also expose
``data_basis(data)`` with a reciprocal-linear mean are routed to the compiled
kernel when it is available.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
import scipy.linalg

from . import _backend
from .errors import InvalidArgumentError, NearSingularMeanError, SingularJacobianError
from .ipm import PHI_MIN, Dataset, ModelSpec, grid_sse, linearized_start

JACOBIAN_CONDITION = 1e12
THETA_FLOOR = 1e-8

_STATUS = {
    _backend.PARAM: "converged",
    _backend.SSE: "converged",
    _backend.MAX_ITER: "max_iter",
    _backend.SINGULAR: "singular_jacobian",
    _backend.DAMPING: "damping_exhausted",
    _backend.BAD_START: "bad_start",
}
_CRITERION = {_backend.PARAM: "param", _backend.SSE: "sse"}


class Model(Protocol):
    param_names: tuple

    def predict(self, theta, data) -> np.ndarray: ...

    def jacobian(self, theta, data) -> np.ndarray: ...


@dataclass(frozen=True)
class SolverConfig:
    """Stopping and damping controls.

    `delta` bounds the largest relative parameter change, `sse_rel_tol` the
    relative SSE decrease of an accepted step.
    """

    delta: float = 1e-8
    sse_rel_tol: float = 1e-12
    max_iter: int = 100
    max_halvings: int = 30
    restart_on_stall: bool = False

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidArgumentError(f"delta must be > 0, got {self.delta}")
        if not self.sse_rel_tol >= 0:
            raise InvalidArgumentError(f"sse_rel_tol must be >= 0, got {self.sse_rel_tol}")
        if isinstance(self.max_iter, bool) or int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidArgumentError(f"max_iter must be an integer >= 1, got {self.max_iter}")
        if int(self.max_halvings) != self.max_halvings or self.max_halvings < 0:
            raise InvalidArgumentError(f"max_halvings must be an integer >= 0, got {self.max_halvings}")


@dataclass(frozen=True)
class GNStep:
    beta_hat: np.ndarray
    predicted_sse: float
    condition: float


@dataclass(frozen=True)
class FitResult:
    """Outcome of :func:`fit`.

    `sse_trace` starts with the SSE at the start vector and gains one entry
    per accepted step.  `iterations` counts Gauss-Newton steps computed,
    including a final step rejected as negligible.
    """

    param_names: tuple
    theta_hat: np.ndarray
    sse: float
    sse_trace: tuple
    iterations: int
    converged: bool
    criterion: str | None
    status: str
    jacobian: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)
    restarted: bool = False

    @property
    def accepted_steps(self) -> int:
        return len(self.sse_trace) - 1

    @property
    def theta(self) -> dict:
        return dict(zip(self.param_names, map(float, self.theta_hat)))

    def to_dict(self) -> dict:
        return {
            "model_params": list(self.param_names),
            "theta": self.theta,
            "sse": float(self.sse),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "criterion": self.criterion,
            "status": self.status,
            "sse_trace": [float(s) for s in self.sse_trace],
        }


def sse(model: Model, theta, data: Dataset) -> float:
    """S(theta) = sum of squared residuals."""
    r = data.y - model.predict(theta, data)
    return float(np.dot(r, r))


def _solve_step(J: np.ndarray, r: np.ndarray):
    """Step, cond(J'J) and the residual SSE of the linearized problem."""
    coef, resid, _, sv = scipy.linalg.lstsq(J, r, lapack_driver="gelss", check_finite=False)
    smin = sv[-1] if sv.size == J.shape[1] else 0.0
    cond = np.inf if smin <= 0 else (sv[0] / smin) ** 2
    predicted = float(resid) if np.size(resid) == 1 else 0.0
    return coef, cond, predicted


def gn_step(model: Model, theta, data: Dataset) -> GNStep:
    """Least-squares solution of ``Psi beta = y - f`` at `theta`."""
    theta = np.asarray(theta, dtype=float)
    r = data.y - model.predict(theta, data)
    J = model.jacobian(theta, data)
    beta, cond, _ = _solve_step(J, r)
    if not cond <= JACOBIAN_CONDITION:
        raise SingularJacobianError(cond)
    lin = r - J @ beta
    return GNStep(beta, float(np.dot(lin, lin)), float(cond))


def _rel_change(step: np.ndarray, theta: np.ndarray) -> float:
    return float(np.max(np.abs(step) / np.maximum(np.abs(theta), THETA_FLOOR)))


def gn_loop(
    evaluate: Callable[[np.ndarray], np.ndarray | None],
    jacobian: Callable[[np.ndarray], np.ndarray],
    y: np.ndarray,
    theta0: np.ndarray,
    cfg: SolverConfig,
):
    """Reference damped Gauss-Newton loop.

    `evaluate` returns the mean vector or None where it is undefined.
    Returns ``(theta, trace, iterations, status_code)``.
    """
    theta = np.array(theta0, dtype=float)
    f = evaluate(theta)
    if f is None:
        return theta, [], 0, _backend.BAD_START
    r = y - f
    S = float(np.dot(r, r))
    trace = [S]
    it = 0
    status = _backend.MAX_ITER
    while it < cfg.max_iter:
        it += 1
        step, cond, predicted = _solve_step(jacobian(theta), r)
        if not cond <= JACOBIAN_CONDITION:
            status = _backend.SINGULAR
            break
        if _rel_change(step, theta) < cfg.delta:
            status = _backend.PARAM
            break
        lam = 1.0
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            cand = theta + lam * step
            fc = evaluate(cand)
            if fc is not None:
                rc = y - fc
                Sc = float(np.dot(rc, rc))
                if Sc <= S:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            # no representable improvement left: converged on SSE
            status = _backend.SSE if S - predicted <= cfg.sse_rel_tol * S else _backend.DAMPING
            break
        moved = cand - theta
        S_old = S
        theta, r, S = cand, rc, Sc
        trace.append(S)
        if _rel_change(moved, theta) < cfg.delta:
            status = _backend.PARAM
            break
        if S_old - S <= cfg.sse_rel_tol * S_old:
            status = _backend.SSE
            break
    return theta, trace, it, status


def _reciprocal_callbacks(G: np.ndarray):
    def evaluate(theta):
        phi = G @ theta
        if not np.all(np.abs(phi) > PHI_MIN):
            return None
        return 1.0 / phi

    def jacobian(theta):
        phi = G @ theta
        return -G / (phi * phi)[:, None]

    return evaluate, jacobian


def _generic_callbacks(model: Model, data: Dataset):
    def evaluate(theta):
        try:
            return model.predict(theta, data)
        except NearSingularMeanError:
            return None

    return evaluate, lambda theta: model.jacobian(theta, data)


def _run_loop(model, data, theta0, cfg, use_kernel):
    if hasattr(model, "data_basis"):
        G = np.ascontiguousarray(model.data_basis(data))
        if use_kernel:
            theta, trace, it, status = _backend._kernels.fit_reciprocal(
                G, np.ascontiguousarray(data.y), np.ascontiguousarray(theta0, dtype=float),
                cfg.delta, cfg.sse_rel_tol, int(cfg.max_iter), int(cfg.max_halvings), PHI_MIN,
            )
            return np.asarray(theta), list(trace), int(it), int(status)
        evaluate, jac = _reciprocal_callbacks(G)
    else:
        evaluate, jac = _generic_callbacks(model, data)
    return gn_loop(evaluate, jac, data.y, theta0, cfg)


def _stall_restart_bounds(theta: np.ndarray):
    half = np.maximum(np.abs(theta), 0.1)
    return list(zip(theta - half, theta + half))


def fit(
    model: Model,
    data: Dataset,
    start=None,
    cfg: SolverConfig | None = None,
    backend: str = "auto",
) -> FitResult:
    """Minimize the SSE from `start` (default: the linearized start).

    Non-convergence is reported through ``converged=False`` and `status`
    rather than raised.  A start at which the mean is undefined raises
    NearSingularMeanError.
    """
    cfg = cfg or SolverConfig()
    use_kernel = _backend.resolve(backend) and isinstance(model, ModelSpec)
    if start is None:
        start = linearized_start(model, data)
    theta0 = np.array(start, dtype=float)
    if theta0.shape != (len(model.param_names),):
        raise InvalidArgumentError(
            f"start must have {len(model.param_names)} entries, got shape {theta0.shape}"
        )
    theta, trace, it, status = _run_loop(model, data, theta0, cfg, use_kernel)
    if status == _backend.BAD_START:
        model.predict(theta0, data)  # raises with the offending index
        raise NearSingularMeanError(-1, 0.0)  # pragma: no cover
    restarted = False
    if status == _backend.DAMPING and cfg.restart_on_stall and isinstance(model, ModelSpec):
        restarted = True
        grid = _restart_grid(model, data, theta)
        if grid is not None and sse(model, grid, data) < trace[-1]:
            theta2, trace2, it2, status = _run_loop(model, data, grid, cfg, use_kernel)
            theta, trace, it = theta2, trace + trace2, it + it2
    fitted = model.predict(theta, data)
    residuals = data.y - fitted
    return FitResult(
        param_names=tuple(model.param_names),
        theta_hat=theta,
        sse=float(np.dot(residuals, residuals)),
        sse_trace=tuple(float(s) for s in trace),
        iterations=it,
        converged=status in (_backend.PARAM, _backend.SSE),
        criterion=_CRITERION.get(status),
        status=_STATUS[status],
        jacobian=model.jacobian(theta, data),
        residuals=residuals,
        fitted=fitted,
        restarted=restarted,
    )


def _restart_grid(spec: ModelSpec, data: Dataset, theta: np.ndarray):
    bounds = _stall_restart_bounds(theta)
    axes = np.meshgrid(*[np.linspace(lo, hi, 3) for lo, hi in bounds], indexing="ij")
    grid = np.column_stack([a.ravel() for a in axes])
    s = grid_sse(spec, data, grid)
    j = int(np.argmin(s))
    return grid[j] if np.isfinite(s[j]) else None


@dataclass(frozen=True)
class GlobalCheck:
    stable: bool
    refit_agrees: bool
    refit: FitResult
    multistart_best: FitResult
    multistart_sse: tuple
    best_index: int


def multistart_points(model, data: Dataset, theta_hat: np.ndarray) -> list:
    """Linearized start followed by +/-20% perturbations of each parameter."""
    starts = []
    try:
        starts.append(linearized_start(model, data))
    except Exception:
        starts.append(np.array(theta_hat, dtype=float))
    for k in range(len(theta_hat)):
        for sign in (-1.0, 1.0):
            t = np.array(theta_hat, dtype=float)
            t[k] *= 1.0 + sign * 0.2
            starts.append(t)
    return starts


def verify_global(model: Model, data: Dataset, result: FitResult, cfg: SolverConfig | None = None,
                  backend: str = "auto") -> GlobalCheck:
    """Restart from the estimate and from 2p+1 spread-out starts.

    Stable when the restart reproduces the estimate within ``10 * delta``
    relative to the largest parameter magnitude, and no multistart improves the SSE by more than
    `sse_rel_tol` relative, beyond the floor ``sum((delta * fitted)^2)``.
    """
    cfg = cfg or SolverConfig()
    refit = fit(model, data, result.theta_hat, cfg, backend=backend)
    # norm-wise: parameters near zero would make a componentwise test
    # stricter than the SSE stopping rule can deliver
    diff = float(np.max(np.abs(refit.theta_hat - result.theta_hat)))
    scale = max(float(np.max(np.abs(result.theta_hat))), THETA_FLOOR)
    agrees = bool(refit.converged and diff <= 10.0 * cfg.delta * scale)

    fits = []
    for s in multistart_points(model, data, result.theta_hat):
        try:
            fits.append(fit(model, data, s, cfg, backend=backend))
        except NearSingularMeanError:
            fits.append(None)
    sse_vals = tuple(f.sse if f is not None else float("inf") for f in fits)
    best_index = int(np.argmin(sse_vals))
    best = fits[best_index] if fits[best_index] is not None else refit
    # SSE resolution of a fit converged to relative tolerance delta
    floor = float(np.sum((cfg.delta * result.fitted) ** 2))
    improved = result.sse - best.sse > cfg.sse_rel_tol * result.sse + floor
    return GlobalCheck(agrees and not improved, agrees, refit, best, sse_vals, best_index)
