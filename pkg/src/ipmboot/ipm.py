"""Two-factor inverse polynomial models.

The reciprocal of the mean response is linear in the parameters::

    1 / f(x, theta) = phi(x, theta) = sum_k theta_k g_k(x1, x2)

with basis terms drawn from ``1, 1/x1, 1/x2, x1/x2, x2/x1, 1/(x1 x2)``.
Every quantity the solver needs follows from the fixed basis matrix
``G[i, k] = g_k(x_i)``: ``f = 1 / (G theta)`` and ``df/dtheta_k = -g_k / phi^2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidArgumentError,
    NearSingularMeanError,
    NoFeasibleStartError,
    SingularStartError,
)

PHI_MIN = 1e-10
START_CONDITION = 1e12

# basis term per parameter name, as functions of (x1, x2)
_TERMS = {
    "beta11": lambda x1, x2: np.ones_like(x1),
    "beta01": lambda x1, x2: 1.0 / x1,
    "beta10": lambda x1, x2: 1.0 / x2,
    "beta20": lambda x1, x2: x1 / x2,
    "beta02": lambda x1, x2: x2 / x1,
    "beta00": lambda x1, x2: 1.0 / (x1 * x2),
}

VARIANTS = {
    "first_order_2f": ("beta11", "beta01", "beta10", "beta00"),
    "second_order_2f_full": ("beta11", "beta01", "beta10", "beta20", "beta02", "beta00"),
    "second_order_2f_reduced": ("beta11", "beta01", "beta10", "beta20", "beta00"),
}

CONFIG_NAMES = {
    "ipm2-first": "first_order_2f",
    "ipm2-second": "second_order_2f_full",
    "ipm2-second-reduced": "second_order_2f_reduced",
}


@dataclass(frozen=True)
class Dataset:
    """Responses `y` on fixed positive regressors `x1`, `x2`."""

    y: np.ndarray
    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        arrs = []
        for name in ("y", "x1", "x2"):
            a = np.array(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(a)):
                raise InvalidArgumentError(f"{name} contains non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
            arrs.append(a)
        if len({a.size for a in arrs}) != 1 or arrs[0].size == 0:
            raise InvalidArgumentError("y, x1 and x2 must be nonempty and equally long")
        for name in ("x1", "x2"):
            bad = np.flatnonzero(getattr(self, name) <= 0)
            if bad.size:
                raise InvalidArgumentError(
                    f"{name} must be > 0; row {int(bad[0]) + 1} has {getattr(self, name)[bad[0]]}"
                )

    @property
    def n(self) -> int:
        return self.y.size

    def with_response(self, y) -> "Dataset":
        return Dataset(y, self.x1, self.x2)


@dataclass(frozen=True)
class ModelSpec:
    """One inverse-polynomial variant and its parameter layout."""

    variant: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidArgumentError(
                f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}"
            )

    @classmethod
    def from_name(cls, name: str) -> "ModelSpec":
        """Accept either a config name (``ipm2-second``) or a variant name."""
        return cls(CONFIG_NAMES.get(name, name))

    @property
    def param_names(self) -> tuple:
        return VARIANTS[self.variant]

    @property
    def p(self) -> int:
        return len(self.param_names)

    @property
    def config_name(self) -> str:
        return {v: k for k, v in CONFIG_NAMES.items()}[self.variant]

    def reciprocal_basis(self, x1, x2) -> np.ndarray:
        """Basis matrix ``G`` with one column per parameter."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if np.any(x1 <= 0) or np.any(x2 <= 0):
            raise InvalidArgumentError("inverse polynomial regressors must be > 0")
        return np.stack([_TERMS[n](x1, x2) for n in self.param_names], axis=-1)

    def data_basis(self, data: Dataset) -> np.ndarray:
        return self.reciprocal_basis(data.x1, data.x2)

    # generic model interface used by the solver
    def predict(self, theta, data: Dataset) -> np.ndarray:
        return _mean_from_phi(self.data_basis(data) @ _theta(self, theta))

    def jacobian(self, theta, data: Dataset) -> np.ndarray:
        G = self.data_basis(data)
        phi = G @ _theta(self, theta)
        _check_phi(phi)
        return -G / (phi**2)[:, None]


def _theta(spec: ModelSpec, theta) -> np.ndarray:
    t = np.asarray(theta, dtype=float)
    if t.shape != (spec.p,):
        raise InvalidArgumentError(f"{spec.variant} expects {spec.p} parameters, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise InvalidArgumentError("parameters must be finite")
    return t


def _check_phi(phi: np.ndarray) -> None:
    bad = np.flatnonzero(~(np.abs(phi) > PHI_MIN))
    if bad.size:
        i = int(bad[0])
        raise NearSingularMeanError(i, np.ravel(phi)[i])


def _mean_from_phi(phi: np.ndarray) -> np.ndarray:
    _check_phi(np.ravel(phi))
    return 1.0 / phi


def phi(spec: ModelSpec, theta, x1, x2):
    """Linear predictor (reciprocal of the mean) at scalar or array points."""
    out = spec.reciprocal_basis(x1, x2) @ _theta(spec, theta)
    return out if np.ndim(out) else float(out)


def mean(spec: ModelSpec, theta, x1, x2):
    """Mean response ``1 / phi``; raises NearSingularMeanError."""
    out = _mean_from_phi(np.asarray(phi(spec, theta, x1, x2)))
    return out if np.ndim(out) else float(out)


def jacobian_row(spec: ModelSpec, theta, x1, x2) -> np.ndarray:
    """Derivatives of the mean with respect to each parameter.

    Each entry is ``-g_k / phi^2``; the intercept entry is ``-1/phi^2``.
    """
    G = spec.reciprocal_basis(x1, x2)
    ph = np.asarray(G @ _theta(spec, theta))
    _check_phi(np.ravel(ph))
    return -G / np.expand_dims(ph**2, -1)


def linearized_start(spec: ModelSpec, data: Dataset) -> np.ndarray:
    """Ordinary least squares on the linearized form ``x1 x2 / y = (x1 x2) phi``.

    Multiplying through by ``x1 x2`` turns every basis term into a monomial,
    so the regression is exact for noiseless data.
    """
    if data.n < spec.p:
        raise SingularStartError(f"need at least {spec.p} observations, got {data.n}")
    zero = np.flatnonzero(data.y == 0)
    if zero.size:
        raise SingularStartError(f"response is zero at row {int(zero[0]) + 1}")
    w = data.x1 * data.x2
    A = spec.data_basis(data) * w[:, None]
    z = w / data.y
    coef, _, rank, sv = np.linalg.lstsq(A, z, rcond=None)
    if rank < spec.p or sv[-1] == 0 or (sv[0] / sv[-1]) ** 2 > START_CONDITION:
        raise SingularStartError("linearized regressors are rank deficient")
    return coef


def grid_sse(spec, data: Dataset, thetas: np.ndarray) -> np.ndarray:
    """SSE at each row of `thetas`; rows hitting a near-singular mean give inf."""
    phi_all = spec.data_basis(data) @ thetas.T
    ok = np.all(np.abs(phi_all) > PHI_MIN, axis=0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = data.y[:, None] - 1.0 / phi_all
        s = np.sum(r * r, axis=0)
    s[~ok | ~np.isfinite(s)] = np.inf
    return s


def grid_start(spec, data: Dataset, bounds, steps: int) -> np.ndarray:
    """Grid point of minimum SSE over the Cartesian product of `bounds`.

    Points are enumerated lexicographically, so ties resolve to the
    lexicographically smallest parameter vector.
    """
    bounds = [tuple(map(float, b)) for b in bounds]
    if len(bounds) != spec.p:
        raise InvalidArgumentError(f"need {spec.p} parameter bounds, got {len(bounds)}")
    if steps < 2:
        raise InvalidArgumentError(f"steps must be >= 2, got {steps}")
    for lo, hi in bounds:
        if not lo < hi:
            raise InvalidArgumentError(f"grid bounds must satisfy lo < hi, got ({lo}, {hi})")
    axes = [np.linspace(lo, hi, steps) for lo, hi in bounds]
    best, best_theta = np.inf, None
    # chunked so memory stays bounded for large grids
    it = itertools.product(*axes)
    while True:
        chunk = np.array(list(itertools.islice(it, 65536)))
        if chunk.size == 0:
            break
        s = grid_sse(spec, data, chunk)
        j = int(np.argmin(s))
        if s[j] < best:
            best, best_theta = s[j], chunk[j]
    if best_theta is None:
        raise NoFeasibleStartError("every grid point gives a near-singular mean")
    return best_theta.copy()
