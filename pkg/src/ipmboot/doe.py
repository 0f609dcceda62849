"""Two-level factorial and central composite designs with property audits.

Designs live in coded units: factorial levels are +/-1, the center is the
origin and axial runs sit at distance ``alpha`` on each axis.  The audits
follow the usual response-surface criteria, all expressed through the
scaled prediction variance ``N f(x)' (X'X)^-1 f(x)``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, SingularDesignError

FACTORIAL = "factorial"
AXIAL = "axial"
CENTER = "center"
RUN_TYPES = (FACTORIAL, AXIAL, CENTER)

ROTATABLE = "rotatable"

MAX_FACTORS = 12
SINGULAR_CONDITION = 1e12

ORTHOGONALITY_TOL = 1e-10
ROTATABILITY_TOL = 1e-8
UNIFORM_PRECISION_TOL = 1e-2
DEFAULT_PROBES = 64


@dataclass(frozen=True)
class Design:
    """An ordered list of coded experimental runs.

    Attributes
    ----------
    points : ndarray, shape (N, k)
        Coded levels, one row per run.
    types : tuple of str
        Run-type tag for each row (``factorial``, ``axial`` or ``center``).
    alpha : float
        Axial distance in coded units (1.0 for a bare factorial).
    factor_ranges : tuple of (low, high) pairs or None
        Natural-unit bounds that coded -1/+1 decode to.
    """

    points: np.ndarray
    types: tuple
    alpha: float = 1.0
    factor_ranges: tuple | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise InvalidArgumentError("design points must be a nonempty (N, k) array")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        types = tuple(self.types)
        if len(types) != pts.shape[0]:
            raise InvalidArgumentError("one run-type tag is required per run")
        bad = set(types) - set(RUN_TYPES)
        if bad:
            raise InvalidArgumentError(f"unknown run types: {sorted(bad)}")
        object.__setattr__(self, "types", types)
        if not self.alpha > 0:
            raise InvalidArgumentError(f"alpha must be > 0, got {self.alpha}")
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.factor_ranges is not None:
            object.__setattr__(self, "factor_ranges", _check_ranges(self.factor_ranges, self.k))
        self._check_runs()

    def _check_runs(self):
        for row, kind in zip(self.points, self.types):
            if kind == FACTORIAL and not np.all(np.abs(row) == 1.0):
                raise InvalidArgumentError(f"factorial run {row} has a level other than +/-1")
            if kind == CENTER and np.any(row != 0.0):
                raise InvalidArgumentError(f"center run {row} is not the origin")
            if kind == AXIAL:
                nz = np.flatnonzero(row)
                if nz.size != 1 or not math.isclose(abs(row[nz[0]]), self.alpha, rel_tol=1e-12):
                    raise InvalidArgumentError(f"axial run {row} is not at distance alpha on one axis")

    @property
    def k(self) -> int:
        return self.points.shape[1]

    @property
    def n_runs(self) -> int:
        return self.points.shape[0]

    @property
    def n_f(self) -> int:
        return self.types.count(FACTORIAL)

    @property
    def n_a(self) -> int:
        return self.types.count(AXIAL)

    @property
    def n0(self) -> int:
        return self.types.count(CENTER)

    def with_ranges(self, ranges) -> "Design":
        return Design(self.points, self.types, self.alpha, ranges)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "N": self.n_runs,
            "n_f": self.n_f,
            "n_a": self.n_a,
            "n0": self.n0,
            "alpha": self.alpha,
            "factor_ranges": None if self.factor_ranges is None else [list(r) for r in self.factor_ranges],
            "runs": [
                {"type": kind, "coded": [float(v) for v in row]}
                for row, kind in zip(self.points, self.types)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Design":
        runs = doc["runs"]
        ranges = doc.get("factor_ranges")
        return cls(
            np.array([r["coded"] for r in runs], dtype=float),
            tuple(r["type"] for r in runs),
            doc.get("alpha", 1.0),
            None if ranges is None else tuple(tuple(r) for r in ranges),
        )


def _check_ranges(ranges, k: int) -> tuple:
    ranges = tuple(tuple(float(v) for v in r) for r in ranges)
    if len(ranges) != k:
        raise InvalidArgumentError(f"expected {k} factor ranges, got {len(ranges)}")
    for i, r in enumerate(ranges):
        if len(r) != 2 or not r[0] < r[1]:
            raise InvalidArgumentError(f"factor {i + 1} range must satisfy low < high, got {r}")
    return ranges


def generate_factorial(k: int) -> Design:
    """Full 2^k factorial with the first factor varying slowest."""
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= MAX_FACTORS:
        raise InvalidArgumentError(f"k must be an integer in [1, {MAX_FACTORS}], got {k!r}")
    pts = np.array(list(itertools.product((-1.0, 1.0), repeat=int(k))))
    return Design(pts, (FACTORIAL,) * len(pts))


def rotatable_alpha(n_f: int) -> float:
    """Axial distance ``n_f ** (1/4)`` that makes a CCD rotatable."""
    return float(n_f) ** 0.25


def _is_full_factorial(d: Design) -> bool:
    if d.n_f != d.n_runs or d.n_runs != 2**d.k:
        return False
    rows = {tuple(r) for r in d.points}
    return len(rows) == d.n_runs


def augment_ccd(base: Design, n0: int, alpha: float | str = ROTATABLE) -> Design:
    """Append 2k axial runs and `n0` center runs to a full factorial.

    `alpha` is either a positive axial distance or the string ``"rotatable"``.
    Axial runs are ordered factor by factor, ``-alpha`` before ``+alpha``.
    """
    if not _is_full_factorial(base):
        raise InvalidArgumentError("augment_ccd requires a full factorial base design")
    if isinstance(n0, bool) or not isinstance(n0, (int, np.integer)) or n0 < 1:
        raise InvalidArgumentError(f"n0 must be an integer >= 1, got {n0!r}")
    if isinstance(alpha, str):
        if alpha != ROTATABLE:
            raise InvalidArgumentError(f"alpha must be a positive number or {ROTATABLE!r}")
        a = rotatable_alpha(base.n_f)
    else:
        a = float(alpha)
        if not a > 0 or not math.isfinite(a):
            raise InvalidArgumentError(f"alpha must be > 0, got {alpha!r}")
    k = base.k
    axial = np.zeros((2 * k, k))
    for i in range(k):
        axial[2 * i, i] = -a
        axial[2 * i + 1, i] = a
    pts = np.vstack([base.points, axial, np.zeros((int(n0), k))])
    types = base.types + (AXIAL,) * (2 * k) + (CENTER,) * int(n0)
    return Design(pts, types, a, base.factor_ranges)


def decode(d: Design) -> np.ndarray:
    """Coded levels mapped affinely onto natural units."""
    if d.factor_ranges is None:
        raise InvalidArgumentError("design has no factor ranges to decode with")
    r = np.asarray(d.factor_ranges)
    center = 0.5 * (r[:, 0] + r[:, 1])
    half = 0.5 * (r[:, 1] - r[:, 0])
    return center + d.points * half


def encode(natural, factor_ranges) -> np.ndarray:
    """Inverse of :func:`decode` for arbitrary natural-unit points."""
    r = np.asarray(_check_ranges(factor_ranges, np.shape(natural)[-1]))
    center = 0.5 * (r[:, 0] + r[:, 1])
    half = 0.5 * (r[:, 1] - r[:, 0])
    return (np.asarray(natural, dtype=float) - center) / half


# -- model matrices ---------------------------------------------------------


def basis_names(k: int, order: str) -> tuple:
    names = ["1"] + [f"x{i + 1}" for i in range(k)]
    if order == "second":
        names += [f"x{i + 1}^2" for i in range(k)]
        names += [f"x{i + 1}*x{j + 1}" for i, j in itertools.combinations(range(k), 2)]
    elif order != "first":
        raise InvalidArgumentError(f"order must be 'first' or 'second', got {order!r}")
    return tuple(names)


def basis(points, order: str) -> np.ndarray:
    """Polynomial basis rows for coded `points` (shape (M, k) or (k,))."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    cols = [np.ones(len(x))] + [x[:, i] for i in range(x.shape[1])]
    if order == "second":
        cols += [x[:, i] ** 2 for i in range(x.shape[1])]
        cols += [x[:, i] * x[:, j] for i, j in itertools.combinations(range(x.shape[1]), 2)]
    elif order != "first":
        raise InvalidArgumentError(f"order must be 'first' or 'second', got {order!r}")
    return np.column_stack(cols)


@dataclass(frozen=True)
class ModelMatrix:
    """Model matrix X of a design for a first- or second-order polynomial."""

    X: np.ndarray
    names: tuple
    order: str
    k: int
    _xtx_inv: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_runs(self) -> int:
        return self.X.shape[0]

    def xtx(self) -> np.ndarray:
        return self.X.T @ self.X

    def xtx_inverse(self) -> np.ndarray:
        """(X'X)^-1 via a column-pivoted QR; raises SingularDesignError."""
        if self._xtx_inv is None:
            object.__setattr__(self, "_xtx_inv", _pivoted_inverse(self.xtx(), self.names))
        return self._xtx_inv


def model_matrix(d: Design, order: str = "second") -> ModelMatrix:
    X = basis(d.points, order)
    X.setflags(write=False)
    return ModelMatrix(X, basis_names(d.k, order), order, d.k)


def _pivoted_inverse(A: np.ndarray, names: Sequence[str]) -> np.ndarray:
    p = A.shape[0]
    q, r, piv = scipy.linalg.qr(A, pivoting=True)
    diag = np.abs(np.diag(r))
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
        rank = int(np.sum(diag > diag[0] / SINGULAR_CONDITION)) if diag[0] > 0 else 0
        rank = min(rank, p - 1)
        raise SingularDesignError([names[j] for j in sorted(piv[rank:])], cond)
    # A P = Q R  =>  A^-1 = P R^-1 Q'
    inv_perm = scipy.linalg.solve_triangular(r, q.T)
    out = np.empty_like(inv_perm)
    out[piv] = inv_perm
    return 0.5 * (out + out.T)


# -- property audits --------------------------------------------------------


@dataclass(frozen=True)
class OrthogonalityResult:
    orthogonal: bool
    max_offdiag: float


@dataclass(frozen=True)
class RotatabilityResult:
    rotatable: bool
    spread: float
    values: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class UniformPrecisionResult:
    uniform: bool
    v_origin: float
    v_unit: float
    direction_dependent: bool = False


def check_orthogonality(m: ModelMatrix, tol: float = ORTHOGONALITY_TOL) -> OrthogonalityResult:
    xtx = m.xtx()
    off = xtx - np.diag(np.diag(xtx))
    worst = float(np.max(np.abs(off))) if off.size else 0.0
    return OrthogonalityResult(worst <= tol, worst)


def scaled_prediction_variance(m: ModelMatrix, x) -> float | np.ndarray:
    """``N f(x)' (X'X)^-1 f(x)`` at one coded point or at each row of `x`."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != m.k:
        raise InvalidArgumentError(f"point has {pts.shape[1]} coordinates, design has {m.k}")
    F = basis(pts, m.order)
    v = m.n_runs * np.einsum("ij,jk,ik->i", F, m.xtx_inverse(), F)
    return float(v[0]) if single else v


def probe_points(k: int, radius: float, n_probe: int = DEFAULT_PROBES) -> np.ndarray:
    """Deterministic points on the sphere of `radius`.

    k=2 uses a uniform angular grid starting on the x1 axis; k=3 uses a
    Fibonacci lattice.
    """
    if n_probe < 8:
        raise InvalidArgumentError(f"n_probe must be >= 8, got {n_probe}")
    if radius < 0:
        raise InvalidArgumentError(f"radius must be >= 0, got {radius}")
    i = np.arange(n_probe)
    if k == 2:
        t = 2.0 * np.pi * i / n_probe
        return radius * np.column_stack([np.cos(t), np.sin(t)])
    if k == 3:
        z = 1.0 - (2.0 * i + 1.0) / n_probe
        rho = np.sqrt(1.0 - z * z)
        t = i * np.pi * (3.0 - math.sqrt(5.0))
        return radius * np.column_stack([rho * np.cos(t), rho * np.sin(t), z])
    raise InvalidArgumentError(f"rotatability probes are defined for k = 2 or 3, got k={k}")


def check_rotatability(
    m: ModelMatrix,
    radius: float = 1.0,
    n_probe: int = DEFAULT_PROBES,
    tol: float = ROTATABILITY_TOL,
) -> RotatabilityResult:
    values = scaled_prediction_variance(m, probe_points(m.k, radius, n_probe))
    spread = float(values.max() - values.min())
    return RotatabilityResult(spread <= tol, spread, values)


def check_uniform_precision(m: ModelMatrix, tol: float = UNIFORM_PRECISION_TOL) -> UniformPrecisionResult:
    """Compare scaled variance at the origin and at (1, 0, ..., 0).

    When the design is not rotatable at radius 1 the unit-distance value
    depends on direction; the axis value is used and `direction_dependent`
    is set.
    """
    origin = np.zeros(m.k)
    unit = np.zeros(m.k)
    unit[0] = 1.0
    v0 = scaled_prediction_variance(m, origin)
    v1 = scaled_prediction_variance(m, unit)
    dependent = False
    if m.k in (2, 3):
        dependent = not check_rotatability(m, 1.0).rotatable
        if dependent:
            warnings.warn("design is not rotatable at radius 1; using the axis value", stacklevel=2)
    return UniformPrecisionResult(bool(abs(v0 - v1) <= tol), v0, v1, dependent)


def audit(d: Design) -> dict:
    """Orthogonality on the first-order basis, the rest on the second-order."""
    orth = check_orthogonality(model_matrix(d, "first"))
    m2 = model_matrix(d, "second")
    rot = check_rotatability(m2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        uni = check_uniform_precision(m2)
    return {
        "orthogonal": orth.orthogonal,
        "max_offdiag": orth.max_offdiag,
        "rotatable": rot.rotatable,
        "spread": rot.spread,
        "uniform": uni.uniform,
        "v_origin": uni.v_origin,
        "v_unit": uni.v_unit,
    }
