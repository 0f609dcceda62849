"""Plot data for model adequacy and design checks.

Everything here returns :class:`PlotSeries` values; :mod:`ipmboot.plotting`
turns them into SVG and CSV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .doe import ModelMatrix, scaled_prediction_variance
from .errors import InvalidArgumentError
from .ipm import Dataset
from .stats import norm_ppf

SCATTER = "scatter"
LINE = "line"


@dataclass(frozen=True)
class PlotSeries:
    name: str
    points: tuple
    kind: str = SCATTER
    axis_labels: tuple = ("x", "y")

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if not pts:
            raise InvalidArgumentError(f"series {self.name!r} has no points")
        if not all(math.isfinite(x) and math.isfinite(y) for x, y in pts):
            raise InvalidArgumentError(f"series {self.name!r} has non-finite coordinates")
        if self.kind not in (SCATTER, LINE):
            raise InvalidArgumentError(f"kind must be {SCATTER!r} or {LINE!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "axis_labels", tuple(self.axis_labels))

    @property
    def xs(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def ys(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])


@dataclass(frozen=True)
class QQPlot:
    points: PlotSeries
    reference: PlotSeries
    degenerate: bool

    @property
    def series(self) -> list:
        return [self.points, self.reference]


def plotting_positions(n: int) -> np.ndarray:
    return (np.arange(1, n + 1) - 0.5) / n


def qq_normal(residuals) -> QQPlot:
    """Standardized sorted residuals against standard normal quantiles.

    Residuals are standardized by their mean and their 1/n standard
    deviation.  Zero spread yields all-zero ordinates and ``degenerate``.
    """
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size < 1:
        raise InvalidArgumentError("need at least one residual")
    sd = float(np.sqrt(np.mean((r - r.mean()) ** 2)))
    degenerate = not sd > 0
    z = np.zeros_like(r) if degenerate else (r - r.mean()) / sd
    q = np.array([norm_ppf(p) for p in plotting_positions(r.size)])
    z = np.sort(z)
    labels = ("normal quantile", "standardized residual")
    pts = PlotSeries("residuals", tuple(zip(q, z)), SCATTER, labels)
    lo, hi = float(q[0]), float(q[-1])
    ref = PlotSeries("identity", ((lo, lo), (hi, hi)), LINE, labels)
    return QQPlot(pts, ref, degenerate)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    return 0.0 if denom == 0 else float(np.dot(da, db)) / denom


@dataclass(frozen=True)
class ResidualPlots:
    series: tuple
    correlation: dict


def residual_vs_predictor(data: Dataset, residuals) -> ResidualPlots:
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size != data.n:
        raise InvalidArgumentError("residuals and data differ in length")
    series, corr = [], {}
    for name in ("x1", "x2"):
        x = getattr(data, name)
        series.append(PlotSeries(name, tuple(zip(x, r)), SCATTER, (name, "residual")))
        corr[name] = _pearson(x, r)
    return ResidualPlots(tuple(series), corr)


def varfcn_profile(m: ModelMatrix, directions, radii) -> list:
    """Scaled prediction variance along rays from the design center."""
    radii = np.asarray(radii, dtype=float)
    out = []
    for d in directions:
        d = np.asarray(d, dtype=float)
        if d.shape != (m.k,):
            raise InvalidArgumentError(f"direction must have {m.k} components")
        norm = np.linalg.norm(d)
        if not norm > 0:
            raise InvalidArgumentError("direction must be nonzero")
        d = d / norm
        v = scaled_prediction_variance(m, radii[:, None] * d[None, :])
        label = "(" + ", ".join(f"{c:.4g}" for c in d) + ")"
        out.append(PlotSeries(f"direction {label}", tuple(zip(radii, v)), LINE,
                              ("distance from center", "scaled prediction variance")))
    return out


def default_directions(k: int, count: int = 4) -> list:
    """Axis and diagonal directions in the (x1, x2) plane."""
    dirs = []
    for j in range(count):
        t = 0.25 * math.pi * j
        d = np.zeros(k)
        d[0] = math.cos(t)
        if k > 1:
            d[1] = math.sin(t)
        elif j:
            continue
        dirs.append(d)
    return dirs


def contour_grid(m: ModelMatrix, half_width: float, size: int = 41) -> np.ndarray:
    """(x1, x2, scaled variance) rows over the square [-w, w]^2.

    Remaining factors, if any, are held at zero.
    """
    if m.k < 2:
        raise InvalidArgumentError("contour grid needs at least two factors")
    if size < 2:
        raise InvalidArgumentError("grid size must be >= 2")
    g = np.linspace(-half_width, half_width, size)
    a, b = np.meshgrid(g, g, indexing="ij")
    pts = np.zeros((size * size, m.k))
    pts[:, 0] = a.ravel()
    pts[:, 1] = b.ravel()
    v = scaled_prediction_variance(m, pts)
    return np.column_stack([pts[:, 0], pts[:, 1], v])


def sse_trace_series(trace) -> PlotSeries:
    return PlotSeries("sse", tuple(enumerate(trace)), LINE, ("iteration", "SSE"))
