"""Left Riemann sums over arbitrary sample schedules, and attribution assembly.

The sum rule is fixed: evaluate the integrand at each schedule point, weight
by the width of the interval to the right, never touch the terminal point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ShapeError
from .models import DifferentiableModel, InputVector
from .paths import Path


@dataclass(frozen=True)
class AlphaSchedule:
    """Ordered evaluation points on [0, terminal); the terminal edge is not evaluated."""

    points: np.ndarray
    terminal: float = 1.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1).copy()
        if pts.size < 1:
            raise ShapeError("schedule needs at least one point")
        if pts[0] != 0.0:
            raise ShapeError(f"first point must be 0, got {pts[0]}")
        if float(self.terminal) != 1.0:
            raise ShapeError(f"terminal must be 1, got {self.terminal}")
        # reject out-of-order input outright; sorting here would hide caller bugs
        if np.any(np.diff(pts) <= 0.0) or pts[-1] >= self.terminal:
            raise ShapeError("schedule points must be strictly increasing below terminal")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "terminal", float(self.terminal))

    @property
    def k(self) -> int:
        return self.points.size

    def deltas(self) -> np.ndarray:
        """Interval widths (alpha_{j+1} - alpha_j), the last one ending at terminal."""
        edges = np.append(self.points, self.terminal)
        return np.diff(edges)

    @staticmethod
    def uniform(k: int) -> "AlphaSchedule":
        if k < 1:
            raise ShapeError(f"need k >= 1, got {k}")
        return AlphaSchedule(np.arange(k, dtype=np.float64) / k)


@dataclass(frozen=True)
class AttributionMap:
    """Per-feature integral estimates plus the bookkeeping the completeness check needs."""

    values: np.ndarray
    sum: float
    model_delta: float
    schedule_used: AlphaSchedule

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1).copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if abs(float(np.sum(values)) - self.sum) > 1e-12 * max(1.0, abs(self.sum)):
            raise NumericalError("stored sum disagrees with the value total")


def left_riemann(samples: np.ndarray, schedule: AlphaSchedule) -> float:
    """Sum of g(alpha_j) * (alpha_{j+1} - alpha_j) with alpha_k = terminal."""
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    if samples.size != schedule.k:
        raise ShapeError(
            f"got {samples.size} samples for a schedule of {schedule.k} points"
        )
    return float(np.dot(samples, schedule.deltas()))


def integrand(model: DifferentiableModel, path: Path, t: float) -> np.ndarray:
    """Model gradient at gamma(t), weighted elementwise by the path velocity."""
    return model.gradient(path.point(t)) * path.velocity(t)


def attribute(model: DifferentiableModel, path: Path, schedule: AlphaSchedule) -> AttributionMap:
    """Left-rule integral of the attribution integrand, one component per feature."""
    deltas = schedule.deltas()
    acc = np.zeros(path.dimension, dtype=np.float64)
    for t, width in zip(schedule.points, deltas):
        sample = integrand(model, path, float(t))
        if not np.all(np.isfinite(sample)):
            raise NumericalError(f"non-finite integrand sample at t = {t}")
        acc += width * sample
    model_delta = model.evaluate(path.input) - model.evaluate(path.baseline)
    return AttributionMap(
        values=acc,
        sum=float(np.sum(acc)),
        model_delta=float(model_delta),
        schedule_used=schedule,
    )
