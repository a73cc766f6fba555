"""Attribution quality metrics: completeness error and insertion curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError, ShapeError
from .models import DifferentiableModel, InputVector
from .riemann import AttributionMap


@dataclass(frozen=True)
class InsertionCurve:
    """Model output as a function of the fraction of pixels inserted."""

    fractions: np.ndarray
    scores: np.ndarray
    auc: float

    def __post_init__(self):
        fr = np.asarray(self.fractions, dtype=np.float64).reshape(-1).copy()
        sc = np.asarray(self.scores, dtype=np.float64).reshape(-1).copy()
        if fr.size != sc.size or fr.size < 2:
            raise ShapeError("fractions and scores must match and have length >= 2")
        if fr[0] != 0.0 or fr[-1] != 1.0 or np.any(np.diff(fr) <= 0.0):
            raise DomainError("fractions must rise strictly from 0 to 1")
        fr.setflags(write=False)
        sc.setflags(write=False)
        object.__setattr__(self, "fractions", fr)
        object.__setattr__(self, "scores", sc)


def _trapezoid(ys: np.ndarray, xs: np.ndarray) -> float:
    return float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)))


def completeness_error(attr: AttributionMap, guard: float = 1e-6) -> float:
    """Relative gap between the attribution total and the model's output change."""
    delta = attr.model_delta
    if abs(delta) <= guard:
        raise DegenerateInputError(
            f"model delta {delta} within guard {guard}; relative error undefined"
        )
    return abs(attr.sum - delta) / abs(delta)


def _location_ranking(attr: AttributionMap, shape) -> tuple[np.ndarray, int]:
    """Spatial locations ordered by descending attribution, ties by index."""
    if shape is not None:
        h, w, c = shape
        per_location = attr.values.reshape(h * w, c).sum(axis=1)
    else:
        per_location = attr.values
    order = np.argsort(-per_location, kind="stable")
    return order, per_location.size


def insertion_score(
    model: DifferentiableModel,
    input: InputVector,
    baseline: InputVector,
    attr: AttributionMap,
    steps: int,
) -> InsertionCurve:
    """Insert pixels from baseline toward input in decreasing attribution order.

    Multi-channel inputs are ranked per spatial location (channel-summed
    attribution) and inserted whole pixels at a time.
    """
    if steps < 1:
        raise DomainError(f"need steps >= 1, got {steps}")
    if input.dim != baseline.dim or input.dim != attr.values.size:
        raise ShapeError("input, baseline, and attribution dimensions must match")
    order, n = _location_ranking(attr, input.shape)
    if input.shape is not None:
        h, w, c = input.shape
        feature_index = np.arange(input.dim).reshape(h * w, c)
    else:
        feature_index = np.arange(input.dim).reshape(n, 1)

    counts = sorted({min(n, (s * n) // steps) for s in range(steps + 1)} | {0, n})
    fractions = []
    scores = []
    composite = baseline.values.copy()
    inserted = 0
    for count in counts:
        if count > inserted:
            newly = order[inserted:count]
            flat = feature_index[newly].reshape(-1)
            composite[flat] = input.values[flat]
            inserted = count
        scores.append(model.evaluate(InputVector(composite, input.shape)))
        fractions.append(count / n)
    fractions = np.asarray(fractions)
    scores = np.asarray(scores)
    return InsertionCurve(
        fractions=fractions, scores=scores, auc=_trapezoid(scores, fractions)
    )


def normalized_insertion_score(curve: InsertionCurve, input_score: float) -> float:
    """Curve area relative to the model's output on the unmodified input."""
    if abs(input_score) <= 1e-12:
        raise DegenerateInputError(
            f"input score {input_score} too close to zero to normalize by"
        )
    return curve.auc / input_score


def aggregate(values) -> tuple[float, float, int]:
    """Mean, median (lower of two middles for even counts), and count."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise DomainError("cannot aggregate an empty collection")
    ordered = np.sort(values)
    median = float(ordered[(values.size - 1) // 2])
    return float(np.mean(values)), median, int(values.size)
