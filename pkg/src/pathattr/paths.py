"""Attribution paths from a baseline to an input, on a common parameter t in [0, 1].

Three constructors are provided: the straight line, a Gaussian-blur scale-space
path, and a greedy low-gradient-first path. All expose the same interface
(point, velocity, endpoints) so integration code never branches on path kind.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DomainError, ShapeError
from .models import DifferentiableModel, InputVector


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"path parameter must lie in [0, 1], got {t}")
    return t


class Path(ABC):
    """Curve gamma(t) in feature space with gamma(0) = baseline, gamma(1) = input."""

    @property
    @abstractmethod
    def dimension(self) -> int:
        ...

    @abstractmethod
    def point(self, t: float) -> InputVector:
        ...

    @abstractmethod
    def velocity(self, t: float) -> np.ndarray:
        """d gamma / d t at t; finite everywhere on [0, 1]."""

    @property
    def baseline(self) -> InputVector:
        return self.point(0.0)

    @property
    def input(self) -> InputVector:
        return self.point(1.0)


class LinearPath(Path):
    """gamma(t) = baseline + t * (input - baseline)."""

    def __init__(self, baseline: InputVector, input: InputVector):
        if baseline.dim != input.dim:
            raise ShapeError(
                f"baseline dimension {baseline.dim} != input dimension {input.dim}"
            )
        self._baseline = baseline
        self._input = input
        self._delta = input.values - baseline.values
        self._delta.setflags(write=False)

    @property
    def dimension(self) -> int:
        return self._input.dim

    def point(self, t: float) -> InputVector:
        t = _check_t(t)
        # endpoints returned verbatim so no rounding creeps in at t = 0 or 1
        if t == 0.0:
            return self._baseline
        if t == 1.0:
            return self._input
        return InputVector(self._baseline.values + t * self._delta, self._input.shape)

    def velocity(self, t: float) -> np.ndarray:
        _check_t(t)
        return self._delta.copy()


def linear_path(baseline: InputVector, input: InputVector) -> Path:
    return LinearPath(baseline, input)


def gaussian_kernel(alpha: float, radius: int) -> np.ndarray:
    """Truncated kernel w(x, y) proportional to exp(-(x^2 + y^2)/alpha), sum 1.

    Built as the outer product of the 1D factor so the x<->y symmetry is exact.
    """
    if alpha <= 0:
        raise DomainError(f"kernel scale must be positive, got {alpha}")
    radius = int(radius)
    if radius < 1:
        raise DomainError(f"kernel radius must be >= 1, got {radius}")
    u = _kernel_1d(alpha, radius)
    return np.outer(u, u)


def _kernel_1d(alpha: float, radius: int) -> np.ndarray:
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    u = np.exp(-offsets * offsets / alpha)
    return u / u.sum()


def blur_image(image: np.ndarray, alpha: float, radius: int) -> np.ndarray:
    """Convolve each channel with the truncated kernel; replicate-padded edges.

    Separable application of the two 1D factors equals the full 2D kernel.
    """
    u = _kernel_1d(alpha, radius)
    out = np.empty_like(image, dtype=np.float64)
    for c in range(image.shape[2]):
        tmp = correlate1d(image[:, :, c], u, axis=0, mode="nearest")
        out[:, :, c] = correlate1d(tmp, u, axis=1, mode="nearest")
    return out


@dataclass(frozen=True)
class BlurPathConfig:
    """Scale-space settings: alpha_max in pixels^2, truncation radius in pixels."""

    alpha_max: float
    kernel_radius: int
    velocity_step: float = 1e-3

    def __post_init__(self):
        if self.alpha_max <= 0:
            raise DomainError(f"alpha_max must be positive, got {self.alpha_max}")
        if self.kernel_radius < 1:
            raise DomainError(f"kernel_radius must be >= 1, got {self.kernel_radius}")
        if self.velocity_step <= 0:
            raise DomainError(f"velocity_step must be positive, got {self.velocity_step}")
        needed = 3.0 * math.sqrt(self.alpha_max / 2.0)
        # radius below 3 sigma loses more than 0.3% of the kernel mass
        if self.kernel_radius < needed:
            raise DomainError(
                f"kernel_radius {self.kernel_radius} < 3*sqrt(alpha_max/2) = {needed:.3f}"
            )


def default_blur_config(shape: tuple[int, int, int], velocity_step: float = 1e-3) -> BlurPathConfig:
    """Blur scale half the squared image side: baseline carries no usable detail."""
    h, w, _ = shape
    alpha_max = 0.5 * float(max(h, w)) ** 2
    radius = int(math.ceil(3.0 * math.sqrt(alpha_max / 2.0)))
    return BlurPathConfig(alpha_max=alpha_max, kernel_radius=radius, velocity_step=velocity_step)


class BlurPath(Path):
    """Scale-space path: kernel scale alpha(t) = alpha_max * (1 - t).

    t = 1 is the sharp input (identity, no convolution); t = 0 the maximally
    blurred baseline. Velocity comes from finite differences in t, central in
    the interior and one-sided where the stencil would leave [0, 1].
    """

    def __init__(self, input: InputVector, config: BlurPathConfig):
        if input.shape is None:
            raise ShapeError("blur path needs an input with image shape metadata")
        self._input = input
        self._config = config
        self._image = input.as_image()
        self._baseline = InputVector(
            blur_image(self._image, config.alpha_max, config.kernel_radius).reshape(-1),
            input.shape,
        )

    @property
    def dimension(self) -> int:
        return self._input.dim

    @property
    def config(self) -> BlurPathConfig:
        return self._config

    def point(self, t: float) -> InputVector:
        t = _check_t(t)
        if t == 1.0:
            return self._input
        if t == 0.0:
            return self._baseline
        alpha = self._config.alpha_max * (1.0 - t)
        blurred = blur_image(self._image, alpha, self._config.kernel_radius)
        return InputVector(blurred.reshape(-1), self._input.shape)

    def velocity(self, t: float) -> np.ndarray:
        t = _check_t(t)
        h = self._config.velocity_step
        if t - h < 0.0:
            return (self.point(t + h).values - self.point(t).values) / h
        if t + h > 1.0:
            return (self.point(t).values - self.point(t - h).values) / h
        return (self.point(t + h).values - self.point(t - h).values) / (2.0 * h)


def blur_path(input: InputVector, config: BlurPathConfig) -> Path:
    return BlurPath(input, config)


class PiecewiseLinearPath(Path):
    """Linear interpolation through equally spaced anchors on t in [0, 1]."""

    def __init__(self, anchors: np.ndarray, shape: tuple[int, int, int] | None):
        anchors = np.asarray(anchors, dtype=np.float64)
        if anchors.ndim != 2 or anchors.shape[0] < 2:
            raise ShapeError("need a (segments+1, d) anchor array")
        self._anchors = anchors.copy()
        self._anchors.setflags(write=False)
        self._shape = shape
        self._segments = anchors.shape[0] - 1

    @property
    def dimension(self) -> int:
        return self._anchors.shape[1]

    @property
    def anchors(self) -> np.ndarray:
        return self._anchors

    def point(self, t: float) -> InputVector:
        t = _check_t(t)
        s = t * self._segments
        i = int(math.floor(s))
        if i >= self._segments:
            i = self._segments - 1
        frac = s - i
        if frac == 0.0:
            return InputVector(self._anchors[i], self._shape)
        if frac == 1.0:
            return InputVector(self._anchors[i + 1], self._shape)
        values = self._anchors[i] + frac * (self._anchors[i + 1] - self._anchors[i])
        return InputVector(values, self._shape)

    def velocity(self, t: float) -> np.ndarray:
        t = _check_t(t)
        i = int(math.floor(t * self._segments))
        if i >= self._segments:
            i = self._segments - 1
        return (self._anchors[i + 1] - self._anchors[i]) * self._segments


def guided_path(
    model: DifferentiableModel,
    baseline: InputVector,
    input: InputVector,
    steps: int,
    fraction: float = 0.1,
) -> Path:
    """Greedy low-gradient-first path from baseline to input.

    Each of the `steps` segments spends an equal share of the total l1 travel
    budget, always moving the not-yet-finished features whose current gradient
    magnitudes sit in the lowest `fraction` quantile. High-gradient features
    move last, keeping the integrand tame for most of the traversal.
    """
    if not 0.0 < fraction <= 1.0:
        raise DomainError(f"fraction must lie in (0, 1], got {fraction}")
    if steps < 2:
        raise DomainError(f"need at least 2 steps, got {steps}")
    if baseline.dim != input.dim:
        raise ShapeError(
            f"baseline dimension {baseline.dim} != input dimension {input.dim}"
        )

    target = input.values
    current = baseline.values.copy()
    total = float(np.abs(target - current).sum())
    per_step = total / steps
    # movement below this is float noise, not real travel
    tiny = 1e-12 * max(1.0, total)

    anchors = np.empty((steps + 1, input.dim), dtype=np.float64)
    anchors[0] = current
    for step in range(steps):
        budget = per_step
        while budget > tiny:
            residual = target - current
            active = np.flatnonzero(np.abs(residual) > tiny)
            if active.size == 0:
                break
            grads = model.gradient(InputVector(current, input.shape))
            m = max(1, math.ceil(fraction * active.size))
            order = np.argsort(np.abs(grads[active]), kind="stable")
            chosen = active[order[:m]]
            need = float(np.abs(residual[chosen]).sum())
            if need <= budget:
                current[chosen] = target[chosen]
                budget -= need
            else:
                current[chosen] += (budget / need) * residual[chosen]
                budget = 0.0
        anchors[step + 1] = current
    anchors[steps] = target
    return PiecewiseLinearPath(anchors, input.shape)
