"""Differentiable scalar-output models with exact, hand-rolled gradients.

All models are immutable after construction and safe to call concurrently.
Gradients are written analytically per model kind (reverse-mode by hand for
the MLP) so that central finite differences on ``evaluate`` stay available
as an independent check.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError


@dataclass(frozen=True)
class InputVector:
    """Flat feature vector with optional (height, width, channels) metadata."""

    values: np.ndarray
    shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise DomainError("input vector contains non-finite values")
        if self.shape is not None:
            h, w, c = self.shape
            if h * w * c != values.size:
                raise ShapeError(
                    f"shape metadata {self.shape} inconsistent with length {values.size}"
                )
        if values is self.values or values.base is not None:
            values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.size

    def as_image(self) -> np.ndarray:
        """Return the (h, w, c) view of the data; requires shape metadata."""
        if self.shape is None:
            raise ShapeError("input vector carries no image shape metadata")
        return self.values.reshape(self.shape)

    @staticmethod
    def from_image(image: np.ndarray) -> "InputVector":
        image = np.asarray(image, dtype=np.float64)
        if image.ndim == 2:
            image = image[:, :, None]
        if image.ndim != 3:
            raise ShapeError(f"expected a 2D or 3D image array, got ndim={image.ndim}")
        h, w, c = image.shape
        return InputVector(image.reshape(-1), (h, w, c))


class DifferentiableModel(ABC):
    """Scalar-output function of a flat feature vector, with exact gradient."""

    @property
    @abstractmethod
    def input_dim(self) -> int:
        ...

    @abstractmethod
    def _value(self, x: np.ndarray) -> float:
        ...

    @abstractmethod
    def _grad(self, x: np.ndarray) -> np.ndarray:
        ...

    def evaluate(self, x: InputVector) -> float:
        return self._value(self._checked(x))

    def gradient(self, x: InputVector) -> np.ndarray:
        return self._grad(self._checked(x))

    def _checked(self, x: InputVector) -> np.ndarray:
        if x.dim != self.input_dim:
            raise ShapeError(
                f"model expects dimension {self.input_dim}, got {x.dim}"
            )
        return x.values


class LinearModel(DifferentiableModel):
    """f(x) = w . x + b"""

    def __init__(self, weights, bias: float = 0.0):
        w = np.asarray(weights, dtype=np.float64).reshape(-1).copy()
        w.setflags(write=False)
        self.weights = w
        self.bias = float(bias)

    @property
    def input_dim(self) -> int:
        return self.weights.size

    def _value(self, x):
        return float(np.dot(self.weights, x) + self.bias)

    def _grad(self, x):
        return self.weights.copy()


class QuadraticModel(DifferentiableModel):
    """f(x) = sum_i c_i x_i^2, with c defaulting to all ones."""

    def __init__(self, dim: int | None = None, coeffs=None):
        if coeffs is None:
            if dim is None:
                raise DomainError("need either dim or coeffs")
            coeffs = np.ones(dim)
        c = np.asarray(coeffs, dtype=np.float64).reshape(-1).copy()
        c.setflags(write=False)
        self.coeffs = c

    @property
    def input_dim(self) -> int:
        return self.coeffs.size

    def _value(self, x):
        return float(np.dot(self.coeffs, x * x))

    def _grad(self, x):
        return 2.0 * self.coeffs * x


class GaussianBumpModel(DifferentiableModel):
    """f(x) = exp(-||x - center||^2 / (2 width^2)); width must be positive."""

    def __init__(self, center, width: float):
        if width <= 0:
            raise DomainError(f"gaussian bump width must be positive, got {width}")
        c = np.asarray(center, dtype=np.float64).reshape(-1).copy()
        c.setflags(write=False)
        self.center = c
        self.width = float(width)

    @property
    def input_dim(self) -> int:
        return self.center.size

    def _value(self, x):
        r = x - self.center
        return float(np.exp(-0.5 * np.dot(r, r) / self.width**2))

    def _grad(self, x):
        r = x - self.center
        f = np.exp(-0.5 * np.dot(r, r) / self.width**2)
        return -f * r / self.width**2


class TanhMLP(DifferentiableModel):
    """Fully connected scalar-output net, tanh hidden activations.

    Tanh keeps the model smooth everywhere, so the path integrand has a
    derivative at every point. The backward pass is hand-rolled reverse
    accumulation, independent of any finite-difference machinery.
    """

    def __init__(self, weights, biases):
        if len(weights) != len(biases) or not weights:
            raise ShapeError("need matching non-empty weight/bias lists")
        ws, bs = [], []
        for W, b in zip(weights, biases):
            W = np.asarray(W, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64).reshape(-1)
            if W.ndim != 2 or W.shape[0] != b.size:
                raise ShapeError(f"layer shape mismatch: {W.shape} vs bias {b.size}")
            W = W.copy()
            b = b.copy()
            W.setflags(write=False)
            b.setflags(write=False)
            ws.append(W)
            bs.append(b)
        for Wa, Wb in zip(ws[:-1], ws[1:]):
            if Wb.shape[1] != Wa.shape[0]:
                raise ShapeError("consecutive layer sizes do not chain")
        if ws[-1].shape[0] != 1:
            raise ShapeError("output layer must produce a single scalar")
        self.weights = tuple(ws)
        self.biases = tuple(bs)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(W.shape[0] for W in self.weights)

    def _forward(self, x):
        acts = []
        h = x
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(W @ h + b)
            acts.append(h)
        out = float(self.weights[-1][0] @ h + self.biases[-1][0])
        return out, acts

    def _value(self, x):
        return self._forward(x)[0]

    def _grad(self, x):
        _, acts = self._forward(x)
        # reverse accumulation: d out / d h_last = W_last
        g = self.weights[-1][0].copy()
        for W, h in zip(reversed(self.weights[:-1]), reversed(acts)):
            g = W.T @ (g * (1.0 - h * h))
        return g


def tiny_mlp(dim: int, hidden=(16, 8), seed: int = 7, gain: float = 2.0) -> TanhMLP:
    """Seeded two-hidden-layer tanh net; same seed and sizes give bit-identical weights."""
    rng = np.random.default_rng(seed)
    sizes = [int(dim), *[int(h) for h in hidden], 1]
    if min(sizes) < 1:
        raise DomainError(f"layer sizes must be positive, got {sizes}")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) * (gain / np.sqrt(fan_in)))
        biases.append(rng.standard_normal(fan_out) * 0.1)
    return TanhMLP(weights, biases)


class CountingModel(DifferentiableModel):
    """Wrapper that counts evaluate/gradient calls; used for cost accounting."""

    def __init__(self, inner: DifferentiableModel):
        self.inner = inner
        self.evaluate_calls = 0
        self.gradient_calls = 0

    @property
    def input_dim(self) -> int:
        return self.inner.input_dim

    def _value(self, x):  # pragma: no cover - delegated via evaluate
        raise NotImplementedError

    def _grad(self, x):  # pragma: no cover - delegated via gradient
        raise NotImplementedError

    def evaluate(self, x: InputVector) -> float:
        self.evaluate_calls += 1
        return self.inner.evaluate(x)

    def gradient(self, x: InputVector) -> np.ndarray:
        self.gradient_calls += 1
        return self.inner.gradient(x)

    def reset(self):
        self.evaluate_calls = 0
        self.gradient_calls = 0


def gradient_check(model: DifferentiableModel, x: InputVector, step: float = 1e-4) -> float:
    """Max relative deviation between the analytic gradient and central differences.

    Per coordinate: |analytic - fd| / (|analytic| + 1e-12), fd computed with the
    symmetric two-point formula at the given step.
    """
    if step <= 0:
        raise DomainError(f"finite-difference step must be positive, got {step}")
    analytic = model.gradient(x)
    base = x.values
    worst = 0.0
    for i in range(x.dim):
        delta = np.zeros_like(base)
        delta[i] = step
        hi = model.evaluate(InputVector(base + delta, x.shape))
        lo = model.evaluate(InputVector(base - delta, x.shape))
        fd = (hi - lo) / (2.0 * step)
        rel = abs(analytic[i] - fd) / (abs(analytic[i]) + 1e-12)
        worst = max(worst, rel)
    return worst
