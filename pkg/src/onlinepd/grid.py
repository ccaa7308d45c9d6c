"""Image and vector-field operations on a regular pixel grid.

Images are ``(H, W)`` float64 arrays. Vector fields (dual variables,
gradients) are ``(H, W, 2)`` arrays; channel 0 is the row direction and
channel 1 the column direction. Cell width is fixed to 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Displacement",
    "grad",
    "div",
    "operator_norm_sq",
    "warp",
    "gaussian_kernel",
    "gaussian_convolve",
    "pointwise_norm",
    "total_variation",
]


def grad(img):
    """Forward-difference gradient with zero in the last row/column."""
    x = np.asarray(img, dtype=float)
    out = np.zeros(x.shape + (2,))
    out[:-1, :, 0] = x[1:, :] - x[:-1, :]
    out[:, :-1, 1] = x[:, 1:] - x[:, :-1]
    return out


def div(field):
    """Discrete divergence, the negative adjoint of :func:`grad`."""
    y = np.asarray(field, dtype=float)
    p, q = y[..., 0], y[..., 1]
    out = np.zeros(y.shape[:2])
    # rows
    out[:-1, :] += p[:-1, :]
    out[1:, :] -= p[:-1, :]
    # columns
    out[:, :-1] += q[:, :-1]
    out[:, 1:] -= q[:, :-1]
    return out


def pointwise_norm(field):
    """Euclidean norm of each pixel of a vector field."""
    y = np.asarray(field)
    return np.sqrt(y[..., 0] ** 2 + y[..., 1] ** 2)


def total_variation(img):
    """Isotropic total variation ``sum |grad x|_2``."""
    return float(pointwise_norm(grad(img)).sum())


def operator_norm_sq(height, width, iterations=100, seed=0):
    """Power-iteration estimate of ``||grad||^2`` on a ``height x width`` grid.

    The Rayleigh quotient of ``div∘grad`` is returned; it is nondecreasing
    in ``iterations`` and bounded by 8.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if height * width <= 1:
        return 0.0
    x = np.random.default_rng(seed).standard_normal((height, width))
    x /= np.linalg.norm(x)
    value = 0.0
    for _ in range(iterations):
        gx = grad(x)
        value = float(np.sum(gx * gx))  # ||Dx||^2 with ||x|| = 1
        x = -div(gx)
        nrm = np.linalg.norm(x)
        if nrm == 0.0:
            return 0.0
        x /= nrm
    return value


@dataclass(frozen=True)
class Displacement:
    """A displacement field ``v`` acting by composition, ``x∘v``.

    Either a constant shift ``u`` (so ``v(p) = p - u``), or a full field of
    absolute target coordinates of shape ``(H, W, 2)``.
    """

    shift: np.ndarray | None = None
    targets: np.ndarray | None = None

    def __post_init__(self):
        if (self.shift is None) == (self.targets is None):
            raise ValueError("give exactly one of shift or targets")
        arr = self.shift if self.shift is not None else self.targets
        if not np.all(np.isfinite(arr)):
            raise ValueError("displacement must be finite")

    @classmethod
    def constant(cls, u):
        u = np.asarray(u, dtype=float).reshape(2)
        return cls(shift=u)

    @classmethod
    def field(cls, targets):
        t = np.asarray(targets, dtype=float)
        if t.ndim != 3 or t.shape[2] != 2:
            raise ValueError("targets must have shape (H, W, 2)")
        return cls(targets=t)

    @property
    def is_constant(self):
        return self.shift is not None

    def target_coords(self, shape):
        """Absolute sampling coordinates ``v(p)`` for every pixel ``p``."""
        if self.targets is not None:
            return self.targets
        h, w = shape
        rows, cols = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
        return np.stack([rows - self.shift[0], cols - self.shift[1]], axis=-1)


def _axis_weights(n, coords):
    # clamped-coordinate linear interpolation weights along one axis
    c = np.clip(coords, 0.0, n - 1)
    if n == 1:
        i0 = np.zeros(c.shape, dtype=np.intp)
        return i0, i0, np.zeros(c.shape)
    i0 = np.minimum(np.floor(c).astype(np.intp), n - 2)
    return i0, i0 + 1, c - i0


def _shift_axis(x, shift, axis):
    n = x.shape[axis]
    if shift == 0.0:
        return x
    i0, i1, w = _axis_weights(n, np.arange(n, dtype=float) - shift)
    a = np.take(x, i0, axis=axis)
    b = np.take(x, i1, axis=axis)
    shape = [1] * x.ndim
    shape[axis] = n
    w = w.reshape(shape)
    if not np.any(w):
        return a
    return (1.0 - w) * a + w * b


def warp(img, disp):
    """Compose an image or vector field with a displacement, ``x∘v``.

    Bilinear interpolation; samples outside the grid are clamped to the
    nearest edge (replicate extension). Vector fields are warped channel by
    channel. ``disp`` may be a :class:`Displacement` or a 2-vector shift.
    """
    x = np.asarray(img, dtype=float)
    if not isinstance(disp, Displacement):
        disp = Displacement.constant(disp)
    if disp.is_constant:
        out = _shift_axis(x, float(disp.shift[0]), 0)
        out = _shift_axis(out, float(disp.shift[1]), 1)
        return out.copy() if out is x else out

    h, w = x.shape[:2]
    t = disp.target_coords((h, w))
    if t.shape[:2] != (h, w):
        raise ValueError("displacement field shape does not match image")
    r0, r1, wr = _axis_weights(h, t[..., 0])
    c0, c1, wc = _axis_weights(w, t[..., 1])
    if x.ndim == 3:
        wr = wr[..., None]
        wc = wc[..., None]
    top = (1.0 - wc) * x[r0, c0] + wc * x[r0, c1]
    bottom = (1.0 - wc) * x[r1, c0] + wc * x[r1, c1]
    return (1.0 - wr) * top + wr * bottom


def gaussian_kernel(std, window):
    """Normalized, truncated 1-D Gaussian of odd length ``window``."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    if std <= 0:
        raise ValueError("std must be positive")
    r = window // 2
    t = np.arange(-r, r + 1, dtype=float)
    k = np.exp(-0.5 * (t / std) ** 2)
    return k / k.sum()


def gaussian_convolve(img, std=3.0, window=11):
    """Separable Gaussian smoothing with Neumann (mirror) boundary."""
    x = np.asarray(img, dtype=float)
    k = gaussian_kernel(std, window)
    r = window // 2
    if window >= 2 * min(x.shape[:2]) + 1:
        raise ValueError(f"window {window} too large for image of shape {x.shape[:2]}")
    out = x
    for axis in (0, 1):
        pad = [(0, 0)] * out.ndim
        pad[axis] = (r, r)
        padded = np.pad(out, pad, mode="symmetric")
        n = out.shape[axis]
        acc = np.zeros_like(out)
        for i, weight in enumerate(k):
            acc += weight * np.take(padded, np.arange(i, i + n), axis=axis)
        out = acc
    return out
