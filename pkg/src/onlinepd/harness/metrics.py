"""Image quality metrics for unit-range images."""
from __future__ import annotations

import numpy as np

PSNR_CAP = 99.0


def psnr(a, b):
    """Peak signal-to-noise ratio with peak 1, capped at 99 dB."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _gauss_filter_valid(img, w1):
    # separable valid-mode correlation
    n = len(w1)
    rows = sum(w1[i] * img[i : img.shape[0] - n + 1 + i, :] for i in range(n))
    return sum(w1[j] * rows[:, j : rows.shape[1] - n + 1 + j] for j in range(n))


def ssim(a, b, win=11, std=1.5, k1=0.01, k2=0.03, data_range=1.0):
    """Mean SSIM with a Gaussian window over the valid region."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < win:
        raise ValueError(f"images must be at least {win} pixels on each side")
    r = np.arange(win) - (win - 1) / 2.0
    w1 = np.exp(-0.5 * (r / std) ** 2)
    w1 /= w1.sum()
    f = lambda z: _gauss_filter_valid(z, w1)
    mu_a, mu_b = f(a), f(b)
    # sample covariances, as in the usual reference implementation
    npix = win * win
    cov = npix / (npix - 1.0)
    va = cov * (f(a * a) - mu_a**2)
    vb = cov * (f(b * b) - mu_b**2)
    vab = cov * (f(a * b) - mu_a * mu_b)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    s = ((2 * mu_a * mu_b + c1) * (2 * vab + c2)) / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2))
    return float(s.mean())
