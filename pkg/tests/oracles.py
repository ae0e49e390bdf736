"""Independent brute-force oracles used to check the package's fast paths.

Everything here is written with explicit loops and textbook formulas, on
purpose: these functions must not share code or vectorization tricks with
the implementations they verify.
"""

import math

import numpy as np


def gaussian_kernel_2d(size: int, sigma: float) -> np.ndarray:
    center = (size - 1) / 2.0
    k = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            k[i, j] = math.exp(-((i - center) ** 2 + (j - center) ** 2) / (2.0 * sigma**2))
    return k / k.sum()


def ssim_reference(x: np.ndarray, y: np.ndarray, window: int = 11, sigma: float = 1.5,
                   k1: float = 0.01, k2: float = 0.03, dynamic_range: float = 1.0) -> float:
    """Sliding-window SSIM with per-window weighted moments, one window at a time."""
    kernel = gaussian_kernel_2d(window, sigma)
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    values = []
    h, w, channels = x.shape
    for c in range(channels):
        for r0 in range(h - window + 1):
            for c0 in range(w - window + 1):
                wx = x[r0 : r0 + window, c0 : c0 + window, c]
                wy = y[r0 : r0 + window, c0 : c0 + window, c]
                mu_x = float((kernel * wx).sum())
                mu_y = float((kernel * wy).sum())
                var_x = float((kernel * wx * wx).sum()) - mu_x**2
                var_y = float((kernel * wy * wy).sum()) - mu_y**2
                cov = float((kernel * wx * wy).sum()) - mu_x * mu_y
                num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
                den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
                values.append(num / den)
    return float(np.mean(values))


def dft2_reference(image: np.ndarray) -> np.ndarray:
    """Direct O(N^4) 2D DFT of one channel, unnormalized forward convention."""
    h, w = image.shape
    out = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            acc = 0.0 + 0.0j
            for x in range(h):
                for y in range(w):
                    acc += image[x, y] * np.exp(-2j * math.pi * (u * x / h + v * y / w))
            out[u, v] = acc
    return out


def idft2_reference(spectrum: np.ndarray) -> np.ndarray:
    """Direct normalized inverse of dft2_reference."""
    h, w = spectrum.shape
    out = np.zeros((h, w), dtype=complex)
    for x in range(h):
        for y in range(w):
            acc = 0.0 + 0.0j
            for u in range(h):
                for v in range(w):
                    acc += spectrum[u, v] * np.exp(2j * math.pi * (u * x / h + v * y / w))
            out[x, y] = acc / (h * w)
    return out


def mmd_reference(fa: np.ndarray, fb: np.ndarray) -> float:
    """Unbiased polynomial-kernel MMD^2 as a literal double loop."""
    d = fa.shape[1]

    def k(u, v):
        return (float(np.dot(u, v)) / d + 1.0) ** 3

    m, n = len(fa), len(fb)
    term_a = sum(k(fa[i], fa[j]) for i in range(m) for j in range(m) if i != j)
    term_b = sum(k(fb[i], fb[j]) for i in range(n) for j in range(n) if i != j)
    cross = sum(k(fa[i], fb[j]) for i in range(m) for j in range(n))
    return term_a / (m * (m - 1)) + term_b / (n * (n - 1)) - 2.0 * cross / (m * n)


def scalar_error_recurrence(alpha: np.ndarray, alpha_bar: np.ndarray, e_start: float) -> list[float]:
    """Closed-form per-step denoising error for the point-mass toy model.

    Walking t from T-1 down to 0, one deterministic reverse step contracts the
    error by sqrt(alpha_t) * (1 - abar_{t-1}) / (1 - abar_t), with abar_{-1} = 1.
    Returns the error value after each step.
    """
    e = e_start
    errors = []
    for t in range(len(alpha) - 1, -1, -1):
        ab_prev = alpha_bar[t - 1] if t >= 1 else 1.0
        e = e * math.sqrt(alpha[t]) * (1.0 - ab_prev) / (1.0 - alpha_bar[t])
        errors.append(e)
    return errors
