"""Image-quality metrics: SSIM, Fréchet distance, kernel distance.

The two distribution distances run over a pluggable feature extractor; the
bundled toy extractor (box-downsample + seeded random projection) keeps the
whole metric path testable without any pretrained network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError, NumericError, RangeError, ShapeError
from .grid import Grid2D

EIGEN_CLIP = -1e-6  # eigenvalues in (EIGEN_CLIP, 0) are rounding noise


@dataclass(frozen=True)
class SsimParams:
    """Canonical SSIM parameters: 11x11 Gaussian window, sigma 1.5."""

    window_size: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self) -> None:
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise DomainError(f"window_size must be odd and >= 3, got {self.window_size}")
        if self.window_sigma <= 0.0:
            raise DomainError("window_sigma must be positive")
        if self.k1 <= 0.0 or self.k2 <= 0.0:
            raise DomainError("k1 and k2 must be positive")
        if self.dynamic_range <= 0.0:
            raise DomainError("dynamic_range must be positive")


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """1D Gaussian taps normalized to sum 1."""
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    return g / g.sum()


def _local_weighted(a: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable Gaussian-weighted sums over all valid window positions."""
    v = sliding_window_view(a, taps.size, axis=0) @ taps
    return sliding_window_view(v, taps.size, axis=1) @ taps


def ssim(x: Grid2D, y: Grid2D, params: SsimParams = SsimParams()) -> float:
    """Mean SSIM over valid sliding windows and channels.

    Gaussian-weighted local moments; constants C1 = (k1*L)^2, C2 = (k2*L)^2.
    """
    if x.shape != y.shape:
        raise ShapeError(f"images disagree: {x.shape} vs {y.shape}")
    if not (x.is_image_kind() and y.is_image_kind()):
        raise RangeError("ssim expects image-kind grids with values in [0, 1]")
    if x.height < params.window_size or x.width < params.window_size:
        raise DomainError(
            f"image {x.height}x{x.width} smaller than window {params.window_size}"
        )
    taps = gaussian_window(params.window_size, params.window_sigma)
    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2
    maps = []
    for c in range(x.channels):
        xc = x.values[:, :, c]
        yc = y.values[:, :, c]
        mu_x = _local_weighted(xc, taps)
        mu_y = _local_weighted(yc, taps)
        var_x = _local_weighted(xc * xc, taps) - mu_x * mu_x
        var_y = _local_weighted(yc * yc, taps) - mu_y * mu_y
        cov_xy = _local_weighted(xc * yc, taps) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        maps.append(num / den)
    return float(np.mean(np.stack(maps)))


class FeatureExtractor(Protocol):
    """Deterministic map from an image grid to a fixed-length feature vector."""

    output_dim: int

    def extract(self, image: Grid2D) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class FeatureStats:
    """Sample mean and unbiased covariance of a feature set."""

    mean: np.ndarray
    covariance: np.ndarray
    count: int

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64).copy()
        cov = np.asarray(self.covariance, dtype=np.float64).copy()
        if mean.ndim != 1:
            raise ShapeError("mean must be a vector")
        if cov.shape != (mean.size, mean.size):
            raise ShapeError(f"covariance must be {mean.size}x{mean.size}, got {cov.shape}")
        if self.count < 1:
            raise DomainError("count must be positive")
        if np.abs(cov - cov.T).max() > 1e-9:
            raise NumericError("covariance is not symmetric within 1e-9")
        if np.linalg.eigvalsh((cov + cov.T) / 2.0).min() < -1e-9:
            raise NumericError("covariance has eigenvalues below -1e-9")
        for name, arr in (("mean", mean), ("covariance", cov)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.mean.size


def gather_stats(images: Sequence[Grid2D], extractor: FeatureExtractor) -> FeatureStats:
    """Extract features and summarize them as Gaussian statistics."""
    feats = extract_features(images, extractor)
    if feats.shape[0] < 2:
        raise DomainError(f"need at least 2 images, got {feats.shape[0]}")
    mean = feats.mean(axis=0)
    cov = np.atleast_2d(np.cov(feats, rowvar=False, ddof=1))
    return FeatureStats(mean=mean, covariance=cov, count=feats.shape[0])


def extract_features(images: Sequence[Grid2D], extractor: FeatureExtractor) -> np.ndarray:
    if len(images) == 0:
        raise DomainError("no images given")
    return np.stack([np.asarray(extractor.extract(im), dtype=np.float64) for im in images])


def _psd_eigvals(matrix: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh((matrix + matrix.T) / 2.0)
    if vals.min() < EIGEN_CLIP:
        raise NumericError(f"{what} has eigenvalue {vals.min():.3e} below {EIGEN_CLIP}")
    return np.clip(vals, 0.0, None), vecs


def frechet_distance(a: FeatureStats, b: FeatureStats) -> float:
    """||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}).

    The cross term is computed as Tr((sqrt(Sa) Sb sqrt(Sa))^{1/2}) via
    symmetric eigendecompositions: congruence by sqrt(Sa) symmetrizes the
    product without changing the trace, which keeps the square root real for
    any pair of PSD inputs (the plain product Sa @ Sb can have a strongly
    indefinite symmetric part even for exact PSD operands).
    """
    if a.dim != b.dim:
        raise ShapeError(f"feature dims disagree: {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    vals_a, vecs_a = _psd_eigvals(a.covariance, "covariance")
    sqrt_a = (vecs_a * np.sqrt(vals_a)) @ vecs_a.T
    inner = sqrt_a @ b.covariance @ sqrt_a
    vals_inner, _ = _psd_eigvals(inner, "covariance product")
    cross = np.sqrt(vals_inner).sum()
    value = float(diff @ diff + np.trace(a.covariance) + np.trace(b.covariance) - 2.0 * cross)
    return max(value, 0.0)


def _as_feature_matrix(feats: Sequence[np.ndarray] | np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(feats, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be a sequence of equal-length vectors")
    if arr.shape[0] < 2:
        raise DomainError(f"{name} needs at least 2 vectors, got {arr.shape[0]}")
    return arr


def kid(fa: Sequence[np.ndarray], fb: Sequence[np.ndarray]) -> float:
    """Unbiased squared MMD with kernel (x.y/d + 1)^3, diagonals excluded."""
    a = _as_feature_matrix(fa, "fa")
    b = _as_feature_matrix(fb, "fb")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature dims disagree: {a.shape[1]} vs {b.shape[1]}")
    d = a.shape[1]
    m, n = a.shape[0], b.shape[0]
    kaa = (a @ a.T / d + 1.0) ** 3
    kbb = (b @ b.T / d + 1.0) ** 3
    kab = (a @ b.T / d + 1.0) ** 3
    term_a = (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
    term_b = (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
    return float(term_a + term_b - 2.0 * kab.mean())


def kid_score(
    fa: Sequence[np.ndarray],
    fb: Sequence[np.ndarray],
    subset_size: int = 100,
    n_subsets: int = 10,
    seed: int = 0,
) -> float:
    """Reporting convention: mean over random subsets once sets exceed 100.

    Below that the single full-set estimate is returned, so desk-scale runs
    are exactly the raw unbiased estimator.
    """
    a = _as_feature_matrix(fa, "fa")
    b = _as_feature_matrix(fb, "fb")
    if min(a.shape[0], b.shape[0]) <= subset_size:
        return kid(a, b)
    rng = np.random.default_rng(seed)
    estimates = []
    for _ in range(n_subsets):
        ia = rng.choice(a.shape[0], size=subset_size, replace=False)
        ib = rng.choice(b.shape[0], size=subset_size, replace=False)
        estimates.append(kid(a[ia], b[ib]))
    return float(np.mean(estimates))


class ToyExtractor:
    """16x16 box-average to gray, then a fixed seeded random projection."""

    kind = "toy"
    _GRID = 16

    def __init__(self, seed: int, output_dim: int):
        if output_dim < 2:
            raise DomainError(f"output_dim must be >= 2, got {output_dim}")
        self.seed = seed
        self.output_dim = output_dim
        rng = np.random.default_rng(seed)
        proj = rng.standard_normal((output_dim, self._GRID * self._GRID))
        proj /= math.sqrt(self._GRID * self._GRID)
        proj.setflags(write=False)
        self._projection = proj

    def _downsample(self, image: Grid2D) -> np.ndarray:
        gray = image.values.mean(axis=2)
        h, w = gray.shape
        rows = (np.arange(self._GRID + 1) * h) // self._GRID
        cols = (np.arange(self._GRID + 1) * w) // self._GRID
        out = np.empty((self._GRID, self._GRID))
        for i in range(self._GRID):
            r0, r1 = rows[i], max(rows[i + 1], rows[i] + 1)
            for j in range(self._GRID):
                c0, c1 = cols[j], max(cols[j + 1], cols[j] + 1)
                out[i, j] = gray[r0:r1, c0:c1].mean()
        return out

    def extract(self, image: Grid2D) -> np.ndarray:
        return self._projection @ self._downsample(image).ravel()

    def describe(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "dim": self.output_dim}


def toy_extractor(seed: int, output_dim: int = 16) -> ToyExtractor:
    return ToyExtractor(seed, output_dim)
