"""Classifier-free guidance: prediction combination and scale scheduling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .grid import Grid2D

GUIDANCE_MODES = ("static", "dynamic")


@dataclass(frozen=True)
class GuidanceConfig:
    """Base scale, scheduling mode, and iteration count for one sampling run."""

    omega: float = 2.5
    mode: str = "dynamic"
    T: int = 30

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega) and self.omega >= 0.0):
            raise DomainError(f"omega must be a finite real >= 0, got {self.omega}")
        if self.mode not in GUIDANCE_MODES:
            raise DomainError(f"mode must be one of {GUIDANCE_MODES}, got {self.mode!r}")
        if self.T < 1:
            raise DomainError(f"T must be positive, got {self.T}")
        if self.mode == "dynamic" and self.T < 2:
            raise DomainError("dynamic mode needs T >= 2")


def combine_cfg(eps_uncond: Grid2D, eps_cond: Grid2D, omega: float) -> Grid2D:
    """eps_uncond + omega * (eps_cond - eps_uncond), elementwise.

    omega=0 and omega=1 return the respective input unchanged so those
    endpoints are exact rather than merely close.
    """
    if eps_uncond.shape != eps_cond.shape:
        raise ShapeError(f"uncond {eps_uncond.shape} vs cond {eps_cond.shape}")
    if omega == 0.0:
        return eps_uncond
    if omega == 1.0:
        return eps_cond
    return Grid2D(eps_uncond.values + omega * (eps_cond.values - eps_uncond.values))


def dcfg_scale(omega: float, i: int, T: int) -> float:
    """Per-iteration guidance scale: omega - cos(pi * i / (T - 1)).

    i counts sampling iterations from 0 at the noisiest step, so the scale
    rises monotonically from omega - 1 to omega + 1: weak guidance early to
    keep diversity, strong guidance late to sharpen the result.
    """
    if T < 2:
        raise DomainError(f"dynamic schedule needs T >= 2, got {T}")
    if not 0 <= i <= T - 1:
        raise DomainError(f"iteration {i} outside [0, {T - 1}]")
    return omega - math.cos(math.pi * i / (T - 1))


def split_chunk(batched: np.ndarray) -> tuple[Grid2D, Grid2D]:
    """Split a stacked batch-of-2 prediction into (eps_cond, eps_uncond).

    Ordering is a fixed contract of the backend protocol: index 0 is the
    conditional prediction, index 1 the unconditional one.
    """
    batched = np.asarray(batched)
    if batched.ndim != 4 or batched.shape[0] != 2:
        raise ShapeError(f"expected a (2, H, W, C) batch, got shape {batched.shape}")
    return Grid2D(batched[0]), Grid2D(batched[1])


def stack_pair(eps_cond: Grid2D, eps_uncond: Grid2D) -> np.ndarray:
    """Inverse of split_chunk; used by backends to form the batch-of-2."""
    if eps_cond.shape != eps_uncond.shape:
        raise ShapeError(f"cond {eps_cond.shape} vs uncond {eps_uncond.shape}")
    return np.stack([eps_cond.values, eps_uncond.values])
