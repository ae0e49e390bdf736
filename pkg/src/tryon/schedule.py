"""Diffusion noise schedules, forward noising, and the reverse DDPM update.

Timesteps are indexed 0..T-1 with t=0 the least-noisy step; sampling walks t
downward. sigma[t] is the posterior standard deviation
sqrt(((1 - abar_{t-1}) / (1 - abar_t)) * beta_t) with sigma[0] = 0, which
keeps the final update deterministic.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, RangeError, ShapeError
from .grid import Grid2D


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Per-timestep diffusion coefficients (beta, alpha, alpha_bar, sigma).

    Immutable after construction; safe to share between jobs and threads.
    alpha_bar must be the exact running product of alpha so that reverse-step
    identities hold bit-for-bit.
    """

    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        arrays = {}
        for name in ("beta", "alpha", "alpha_bar", "sigma"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.setflags(write=False)
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        beta, alpha, alpha_bar, sigma = (
            arrays["beta"], arrays["alpha"], arrays["alpha_bar"], arrays["sigma"],
        )
        T = beta.size
        if T < 1:
            raise DomainError("schedule needs at least one timestep")
        for name, arr in arrays.items():
            if arr.ndim != 1 or arr.size != T:
                raise ShapeError(f"{name} must be a length-{T} vector")
            if not np.all(np.isfinite(arr)):
                raise RangeError(f"{name} must be finite")
        if not np.all((beta > 0.0) & (beta < 1.0)):
            raise DomainError("beta values must lie in (0, 1)")
        if not np.array_equal(alpha, 1.0 - beta):
            raise DomainError("alpha must equal 1 - beta exactly")
        if alpha_bar[0] != alpha[0] or not np.array_equal(
            alpha_bar[1:], alpha_bar[:-1] * alpha[1:]
        ):
            raise DomainError("alpha_bar must be the exact running product of alpha")
        if T > 1 and not np.all(np.diff(alpha_bar) < 0.0):
            raise DomainError("alpha_bar must be strictly decreasing")
        if not np.all(sigma >= 0.0):
            raise DomainError("sigma values must be nonnegative")
        if sigma[0] != 0.0:
            raise DomainError("sigma[0] must be 0 (final step is deterministic)")

    @property
    def T(self) -> int:
        return self.beta.size

    @cached_property
    def schedule_id(self) -> str:
        """Stable token identifying these coefficients across processes."""
        digest = hashlib.sha256(self.beta.tobytes() + self.sigma.tobytes())
        return f"ns-{self.T}-{digest.hexdigest()[:12]}"

    def to_json(self) -> dict:
        return {
            "T": self.T,
            "beta": self.beta.tolist(),
            "alpha": self.alpha.tolist(),
            "alpha_bar": self.alpha_bar.tolist(),
            "sigma": self.sigma.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "NoiseSchedule":
        sched = cls(
            beta=np.asarray(doc["beta"], dtype=np.float64),
            alpha=np.asarray(doc["alpha"], dtype=np.float64),
            alpha_bar=np.asarray(doc["alpha_bar"], dtype=np.float64),
            sigma=np.asarray(doc["sigma"], dtype=np.float64),
        )
        if doc.get("T") not in (None, sched.T):
            raise DomainError(f"declared T={doc['T']} but arrays have length {sched.T}")
        return sched


def make_linear_schedule(
    T: int, beta_min: float = 1e-4, beta_max: float = 0.02
) -> NoiseSchedule:
    """Linear beta ramp over T native steps with posterior sigma.

    np.linspace pins both endpoints, so beta[0] == beta_min and
    beta[T-1] == beta_max exactly.
    """
    if T < 2:
        raise DomainError(f"T must be >= 2, got {T}")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise DomainError(f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}")
    beta = np.linspace(beta_min, beta_max, T)
    alpha = 1.0 - beta
    # Explicit running product so alpha_bar[t] == alpha_bar[t-1] * alpha[t]
    # holds bit-exactly regardless of how numpy vectorizes cumprod.
    alpha_bar = np.empty(T)
    acc = 1.0
    for t in range(T):
        acc = acc * alpha[t]
        alpha_bar[t] = acc
    sigma = np.zeros(T)
    sigma[1:] = np.sqrt((1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * beta[1:])
    return NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=alpha_bar, sigma=sigma)


def _check_step(t: int, sched: NoiseSchedule) -> None:
    if not 0 <= t < sched.T:
        raise DomainError(f"timestep {t} outside [0, {sched.T})")


def forward_diffuse(z0: Grid2D, t: int, sched: NoiseSchedule, noise: Grid2D) -> Grid2D:
    """Noising map: sqrt(abar_t) * z0 + sqrt(1 - abar_t) * noise."""
    _check_step(t, sched)
    if z0.shape != noise.shape:
        raise ShapeError(f"noise {noise.shape} must match z0 {z0.shape}")
    ab = sched.alpha_bar[t]
    return Grid2D(np.sqrt(ab) * z0.values + np.sqrt(1.0 - ab) * noise.values)


def ddpm_step(
    z_t: Grid2D, eps: Grid2D, t: int, sched: NoiseSchedule, noise: Grid2D
) -> Grid2D:
    """One reverse update z_t -> z_{t-1}.

    (z_t - ((1 - alpha_t) / sqrt(1 - abar_t)) * eps) / sqrt(alpha_t)
    + sigma_t * noise; the noise term vanishes at t=0 because sigma[0] = 0.
    """
    _check_step(t, sched)
    if eps.shape != z_t.shape or noise.shape != z_t.shape:
        raise ShapeError(
            f"eps {eps.shape} and noise {noise.shape} must match z_t {z_t.shape}"
        )
    a = sched.alpha[t]
    ab = sched.alpha_bar[t]
    coef = (1.0 - a) / np.sqrt(1.0 - ab)
    mean = (z_t.values - coef * eps.values) / np.sqrt(a)
    return Grid2D(mean + sched.sigma[t] * noise.values)
