"""Pluggable noise-prediction backends.

Every backend answers one request with both the conditional and the
unconditional prediction (batch-of-2 semantics), so the chunk/split contract
lives here rather than in any particular server. The analytic toy backend
predicts optimally for a point-mass data model, which makes whole sampling
chains verifiable in closed form: for a target mu the optimal prediction is

    eps_hat = (z_t - sqrt(abar_t) * mu) / sqrt(1 - abar_t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ContractError, DomainError
from .grid import ConditionSet, Grid2D
from .guidance import split_chunk, stack_pair
from .schedule import NoiseSchedule

TARGET_RULES = ("mean_garment_color_in_mask", "constant")

# Fixed unconditional target: mid gray, distinct from any interesting
# conditional target so guidance has an observable effect.
UNCOND_TARGET = 0.5


@dataclass(frozen=True, eq=False)
class DenoiserRequest:
    """One denoiser call: latent, conditioning bundle, timestep, schedule token."""

    latent: Grid2D
    condition: ConditionSet
    timestep: int
    schedule_id: str

    def __post_init__(self) -> None:
        if (self.condition.height, self.condition.width) != (
            self.latent.height,
            self.latent.width,
        ):
            raise ContractError(
                f"condition rasters {(self.condition.height, self.condition.width)} "
                f"do not match latent {(self.latent.height, self.latent.width)}"
            )
        if self.timestep < 0:
            raise DomainError(f"timestep must be nonnegative, got {self.timestep}")


@dataclass(frozen=True, eq=False)
class DenoiserResponse:
    """Conditional and unconditional predictions for one request."""

    eps_cond: Grid2D
    eps_uncond: Grid2D

    def __post_init__(self) -> None:
        if self.eps_cond.shape != self.eps_uncond.shape:
            raise ContractError(
                f"cond {self.eps_cond.shape} vs uncond {self.eps_uncond.shape}"
            )


@dataclass(frozen=True)
class ToyModelSpec:
    """How the toy backend derives its conditional target.

    mean_garment_color_in_mask: per-channel mean of the garment reference
    over the masked region (whole-image mean if the mask is empty).
    constant: a single fixed value on every channel.
    """

    target_rule: str = "mean_garment_color_in_mask"
    constant_value: float = 0.5

    def __post_init__(self) -> None:
        if self.target_rule not in TARGET_RULES:
            raise DomainError(f"target_rule must be one of {TARGET_RULES}")
        if not math.isfinite(self.constant_value):
            raise DomainError("constant_value must be finite")


class DenoiserBackend(Protocol):
    def denoise(self, req: DenoiserRequest) -> DenoiserResponse: ...


def _optimal_eps(z: np.ndarray, mu: np.ndarray, alpha_bar_t: float) -> np.ndarray:
    return (z - np.sqrt(alpha_bar_t) * mu) / np.sqrt(1.0 - alpha_bar_t)


def _conditional_target(req: DenoiserRequest, spec: ToyModelSpec) -> np.ndarray:
    """Per-pixel target field: the rule's color inside the mask, 0 outside.

    Outside the edit region the latent is treated as pure noise (mu = 0, so
    the prediction is just the latent rescaled); those pixels are replaced by
    compositing downstream anyway.
    """
    latent = req.latent
    garment = req.condition.garment.values
    inside = req.condition.mask.selector()
    if spec.target_rule == "constant":
        color = np.full(garment.shape[2], spec.constant_value)
    else:
        region = garment[inside] if inside.any() else garment.reshape(-1, garment.shape[2])
        color = region.mean(axis=0)
    if color.size != latent.channels:
        raise ContractError(
            f"garment has {color.size} channels but latent has {latent.channels}"
        )
    mu = np.zeros(latent.shape)
    mu[inside] = color
    return mu


def toy_denoise(
    req: DenoiserRequest, spec: ToyModelSpec, sched: NoiseSchedule
) -> DenoiserResponse:
    """Analytic backend: optimal predictions for point-mass targets.

    Conditional target comes from the spec rule; unconditional target is
    constant mid gray. Pure function of (req, spec, sched).
    """
    if not req.timestep < sched.T:
        raise DomainError(f"timestep {req.timestep} outside schedule of length {sched.T}")
    ab = float(sched.alpha_bar[req.timestep])
    if ab >= 1.0:
        raise DomainError(f"alpha_bar[{req.timestep}] = {ab}; prediction would divide by zero")
    z = req.latent.values
    eps_cond = _optimal_eps(z, _conditional_target(req, spec), ab)
    eps_uncond = _optimal_eps(z, np.full(z.shape, UNCOND_TARGET), ab)
    batch = stack_pair(Grid2D(eps_cond), Grid2D(eps_uncond))
    cond, uncond = split_chunk(batch)
    return DenoiserResponse(eps_cond=cond, eps_uncond=uncond)


@dataclass(frozen=True, eq=False)
class ToyBackend:
    """In-process analytic backend bound to one schedule."""

    spec: ToyModelSpec
    schedule: NoiseSchedule

    def denoise(self, req: DenoiserRequest) -> DenoiserResponse:
        if req.schedule_id != self.schedule.schedule_id:
            raise ContractError(
                f"request schedule {req.schedule_id} does not match "
                f"backend schedule {self.schedule.schedule_id}"
            )
        return toy_denoise(req, self.spec, self.schedule)


@dataclass(frozen=True, eq=False)
class TargetImageBackend:
    """Backend that drives sampling toward one fixed image.

    Both predictions equal the optimal prediction for the target, so guidance
    combination is a no-op at any scale and the chain lands on the target
    exactly (up to rounding) inside the edit region. Used by the harness's
    identity test mode with the ground-truth image as target.
    """

    target: Grid2D
    schedule: NoiseSchedule

    def denoise(self, req: DenoiserRequest) -> DenoiserResponse:
        if req.schedule_id != self.schedule.schedule_id:
            raise ContractError(
                f"request schedule {req.schedule_id} does not match "
                f"backend schedule {self.schedule.schedule_id}"
            )
        if not req.timestep < self.schedule.T:
            raise DomainError(
                f"timestep {req.timestep} outside schedule of length {self.schedule.T}"
            )
        if req.latent.shape != self.target.shape:
            raise ContractError(
                f"latent {req.latent.shape} does not match target {self.target.shape}"
            )
        ab = float(self.schedule.alpha_bar[req.timestep])
        if ab >= 1.0:
            raise DomainError(f"alpha_bar[{req.timestep}] = {ab}")
        eps = Grid2D(_optimal_eps(req.latent.values, self.target.values, ab))
        return DenoiserResponse(eps_cond=eps, eps_uncond=eps)
