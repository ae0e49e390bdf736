"""Two-stage garment-swap orchestration.

Stage one samples the person into a neutral undergarment to expose the torso;
stage two re-noises that intermediate and samples it into the target garment.
Each stage runs a guided reverse-diffusion loop and composites so pixels
outside the edit mask stay bit-identical to its input image. Optional final
step fuses high-frequency structure from the original person image back in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import DenoiserBackend, DenoiserRequest
from .errors import ContractError, DivergenceError, DomainError, RangeError, ShapeError
from .grid import ConditionSet, Grid2D, Mask, composite
from .guidance import GuidanceConfig, combine_cfg, dcfg_scale
from .refiner import make_highpass_mask, refine
from .schedule import NoiseSchedule, ddpm_step, forward_diffuse

STAGE_STARTS = ("noise", "renoise")


@dataclass(frozen=True, eq=False)
class PipelineConfig:
    """Everything a run needs besides its inputs and seed.

    stage2_strength is the fraction of the schedule at which the second stage
    re-noises the intermediate; 1.0 re-noises all the way to t = T-1.
    """

    schedule: NoiseSchedule
    guidance: GuidanceConfig = GuidanceConfig()
    stage2_strength: float = 1.0
    enable_ur: bool = True
    enable_dcfg: bool = True
    enable_sr: bool = True
    sr_cutoff: float = 0.25

    def __post_init__(self) -> None:
        if not 0.0 < self.stage2_strength <= 1.0:
            raise DomainError(f"stage2_strength must lie in (0, 1], got {self.stage2_strength}")
        if round(self.stage2_strength * self.schedule.T) < 1:
            raise DomainError(
                f"stage2_strength {self.stage2_strength} rounds below one timestep "
                f"for T={self.schedule.T}"
            )
        if not 0.0 <= self.sr_cutoff <= 1.0:
            raise DomainError(f"sr_cutoff must lie in [0, 1], got {self.sr_cutoff}")


@dataclass(frozen=True, eq=False)
class StageResult:
    """Stage output plus the guidance scale actually used at each iteration."""

    image: Grid2D
    per_step_scales: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class TryOnJob:
    """A full two-stage request; the seed determines every random draw."""

    person: Grid2D
    undergarment_ref: Grid2D
    target_garment_ref: Grid2D
    mask: Mask
    densepose: Grid2D
    seed: int
    config: PipelineConfig

    def __post_init__(self) -> None:
        dims = {
            (g.height, g.width)
            for g in (self.person, self.undergarment_ref, self.target_garment_ref, self.densepose)
        }
        dims.add((self.mask.height, self.mask.width))
        if len(dims) != 1:
            raise ShapeError(f"job rasters disagree on spatial dims: {sorted(dims)}")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


def run_stage(
    init_image: Grid2D,
    garment: Grid2D,
    mask: Mask,
    densepose: Grid2D,
    cfg: PipelineConfig,
    backend: DenoiserBackend,
    rng: np.random.Generator,
    start: str = "noise",
) -> StageResult:
    """One guided reverse-diffusion stage.

    start="noise" begins from a standard-normal latent at t = T-1;
    start="renoise" forward-diffuses init_image to
    t = round(stage2_strength * T) - 1 first. After the loop the result is
    composited over init_image so out-of-mask pixels match it bit-exactly.
    """
    if start not in STAGE_STARTS:
        raise DomainError(f"start must be one of {STAGE_STARTS}, got {start!r}")
    sched = cfg.schedule
    shape = init_image.shape
    if start == "renoise":
        t_start = int(round(cfg.stage2_strength * sched.T)) - 1
        z = forward_diffuse(init_image, t_start, sched, Grid2D(rng.standard_normal(shape)))
    else:
        t_start = sched.T - 1
        z = Grid2D(rng.standard_normal(shape))
    n_iter = t_start + 1
    condition = ConditionSet(garment=garment, mask=mask, densepose=densepose)
    omega = cfg.guidance.omega
    scales: list[float] = []
    for i, t in enumerate(range(t_start, -1, -1)):
        resp = backend.denoise(
            DenoiserRequest(latent=z, condition=condition, timestep=t,
                            schedule_id=sched.schedule_id)
        )
        if resp.eps_cond.shape != shape:
            raise ContractError(
                f"backend returned shape {resp.eps_cond.shape}, expected {shape}"
            )
        scale = dcfg_scale(omega, i, n_iter) if cfg.enable_dcfg else omega
        step_noise = Grid2D(rng.standard_normal(shape))
        try:
            eps = combine_cfg(resp.eps_uncond, resp.eps_cond, scale)
            z = ddpm_step(z, eps, t, sched, step_noise)
        except RangeError as exc:
            raise DivergenceError(f"non-finite latent at timestep {t}") from exc
        scales.append(scale)
    return StageResult(image=composite(z, init_image, mask), per_step_scales=tuple(scales))


def undress_redress(job: TryOnJob, backend: DenoiserBackend) -> Grid2D:
    """Run the full pipeline for one job and clamp the result to [0, 1].

    With enable_ur off this degenerates to a single stage with the target
    garment (the ablation baseline). The refiner always takes its structure
    from the original person image, not the intermediate.
    """
    cfg = job.config
    rng = np.random.default_rng(job.seed)
    if cfg.enable_ur:
        stage1 = run_stage(
            job.person, job.undergarment_ref, job.mask, job.densepose,
            cfg, backend, rng, start="noise",
        )
        stage2 = run_stage(
            stage1.image, job.target_garment_ref, job.mask, job.densepose,
            cfg, backend, rng, start="renoise",
        )
        out = stage2.image
    else:
        out = run_stage(
            job.person, job.target_garment_ref, job.mask, job.densepose,
            cfg, backend, rng, start="noise",
        ).image
    if cfg.enable_sr:
        band = make_highpass_mask(out.height, out.width, cfg.sr_cutoff)
        out = refine(job.person, out, band, clamp=False)
    return Grid2D(np.clip(out.values, 0.0, 1.0))
