"""Two-stage guided-diffusion garment swap with a desk-scale evaluation harness."""

from .backend import (
    DenoiserRequest,
    DenoiserResponse,
    TargetImageBackend,
    ToyBackend,
    ToyModelSpec,
    toy_denoise,
)
from .evaluate import BackendSpec, EvalReport, parse_backend_spec, run_ablation, run_eval
from .grid import ConditionSet, Grid2D, Mask, composite, load_image, load_mask, save_image
from .guidance import GuidanceConfig, combine_cfg, dcfg_scale, split_chunk
from .manifest import TripletRecord, load_manifest
from .metrics import SsimParams, frechet_distance, gather_stats, kid, ssim, toy_extractor
from .pipeline import PipelineConfig, StageResult, TryOnJob, run_stage, undress_redress
from .refiner import fft2, ifft2, make_highpass_mask, refine, split_amp_phase
from .schedule import NoiseSchedule, ddpm_step, forward_diffuse, make_linear_schedule
from .wire import RemoteBackend, WireServer, remote_denoise, toy_wire_handler

__version__ = "0.1.0"

__all__ = [
    "BackendSpec",
    "ConditionSet",
    "DenoiserRequest",
    "DenoiserResponse",
    "EvalReport",
    "Grid2D",
    "GuidanceConfig",
    "Mask",
    "NoiseSchedule",
    "PipelineConfig",
    "RemoteBackend",
    "SsimParams",
    "StageResult",
    "TargetImageBackend",
    "ToyBackend",
    "ToyModelSpec",
    "TripletRecord",
    "TryOnJob",
    "WireServer",
    "combine_cfg",
    "composite",
    "dcfg_scale",
    "ddpm_step",
    "fft2",
    "forward_diffuse",
    "frechet_distance",
    "gather_stats",
    "ifft2",
    "kid",
    "load_image",
    "load_manifest",
    "load_mask",
    "make_highpass_mask",
    "make_linear_schedule",
    "parse_backend_spec",
    "refine",
    "remote_denoise",
    "run_ablation",
    "run_eval",
    "run_stage",
    "save_image",
    "split_amp_phase",
    "split_chunk",
    "ssim",
    "toy_denoise",
    "toy_extractor",
    "toy_wire_handler",
    "undress_redress",
]
