import dataclasses

import numpy as np
import pytest

from tryon.backend import DenoiserResponse, ToyBackend, ToyModelSpec
from tryon.errors import DivergenceError, DomainError, ShapeError
from tryon.grid import Grid2D, Mask, constant_grid
from tryon.guidance import GuidanceConfig
from tryon.pipeline import PipelineConfig, TryOnJob, run_stage, undress_redress
from tryon.refiner import make_highpass_mask, refine
from tryon.schedule import make_linear_schedule


def zero_sigma(sched):
    return dataclasses.replace(sched, sigma=np.zeros(sched.T))


def make_config(sched, **kwargs):
    defaults = dict(
        schedule=sched,
        guidance=GuidanceConfig(omega=2.5, mode="dynamic", T=sched.T),
        enable_ur=True,
        enable_dcfg=True,
        enable_sr=True,
    )
    defaults.update(kwargs)
    return PipelineConfig(**defaults)


def make_job(scene, config, seed=11):
    return TryOnJob(
        person=scene["person"],
        undergarment_ref=scene["undergarment"],
        target_garment_ref=scene["garment"],
        mask=scene["mask"],
        densepose=scene["densepose"],
        seed=seed,
        config=config,
    )


class TestRunStage:
    def test_empty_mask_returns_input_bit_exact(self, small_scene, sched30):
        cfg = make_config(sched30)
        backend = ToyBackend(spec=ToyModelSpec(), schedule=sched30)
        empty = Mask(np.zeros((8, 8), np.uint8))
        rng = np.random.default_rng(3)
        result = run_stage(
            small_scene["person"], small_scene["garment"], empty,
            small_scene["densepose"], cfg, backend, rng,
        )
        assert np.array_equal(result.image.values, small_scene["person"].values)

    def test_toy_target_reached_in_mask(self, small_scene, sched30):
        sched = zero_sigma(sched30)
        cfg = make_config(
            sched,
            guidance=GuidanceConfig(omega=1.0, mode="static", T=30),
            enable_dcfg=False,
        )
        backend = ToyBackend(spec=ToyModelSpec("constant", 0.2), schedule=sched)
        result = run_stage(
            small_scene["person"], small_scene["garment"], small_scene["mask"],
            small_scene["densepose"], cfg, backend, np.random.default_rng(5),
        )
        inside = result.image.values[small_scene["mask"].selector()]
        assert np.abs(inside - 0.2).max() < 0.05

    def test_dcfg_audit_trail(self, small_scene, sched30):
        cfg = make_config(sched30)
        backend = ToyBackend(spec=ToyModelSpec(), schedule=sched30)
        result = run_stage(
            small_scene["person"], small_scene["garment"], small_scene["mask"],
            small_scene["densepose"], cfg, backend, np.random.default_rng(0),
        )
        scales = result.per_step_scales
        assert len(scales) == 30
        assert scales[0] == 1.5 and scales[29] == 3.5
        assert all(b > a for a, b in zip(scales, scales[1:]))
        assert abs(sum(scales) / len(scales) - 2.5) < 1e-12

    def test_static_mode_records_constant_omega(self, small_scene, sched30):
        cfg = make_config(sched30, enable_dcfg=False)
        backend = ToyBackend(spec=ToyModelSpec(), schedule=sched30)
        result = run_stage(
            small_scene["person"], small_scene["garment"], small_scene["mask"],
            small_scene["densepose"], cfg, backend, np.random.default_rng(0),
        )
        assert result.per_step_scales == (2.5,) * 30

    def test_renoise_start_runs_partial_chain(self, small_scene, sched30):
        cfg = make_config(sched30, stage2_strength=0.5, enable_dcfg=False)
        backend = ToyBackend(spec=ToyModelSpec(), schedule=sched30)
        result = run_stage(
            small_scene["person"], small_scene["garment"], small_scene["mask"],
            small_scene["densepose"], cfg, backend, np.random.default_rng(0),
            start="renoise",
        )
        assert len(result.per_step_scales) == round(0.5 * 30)

    def test_divergent_backend_names_the_step(self, small_scene, sched30):
        class ExplodingBackend:
            def denoise(self, req):
                return DenoiserResponse(
                    eps_cond=constant_grid(8, 8, 3, 1e308),
                    eps_uncond=constant_grid(8, 8, 3, -1e308),
                )

        cfg = make_config(sched30, enable_dcfg=False)
        with pytest.raises(DivergenceError, match="timestep 29"):
            run_stage(
                small_scene["person"], small_scene["garment"], small_scene["mask"],
                small_scene["densepose"], cfg, ExplodingBackend(),
                np.random.default_rng(0),
            )


class TestUndressRedress:
    def test_same_seed_is_bit_identical(self, small_scene, sched30):
        cfg = make_config(sched30)
        job = make_job(small_scene, cfg)
        backend = ToyBackend(spec=ToyModelSpec(), schedule=sched30)
        a = undress_redress(job, backend)
        b = undress_redress(job, backend)
        assert np.array_equal(a.values, b.values)

    def test_output_is_clamped_image(self, small_scene, sched30):
        cfg = make_config(sched30)
        job = make_job(small_scene, cfg)
        out = undress_redress(job, ToyBackend(spec=ToyModelSpec(), schedule=sched30))
        assert out.is_image_kind()

    def test_out_of_mask_pixels_preserved_without_sr(self, small_scene, sched30):
        cfg = make_config(sched30, enable_sr=False)
        job = make_job(small_scene, cfg)
        out = undress_redress(job, ToyBackend(spec=ToyModelSpec(), schedule=sched30))
        keep = ~small_scene["mask"].selector()
        assert np.array_equal(out.values[keep], small_scene["person"].values[keep])

    def test_all_toggles_off_equals_direct_single_stage(self, small_scene, sched30):
        cfg = make_config(
            sched30,
            guidance=GuidanceConfig(omega=2.5, mode="static", T=30),
            enable_ur=False, enable_dcfg=False, enable_sr=False,
        )
        job = make_job(small_scene, cfg, seed=21)
        backend = ToyBackend(spec=ToyModelSpec(), schedule=sched30)
        via_pipeline = undress_redress(job, backend)

        rng = np.random.default_rng(21)
        direct = run_stage(
            small_scene["person"], small_scene["garment"], small_scene["mask"],
            small_scene["densepose"], cfg, backend, rng, start="noise",
        )
        want = np.clip(direct.image.values, 0.0, 1.0)
        assert np.array_equal(via_pipeline.values, want)

    def test_two_stage_visits_both_targets(self, small_scene, sched30):
        """Stage one lands near the undergarment color, stage two near the garment's."""
        sched = zero_sigma(sched30)
        cfg = make_config(
            sched,
            guidance=GuidanceConfig(omega=1.0, mode="static", T=30),
            enable_dcfg=False, enable_sr=False,
        )
        backend = ToyBackend(spec=ToyModelSpec(), schedule=sched)
        rng = np.random.default_rng(2)
        mask_sel = small_scene["mask"].selector()

        stage1 = run_stage(
            small_scene["person"], small_scene["undergarment"], small_scene["mask"],
            small_scene["densepose"], cfg, backend, rng, start="noise",
        )
        mu1 = small_scene["undergarment"].values[mask_sel].mean(axis=0)
        assert np.abs(stage1.image.values[mask_sel] - mu1).max() < 0.05

        stage2 = run_stage(
            stage1.image, small_scene["garment"], small_scene["mask"],
            small_scene["densepose"], cfg, backend, rng, start="renoise",
        )
        mu2 = small_scene["garment"].values[mask_sel].mean(axis=0)
        assert np.abs(stage2.image.values[mask_sel] - mu2).max() < 0.05

    def test_ur_off_and_on_differ(self, small_scene, sched30):
        base = make_config(sched30, enable_dcfg=False, enable_sr=False)
        backend = ToyBackend(spec=ToyModelSpec(), schedule=sched30)
        with_ur = undress_redress(make_job(small_scene, base, seed=9), backend)
        without = undress_redress(
            make_job(small_scene, dataclasses.replace(base, enable_ur=False), seed=9),
            backend,
        )
        assert not np.array_equal(with_ur.values, without.values)

    def test_sr_applies_refiner_to_person_structure(self, small_scene, sched30):
        cfg_sr = make_config(sched30, sr_cutoff=0.3)
        cfg_plain = dataclasses.replace(cfg_sr, enable_sr=False)
        backend = ToyBackend(spec=ToyModelSpec(), schedule=sched30)
        refined = undress_redress(make_job(small_scene, cfg_sr, seed=4), backend)
        plain = undress_redress(make_job(small_scene, cfg_plain, seed=4), backend)
        band = make_highpass_mask(8, 8, 0.3)
        want = refine(small_scene["person"], plain, band, clamp=False)
        assert np.array_equal(refined.values, np.clip(want.values, 0.0, 1.0))


class TestConfigValidation:
    def test_stage2_strength_must_reach_a_step(self, sched30):
        with pytest.raises(DomainError):
            make_config(sched30, stage2_strength=0.01)

    def test_stage2_strength_range(self, sched30):
        with pytest.raises(DomainError):
            make_config(sched30, stage2_strength=0.0)
        with pytest.raises(DomainError):
            make_config(sched30, stage2_strength=1.5)

    def test_sr_cutoff_range(self, sched30):
        with pytest.raises(DomainError):
            make_config(sched30, sr_cutoff=1.2)

    def test_job_requires_matching_rasters(self, small_scene, sched30):
        cfg = make_config(sched30)
        with pytest.raises(ShapeError):
            TryOnJob(
                person=small_scene["person"],
                undergarment_ref=constant_grid(4, 4, 3, 0.5),
                target_garment_ref=small_scene["garment"],
                mask=small_scene["mask"],
                densepose=small_scene["densepose"],
                seed=0,
                config=cfg,
            )

    def test_seed_must_be_u64(self, small_scene, sched30):
        cfg = make_config(sched30)
        with pytest.raises(DomainError):
            make_job(small_scene, cfg, seed=-1)
