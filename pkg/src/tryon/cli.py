"""Command-line surface: run, eval, ablate, refine, schedule-dump.

Exit codes: 0 success, 1 usage or manifest-schema error, 2 runtime failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import DomainError, ManifestError, TryOnError
from .evaluate import (
    ABLATION_SLUGS,
    parse_backend_spec,
    run_ablation,
    run_eval,
    write_report,
)
from .grid import load_image, load_mask, save_image
from .guidance import GuidanceConfig
from .manifest import load_manifest
from .pipeline import PipelineConfig, TryOnJob, undress_redress
from .refiner import make_highpass_mask, refine
from .schedule import make_linear_schedule


def _config_options(fn):
    decorators = [
        click.option("--omega", type=float, default=2.5, show_default=True,
                     help="Base guidance scale."),
        click.option("--cfg", "cfg_mode", type=click.Choice(["static", "dynamic"]),
                     default="dynamic", show_default=True,
                     help="Guidance scale scheduling."),
        click.option("--steps", type=click.IntRange(min=2), default=30, show_default=True,
                     help="Diffusion timesteps T."),
        click.option("--stage2-strength", type=click.FloatRange(min=0.0, max=1.0, min_open=True),
                     default=1.0, show_default=True,
                     help="Fraction of T at which stage two re-noises the intermediate."),
        click.option("--sr-cutoff", type=click.FloatRange(0.0, 1.0), default=0.25,
                     show_default=True, help="Normalized radius of the high-pass band."),
        click.option("--no-ur", is_flag=True, help="Single-stage baseline (skip the undress stage)."),
        click.option("--no-dcfg", is_flag=True, help="Hold the guidance scale fixed."),
        click.option("--no-sr", is_flag=True, help="Skip structural refinement."),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


def _backend_option(fn):
    return click.option(
        "--backend", "backend_text", default="toy", show_default=True,
        envvar="TRYON_BACKEND",
        help="toy, identity, or remote:host:port (env TRYON_BACKEND).",
    )(fn)


def _build_config(omega, cfg_mode, steps, stage2_strength, sr_cutoff,
                  no_ur, no_dcfg, no_sr) -> PipelineConfig:
    try:
        enable_dcfg = cfg_mode == "dynamic" and not no_dcfg
        guidance = GuidanceConfig(
            omega=omega, mode="dynamic" if enable_dcfg else "static", T=steps
        )
        return PipelineConfig(
            schedule=make_linear_schedule(steps),
            guidance=guidance,
            stage2_strength=stage2_strength,
            enable_ur=not no_ur,
            enable_dcfg=enable_dcfg,
            enable_sr=not no_sr,
            sr_cutoff=sr_cutoff,
        )
    except DomainError as exc:
        raise click.UsageError(str(exc)) from exc


@click.group()
def cli() -> None:
    """Two-stage guided-diffusion garment swap engine and evaluation harness."""


@cli.command("run")
@click.option("--person", required=True, type=click.Path(path_type=Path))
@click.option("--undergarment", required=True, type=click.Path(path_type=Path),
              help="Stage-one reference image.")
@click.option("--garment", required=True, type=click.Path(path_type=Path),
              help="Target garment reference image.")
@click.option("--mask", "mask_path", required=True, type=click.Path(path_type=Path))
@click.option("--densepose", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@_backend_option
@_config_options
def run_cmd(person, undergarment, garment, mask_path, densepose, seed, out,
            backend_text, **config_flags) -> None:
    """Run one try-on job and write the output PNG."""
    config = _build_config(**config_flags)
    try:
        backend_spec = parse_backend_spec(backend_text)
    except DomainError as exc:
        raise click.UsageError(str(exc)) from exc
    from .evaluate import _make_backend  # single construction point for backends

    job = TryOnJob(
        person=load_image(person),
        undergarment_ref=load_image(undergarment),
        target_garment_ref=load_image(garment),
        mask=load_mask(mask_path),
        densepose=load_image(densepose),
        seed=seed,
        config=config,
    )
    if backend_spec.kind == "identity":
        raise click.UsageError("identity backend is only meaningful under `tryon eval`")
    backend = _make_backend(backend_spec, config, None)
    result = undress_redress(job, backend)
    save_image(result, out)
    click.echo(f"wrote {out}")


@cli.command("eval")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--mode", type=click.Choice(["paired", "unpaired"]), required=True)
@click.option("--out", required=True, type=click.Path(path_type=Path),
              help="Report JSON path.")
@click.option("--outdir", type=click.Path(path_type=Path), default=Path("gen"),
              show_default=True, help="Directory for generated images.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True)
@_backend_option
@_config_options
def eval_cmd(manifest_path, mode, out, outdir, seed, jobs, backend_text,
             **config_flags) -> None:
    """Evaluate a manifest and write one report."""
    config = _build_config(**config_flags)
    try:
        backend_spec = parse_backend_spec(backend_text)
    except DomainError as exc:
        raise click.UsageError(str(exc)) from exc
    records = load_manifest(manifest_path)
    report = run_eval(records, config, backend_spec, mode, seed, outdir, jobs=jobs)
    write_report(report, out)
    click.echo(f"wrote {out} ({len(records)} records, mode={mode})")


@cli.command("ablate")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path),
              help="Directory for the five reports (and gen/ image subdirs).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True)
@_backend_option
@_config_options
def ablate_cmd(manifest_path, out_dir, seed, jobs, backend_text, **config_flags) -> None:
    """Run the five-row toggle matrix and write one labeled report per row."""
    config = _build_config(**config_flags)
    try:
        backend_spec = parse_backend_spec(backend_text)
    except DomainError as exc:
        raise click.UsageError(str(exc)) from exc
    records = load_manifest(manifest_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = run_ablation(records, config, backend_spec, seed, out_dir / "gen", jobs=jobs)
    for report in reports:
        path = out_dir / f"{ABLATION_SLUGS[report.label]}.json"
        write_report(report, path)
        click.echo(f"{report.label}: wrote {path}")


@cli.command("refine")
@click.option("--source", required=True, type=click.Path(path_type=Path),
              help="Image supplying high-frequency structure.")
@click.option("--generated", required=True, type=click.Path(path_type=Path),
              help="Image to refine.")
@click.option("--cutoff", type=click.FloatRange(0.0, 1.0), default=0.25, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
def refine_cmd(source, generated, cutoff, out) -> None:
    """Standalone frequency-domain refinement of one image pair."""
    src = load_image(source)
    gen = load_image(generated)
    band = make_highpass_mask(gen.height, gen.width, cutoff)
    save_image(refine(src, gen, band), out)
    click.echo(f"wrote {out}")


@cli.command("schedule-dump")
@click.option("--steps", type=click.IntRange(min=2), default=30, show_default=True)
@click.option("--beta-min", type=float, default=1e-4, show_default=True)
@click.option("--beta-max", type=float, default=0.02, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
def schedule_dump_cmd(steps, beta_min, beta_max, out) -> None:
    """Write a schedule's coefficient arrays as JSON for inspection."""
    try:
        sched = make_linear_schedule(steps, beta_min, beta_max)
    except DomainError as exc:
        raise click.UsageError(str(exc)) from exc
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(sched.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(f"wrote {out}")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except ManifestError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except TryOnError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
