"""Synthetic desk-scale triplets for tests, demos, and harness smoke runs.

Each triplet is a small procedurally drawn scene: a speckled skin-tone person
wearing a long-sleeve block of shirt color, a striped flat garment reference,
a rectangular torso edit mask, a smooth gradient standing in for the dense
body map, and a ground truth built by compositing a short-sleeve torso into
the person, so ground truth equals the person bit-exactly outside the mask.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import Grid2D, Mask, composite, quantize_image, save_image, save_mask

SKIN = (0.76, 0.62, 0.55)
SHIRT = (0.30, 0.35, 0.60)
UNDERGARMENT = (0.58, 0.52, 0.50)


def _speckled(rng: np.random.Generator, height: int, width: int, color) -> np.ndarray:
    base = np.empty((height, width, 3))
    base[:] = color
    base += rng.uniform(-0.03, 0.03, size=(height, width, 1))
    return np.clip(base, 0.02, 0.98)


def _striped_garment(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    color = rng.uniform(0.35, 0.65, size=3)
    img = np.empty((height, width, 3))
    img[:] = color
    stripes = ((np.arange(height) // 3) % 2)[:, np.newaxis, np.newaxis]
    img += 0.06 * (stripes - 0.5)
    return np.clip(img, 0.02, 0.98)


def torso_mask(height: int, width: int) -> Mask:
    m = np.zeros((height, width), dtype=np.uint8)
    m[height // 3 : (2 * height) // 3, width // 6 : width - width // 6] = 1
    return Mask(m)


def synthetic_triplet(height: int = 32, width: int = 32, seed: int = 0) -> dict:
    """Deterministic triplet of grids keyed like a manifest record."""
    rng = np.random.default_rng(seed)
    mask = torso_mask(height, width)

    person = _speckled(rng, height, width, SKIN)
    shirt_rows = slice(height // 4, (3 * height) // 4)
    person[shirt_rows, :, :] = _speckled(rng, height, width, SHIRT)[shirt_rows, :, :]

    garment = _striped_garment(rng, height, width)
    undergarment = _speckled(rng, height, width, UNDERGARMENT)

    densepose = np.empty((height, width, 3))
    densepose[:, :, 0] = np.linspace(0.0, 1.0, width)[np.newaxis, :]
    densepose[:, :, 1] = np.linspace(0.0, 1.0, height)[:, np.newaxis]
    densepose[:, :, 2] = 0.5

    # Short-sleeve look inside the mask: garment texture in the middle,
    # exposed skin on the sides where the long sleeves used to be.
    torso = _speckled(rng, height, width, SKIN)
    mid = slice(width // 3, width - width // 3)
    torso[:, mid, :] = garment[:, mid, :]
    ground_truth = composite(Grid2D(torso), Grid2D(person), mask)

    return {
        "source_person": quantize_image(Grid2D(person)),
        "garment_ref": quantize_image(Grid2D(garment)),
        "undergarment_ref": quantize_image(Grid2D(undergarment)),
        "densepose": quantize_image(Grid2D(densepose)),
        "ground_truth": quantize_image(ground_truth),
        "mask": mask,
    }


def write_dataset(
    outdir: str | Path,
    count: int = 8,
    height: int = 32,
    width: int = 32,
    seed: int = 0,
    with_ground_truth: bool = True,
) -> Path:
    """Write PNG triplets plus a manifest.jsonl; returns the manifest path.

    Every other record omits undergarment_ref so harness runs exercise the
    bundled default reference.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest_path = outdir / "manifest.jsonl"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for i in range(count):
            rec_id = f"item{i:03d}"
            triplet = synthetic_triplet(height, width, seed=seed + i)
            record = {"id": rec_id}
            for key in ("source_person", "garment_ref", "densepose", "ground_truth"):
                if key == "ground_truth" and not with_ground_truth:
                    continue
                name = f"{rec_id}_{key}.png"
                save_image(triplet[key], outdir / name)
                record[key] = name
            mask_name = f"{rec_id}_mask.png"
            save_mask(triplet["mask"], outdir / mask_name)
            record["mask"] = mask_name
            if i % 2 == 0:
                name = f"{rec_id}_undergarment_ref.png"
                save_image(triplet["undergarment_ref"], outdir / name)
                record["undergarment_ref"] = name
            fh.write(json.dumps(record) + "\n")
    return manifest_path
