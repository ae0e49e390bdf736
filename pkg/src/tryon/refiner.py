"""Frequency-domain structural refinement.

Blends the source image's amplitude spectrum into the generated image's
high-frequency band while keeping the generated image's phase, then inverts
back to pixels. Forward transform is unnormalized; the inverse carries the
1/(H*W) factor. Each color channel is processed independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RangeError, ShapeError, SymmetryError
from .grid import Grid2D

# Residual imaginary mass above this after the inverse transform means the
# spectrum lost conjugate symmetry upstream (almost always an asymmetric mask).
IMAG_RESIDUE_LIMIT = 1e-6


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex H x W x C frequency bins."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.complex128, order="C")
        if arr.ndim != 3:
            raise ShapeError(f"spectrum must be HxWxC, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise RangeError("spectrum values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class AmplitudePhase:
    """Polar split of a spectrum: nonnegative amplitude, phase in (-pi, pi]."""

    amplitude: np.ndarray
    phase: np.ndarray

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitude, dtype=np.float64)
        ph = np.asarray(self.phase, dtype=np.float64)
        if amp.shape != ph.shape:
            raise ShapeError(f"amplitude {amp.shape} vs phase {ph.shape}")
        if not np.all(amp >= 0.0):
            raise RangeError("amplitude must be nonnegative")
        for name, arr in (("amplitude", amp), ("phase", ph)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _negated_indices(n: int) -> np.ndarray:
    return (-np.arange(n)) % n


@dataclass(frozen=True, eq=False)
class FrequencyMask:
    """H x W weights in [0, 1], symmetric under frequency negation."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64, order="C")
        if arr.ndim != 2:
            raise ShapeError(f"frequency mask must be HxW, got shape {arr.shape}")
        if not np.all((arr >= 0.0) & (arr <= 1.0)):
            raise RangeError("frequency mask values must lie in [0, 1]")
        h, w = arr.shape
        mirrored = arr[np.ix_(_negated_indices(h), _negated_indices(w))]
        if not np.array_equal(arr, mirrored):
            raise DomainError("frequency mask must satisfy B(-u,-v) = B(u,v)")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def fft2(image: Grid2D) -> Spectrum:
    """Unnormalized per-channel 2D DFT."""
    return Spectrum(np.fft.fft2(image.values, axes=(0, 1)))


def ifft2_with_residue(spec: Spectrum) -> tuple[Grid2D, float]:
    """Normalized inverse transform; returns (real part, max |imag residue|)."""
    full = np.fft.ifft2(spec.values, axes=(0, 1))
    residue = float(np.abs(full.imag).max())
    if residue > IMAG_RESIDUE_LIMIT:
        raise SymmetryError(
            f"inverse transform left imaginary residue {residue:.3e}; "
            "the spectrum (or a mask applied to it) is not conjugate-symmetric"
        )
    return Grid2D(full.real), residue


def ifft2(spec: Spectrum) -> Grid2D:
    return ifft2_with_residue(spec)[0]


def split_amp_phase(spec: Spectrum) -> AmplitudePhase:
    """Amplitude |K| and phase arg(K), with arg(0) := 0 and -pi mapped to pi."""
    amp = np.abs(spec.values)
    phase = np.angle(spec.values)
    phase = np.where(amp == 0.0, 0.0, phase)
    phase = np.where(phase == -np.pi, np.pi, phase)
    return AmplitudePhase(amplitude=amp, phase=phase)


def make_highpass_mask(height: int, width: int, cutoff: float) -> FrequencyMask:
    """Ideal radial high-pass: 1 where normalized radius >= cutoff.

    Radius is measured on the centered spectrum with per-axis frequency
    normalization and then scaled so the farthest representable bin sits at
    radius 1. The DC bin has radius 0, so it is zeroed by any cutoff > 0.
    """
    if not 0.0 <= cutoff <= 1.0:
        raise DomainError(f"cutoff must lie in [0, 1], got {cutoff}")
    if height < 1 or width < 1:
        raise ShapeError("mask dimensions must be positive")

    def axis_freq(n: int) -> np.ndarray:
        idx = np.arange(n)
        dist = np.minimum(idx, n - idx).astype(np.float64)
        half = n // 2
        return dist / half if half else dist

    fu = axis_freq(height)[:, np.newaxis]
    fv = axis_freq(width)[np.newaxis, :]
    rho = np.sqrt(fu**2 + fv**2)
    peak = rho.max()
    radius = rho / peak if peak > 0.0 else rho
    return FrequencyMask((radius >= cutoff).astype(np.float64))


def blend_spectra(spec_p: Spectrum, spec_r: Spectrum, mask: FrequencyMask) -> Spectrum:
    """Amplitude fusion under phase preservation.

    New amplitude is (1-B)*A_R + B*(A_P + A_R)/2 per bin; the result keeps the
    generated spectrum's phase exactly.
    """
    if spec_p.shape != spec_r.shape:
        raise ShapeError(f"source {spec_p.shape} vs generated {spec_r.shape}")
    if mask.shape != spec_r.shape[:2]:
        raise ShapeError(f"mask {mask.shape} vs spectrum {spec_r.shape[:2]}")
    amp_p = split_amp_phase(spec_p).amplitude
    polar_r = split_amp_phase(spec_r)
    b = mask.values[:, :, np.newaxis]
    fused = (1.0 - b) * polar_r.amplitude + b * (amp_p + polar_r.amplitude) / 2.0
    return Spectrum(fused * np.exp(1j * polar_r.phase))


def refine(
    source: Grid2D, generated: Grid2D, mask: FrequencyMask, *, clamp: bool = True
) -> Grid2D:
    """Fuse the source's masked amplitude band into the generated image.

    With clamp=False the raw inverse transform is returned (it can overshoot
    [0, 1]); the default clamps for image output.
    """
    if source.shape != generated.shape:
        raise ShapeError(f"source {source.shape} vs generated {generated.shape}")
    fused = blend_spectra(fft2(source), fft2(generated), mask)
    out, _ = ifft2_with_residue(fused)
    if clamp:
        out = Grid2D(np.clip(out.values, 0.0, 1.0))
    return out
