"""Discrete Teager-Kaiser and cross-Teager energy operators.

The plain operator uses the 3-sample Kaiser form; the cross operator uses
central differences so both derivative estimates are co-located on the same
sample. The Gabor-filtered forms differentiate by convolving with the band's
analytic derivative kernels, never by finite differences.

Every track keeps the length of its source signal; the first and last
samples are replicated from the nearest interior value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .filterbank import GaborFilter, filter_array


@dataclass(frozen=True)
class EnergyTrack:
    """An energy signal (amplitude^2 x frequency^2 units) aligned to its source."""

    values: np.ndarray
    band_index: int | None = None
    pair: tuple[int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.values)


def _replicate_ends(values: np.ndarray) -> np.ndarray:
    if len(values) >= 3:
        values[0] = values[1]
        values[-1] = values[-2]
    return values


def teager(x) -> EnergyTrack:
    """Kaiser 3-sample energy operator: x[n]^2 - x[n-1] x[n+1]."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 3:
        raise ValueError("teager() needs at least 3 samples")
    out = np.empty_like(x)
    out[1:-1] = x[1:-1] ** 2 - x[:-2] * x[2:]
    return EnergyTrack(_replicate_ends(out))


def cross_teager(x, y) -> EnergyTrack:
    """Cross energy of two sequences: x' y' - x y'' with central differences.

    Bilinear and asymmetric in its arguments; cross_teager(x, x) reproduces a
    central-difference Teager operator exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise ValueError("cross_teager() needs at least 3 samples")
    dx = 0.5 * (x[2:] - x[:-2])
    dy = 0.5 * (y[2:] - y[:-2])
    ddy = y[2:] - 2.0 * y[1:-1] + y[:-2]
    out = np.empty_like(x)
    out[1:-1] = dx * dy - x[1:-1] * ddy
    return EnergyTrack(_replicate_ends(out))


def _check_pair(ya: AudioBuffer, yb: AudioBuffer) -> None:
    if ya.sample_rate != yb.sample_rate:
        raise ValueError(
            f"sample rate mismatch: {ya.sample_rate} vs {yb.sample_rate}")
    if len(ya) != len(yb):
        raise ValueError(f"length mismatch: {len(ya)} vs {len(yb)}")


def gabor_cross_teager(ya: AudioBuffer, yb: AudioBuffer,
                       filt: GaborFilter) -> EnergyTrack:
    """Band-filtered cross energy: (ya*g')(yb*g') - (ya*g)(yb*g'')."""
    _check_pair(ya, yb)
    out = (filter_array(ya.samples, filt, 1) * filter_array(yb.samples, filt, 1)
           - filter_array(ya.samples, filt, 0) * filter_array(yb.samples, filt, 2))
    return EnergyTrack(_replicate_ends(out), band_index=filt.band_index)


def gabor_cross_teager_deriv(ya: AudioBuffer, yb: AudioBuffer,
                             filt: GaborFilter) -> EnergyTrack:
    """Cross energy of the band derivatives: (ya*g'')(yb*g'') - (ya*g')(yb*g''')."""
    _check_pair(ya, yb)
    out = (filter_array(ya.samples, filt, 2) * filter_array(yb.samples, filt, 2)
           - filter_array(ya.samples, filt, 1) * filter_array(yb.samples, filt, 3))
    return EnergyTrack(_replicate_ends(out), band_index=filt.band_index)
