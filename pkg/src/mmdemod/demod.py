"""Instantaneous amplitude/frequency estimation from band energies.

Two estimators share one core: the single-channel path forms the band
energies from a signal paired with itself, the multichannel path selects,
per band and per medium-duration frame, the ordered microphone pair with the
minimum average cross energy and uses that pair's energies instead. The
frequency track is sqrt(E_deriv / E); the amplitude track is E / sqrt(E_deriv).

Raw tracks are repaired (invalid ratio samples filled from the nearest valid
neighbor), clipped to [0, pi] rad/sample, and smoothed with a 7-sample median
filter before conversion to Hz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter

from .audio_io import AudioBuffer, MultichannelAudio
from .energy_ops import _replicate_ends
from .filterbank import Filterbank, GaborFilter, filter_array

#: absolute floor on the energy-ratio denominator before the square root
RATIO_EPS = 1e-12

MEDIAN_WIDTH = 7


@dataclass(frozen=True)
class MediumFrameConfig:
    """Frames over which the channel-pair choice is held constant (seconds)."""

    frame_len: float = 0.1
    hop: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.hop <= self.frame_len):
            raise ValueError(
                f"need 0 < hop <= frame_len, got hop={self.hop} "
                f"frame_len={self.frame_len}")


@dataclass(frozen=True)
class PairSelection:
    """Per medium frame: the ordered channel pair with minimum mean cross energy."""

    band_index: int
    frame_bounds: np.ndarray  # (F, 2) sample ranges [start, end)
    m_hat: np.ndarray
    l_hat: np.ndarray
    mean_energy: np.ndarray

    def __post_init__(self):
        if np.any(self.m_hat == self.l_hat):
            raise ValueError("selected pair must have distinct channel indices")

    @property
    def num_frames(self) -> int:
        return len(self.m_hat)


@dataclass(frozen=True)
class BandDemodulation:
    """Instantaneous amplitude (dimensionless) and frequency (Hz) for one band."""

    amp: np.ndarray
    freq: np.ndarray
    band_index: int
    source: str  # "single" or "mmd"
    sample_rate: int
    channel: int | None = None

    def __post_init__(self):
        if len(self.amp) != len(self.freq):
            raise ValueError("amp and freq tracks must have equal length")

    def __len__(self) -> int:
        return len(self.freq)


def _filtered4(x: np.ndarray, filt: GaborFilter) -> list[np.ndarray]:
    return [filter_array(x, filt, order) for order in range(4)]


def _self_energy(f4: list[np.ndarray]) -> np.ndarray:
    return f4[1] * f4[1] - f4[0] * f4[2]


def _edge_fix(values: np.ndarray, lo: int, hi: int, n: int) -> np.ndarray:
    """Replicate utterance-endpoint samples, matching the energy-op contract."""
    if len(values) >= 2:
        if lo == 0:
            values[0] = values[1]
        if hi == n:
            values[-1] = values[-2]
    return values


def _cross_energy(fa: list[np.ndarray], fb: list[np.ndarray],
                  lo: int, hi: int, n: int) -> np.ndarray:
    vals = fa[1][lo:hi] * fb[1][lo:hi] - fa[0][lo:hi] * fb[2][lo:hi]
    return _edge_fix(vals, lo, hi, n)


def _cross_energy_deriv(fa: list[np.ndarray], fb: list[np.ndarray],
                        lo: int, hi: int, n: int) -> np.ndarray:
    vals = fa[2][lo:hi] * fb[2][lo:hi] - fa[1][lo:hi] * fb[3][lo:hi]
    return _edge_fix(vals, lo, hi, n)


def _raw_esa(psi: np.ndarray, psi_deriv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Raw frequency (rad/sample, NaN where invalid) and amplitude tracks."""
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = psi_deriv / psi
        invalid = (np.abs(psi) < RATIO_EPS) | (ratio < 0) | ~np.isfinite(ratio)
        freq = np.sqrt(np.where(invalid, np.nan, ratio))
        amp = np.where(psi_deriv > RATIO_EPS,
                       np.maximum(psi, 0.0) / np.sqrt(psi_deriv), 0.0)
    return freq, np.nan_to_num(amp, nan=0.0, posinf=0.0, neginf=0.0)


def _fill_nearest_valid(values: np.ndarray) -> np.ndarray:
    """Replace non-finite samples with the nearest finite one (ties go left)."""
    bad = ~np.isfinite(values)
    if not bad.any() or bad.all():
        return values
    idx = np.arange(len(values))
    valid = idx[~bad]
    pos = np.searchsorted(valid, idx[bad])
    left = valid[np.clip(pos - 1, 0, len(valid) - 1)]
    right = valid[np.clip(pos, 0, len(valid) - 1)]
    pick = np.where(np.abs(idx[bad] - left) <= np.abs(right - idx[bad]), left, right)
    out = values.copy()
    out[bad] = values[pick]
    return out


def repair_and_smooth(raw_freq, raw_amp,
                      band: GaborFilter) -> tuple[np.ndarray, np.ndarray]:
    """Make raw demodulation tracks finite and smooth.

    Non-finite frequency samples are replaced by the nearest valid neighbor
    (the band center if the whole track is invalid), the track is clipped to
    [0, pi] rad/sample and median-filtered over 7 samples. Amplitude is
    floored at zero. Returns (freq in rad/sample, amp).
    """
    raw_freq = np.asarray(raw_freq, dtype=np.float64)
    raw_amp = np.asarray(raw_amp, dtype=np.float64)
    if len(raw_freq) != len(raw_amp):
        raise ValueError("freq and amp tracks must have equal length")
    if not np.isfinite(raw_freq).any():
        freq = np.full(len(raw_freq), band.center_freq)
    else:
        freq = _fill_nearest_valid(raw_freq)
    freq = np.clip(freq, 0.0, np.pi)
    if len(freq) > 1:
        freq = median_filter(freq, size=min(MEDIAN_WIDTH, len(freq)), mode="nearest")
    amp = np.maximum(np.nan_to_num(raw_amp, nan=0.0, posinf=0.0, neginf=0.0), 0.0)
    return freq, amp


def _finish_track(raw_freq: np.ndarray, raw_amp: np.ndarray, filt: GaborFilter,
                  rate: int, source: str, channel: int | None) -> BandDemodulation:
    freq, amp = repair_and_smooth(raw_freq, raw_amp, filt)
    freq_hz = freq * rate / (2.0 * np.pi)
    return BandDemodulation(amp=amp, freq=freq_hz, band_index=filt.band_index,
                            source=source, sample_rate=rate, channel=channel)


def esa_single(signal: AudioBuffer, filt: GaborFilter,
               channel: int | None = None) -> BandDemodulation:
    """Single-channel energy-separation demodulation of one band."""
    if len(signal) < len(filt.kernel):
        raise ValueError(
            f"signal length {len(signal)} shorter than kernel "
            f"length {len(filt.kernel)}")
    f4 = _filtered4(signal.samples, filt)
    n = len(signal)
    psi = _cross_energy(f4, f4, 0, n, n)
    psi_deriv = _cross_energy_deriv(f4, f4, 0, n, n)
    raw_freq, raw_amp = _raw_esa(psi, psi_deriv)
    return _finish_track(raw_freq, raw_amp, filt, signal.sample_rate,
                         "single", channel)


def _medium_frames(n: int, cfg: MediumFrameConfig, rate: int) -> np.ndarray:
    """Selection frame bounds (F, 2); frames start every hop, last one clipped."""
    hop = max(int(round(cfg.hop * rate)), 1)
    frame = max(int(round(cfg.frame_len * rate)), 1)
    starts = np.arange(0, n, hop)
    ends = np.minimum(starts + frame, n)
    return np.stack([starts, ends], axis=1)


def _select_in_frame(f4_all: list[list[np.ndarray]], self_tracks: list[np.ndarray],
                     lo: int, hi: int, n: int) -> tuple[int, int, float]:
    """Apply the two-candidate argmin: least self-energy channels, best ordering."""
    means = np.array([tr[lo:hi].mean() for tr in self_tracks])
    order = np.argsort(means, kind="stable")
    m1, m2 = int(order[0]), int(order[1])
    forward = _cross_energy(f4_all[m1], f4_all[m2], lo, hi, n).mean()
    backward = _cross_energy(f4_all[m2], f4_all[m1], lo, hi, n).mean()
    if forward <= backward:
        return m1, m2, float(forward)
    return m2, m1, float(backward)


def select_pairs(audio: MultichannelAudio, filt: GaborFilter,
                 cfg: MediumFrameConfig) -> PairSelection:
    """Choose the demodulation pair for every medium frame of one band.

    Per frame: rank channels by frame-mean self energy of the band, keep the
    two smallest, then keep whichever ordering of that pair has the smaller
    frame-mean cross energy.
    """
    if audio.num_channels < 2:
        raise ValueError("pair selection needs at least 2 channels")
    n = len(audio)
    f4_all = [_filtered4(ch.samples, filt) for ch in audio.channels]
    self_tracks = [_replicate_ends(_self_energy(f4)) for f4 in f4_all]
    bounds = _medium_frames(n, cfg, audio.sample_rate)
    m_hat = np.empty(len(bounds), dtype=np.int64)
    l_hat = np.empty(len(bounds), dtype=np.int64)
    energy = np.empty(len(bounds))
    for j, (lo, hi) in enumerate(bounds):
        m_hat[j], l_hat[j], energy[j] = _select_in_frame(
            f4_all, self_tracks, int(lo), int(hi), n)
    return PairSelection(band_index=filt.band_index, frame_bounds=bounds,
                         m_hat=m_hat, l_hat=l_hat, mean_energy=energy)


def mmd_demodulate(audio: MultichannelAudio, bank: Filterbank,
                   cfg: MediumFrameConfig | None = None,
                   with_selections: bool = False):
    """Multichannel multiband demodulation of all bands.

    Per band, the pair choice from :func:`select_pairs` is held constant over
    each hop-length tile; the tile's frequency and amplitude come from the
    selected pair's cross energies. Tiles are concatenated without cross-fade
    and the full track is repaired and median-smoothed.

    Returns a list of :class:`BandDemodulation`; with ``with_selections``
    also returns the per-band :class:`PairSelection` list.
    """
    if audio.num_channels < 2:
        raise ValueError("MMD requires at least 2 channels")
    cfg = cfg or MediumFrameConfig()
    rate = audio.sample_rate
    n = len(audio)
    max_kernel = max(len(f.kernel) for f in bank)
    if n < max_kernel:
        raise ValueError(f"signal length {n} shorter than kernel length {max_kernel}")
    hop = max(int(round(cfg.hop * rate)), 1)
    demods = []
    selections = []
    for filt in bank:
        f4_all = [_filtered4(ch.samples, filt) for ch in audio.channels]
        self_tracks = [_replicate_ends(_self_energy(f4)) for f4 in f4_all]
        bounds = _medium_frames(n, cfg, rate)
        m_hat = np.empty(len(bounds), dtype=np.int64)
        l_hat = np.empty(len(bounds), dtype=np.int64)
        energy = np.empty(len(bounds))
        psi = np.empty(n)
        psi_deriv = np.empty(n)
        for j, (lo, hi) in enumerate(bounds):
            lo, hi = int(lo), int(hi)
            m, l, e = _select_in_frame(f4_all, self_tracks, lo, hi, n)
            m_hat[j], l_hat[j], energy[j] = m, l, e
            tile_hi = min(lo + hop, n)
            psi[lo:tile_hi] = _cross_energy(f4_all[m], f4_all[l], lo, tile_hi, n)
            psi_deriv[lo:tile_hi] = _cross_energy_deriv(f4_all[m], f4_all[l],
                                                        lo, tile_hi, n)
        raw_freq, raw_amp = _raw_esa(_replicate_ends(psi),
                                     _replicate_ends(psi_deriv))
        demods.append(_finish_track(raw_freq, raw_amp, filt, rate, "mmd", None))
        if with_selections:
            selections.append(PairSelection(
                band_index=filt.band_index, frame_bounds=bounds,
                m_hat=m_hat, l_hat=l_hat, mean_energy=energy))
    if with_selections:
        return demods, selections
    return demods
