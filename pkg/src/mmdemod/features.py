"""Frame-level frequency-modulation features from demodulation tracks.

MIF rows hold the per-band mean instantaneous frequency of each analysis
frame; CIF rows hold the leading orthonormal DCT-II coefficients of the
within-frame frequency trajectory, bands concatenated in ascending order
(band-major). Standardization operates on whole-utterance frequency tracks,
per band, before framing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.fft import dct, idct

from .demod import BandDemodulation

STD_FLOOR = 1e-8

MMDF_MAGIC = b"MMDF"
MMDF_VERSION = 1


@dataclass(frozen=True)
class FrameConfig:
    """Analysis framing in seconds: 25 ms windows every 10 ms by default."""

    win: float = 0.025
    hop: float = 0.010

    def __post_init__(self):
        if not (0.0 < self.hop <= self.win):
            raise ValueError(f"need 0 < hop <= win, got hop={self.hop} win={self.win}")


@dataclass(frozen=True)
class FeatureMatrix:
    """Frames-by-dimensions feature block with frame timing and provenance."""

    data: np.ndarray
    frame_times: np.ndarray  # frame start times, seconds
    kind: str  # "mif", "cif", or "spliced"
    column_names: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if data.ndim != 2:
            raise ValueError("feature data must be 2-D (frames x dims)")
        if len(self.column_names) != data.shape[1]:
            raise ValueError("column name count must match feature dimension")
        if len(self.frame_times) != data.shape[0]:
            raise ValueError("frame_times length must match frame count")
        if data.size and not np.all(np.isfinite(data)):
            raise ValueError("feature matrix must be finite")

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def standardize_bands(demods: list[BandDemodulation]) -> list[BandDemodulation]:
    """Zero-mean, unit-variance each band's frequency track over the utterance.

    A (near-)constant track maps to zeros via the standard-deviation floor.
    Amplitude tracks pass through unchanged.
    """
    out = []
    for d in demods:
        if len(d.freq) == 0:
            raise ValueError("cannot standardize an empty track")
        mean = float(np.mean(d.freq))
        std = float(np.std(d.freq))
        if std < STD_FLOOR:
            freq = np.zeros_like(d.freq)
        else:
            freq = (d.freq - mean) / std
        out.append(replace(d, freq=freq))
    return out


def _frame_grid(n: int, cfg: FrameConfig, rate: int) -> tuple[int, int, int]:
    win = int(round(cfg.win * rate))
    hop = int(round(cfg.hop * rate))
    if win < 1 or hop < 1:
        raise ValueError("frame window and hop must be at least one sample")
    if n < win:
        raise ValueError(f"utterance of {n} samples shorter than one "
                         f"{win}-sample window")
    return (n - win) // hop + 1, win, hop


def _check_bands(demods: list[BandDemodulation]) -> int:
    if not demods:
        raise ValueError("no demodulation tracks given")
    n = len(demods[0])
    rate = demods[0].sample_rate
    for d in demods:
        if len(d) != n or d.sample_rate != rate:
            raise ValueError("all bands must share one length and sample rate")
    return n


def extract_mif(demods: list[BandDemodulation], cfg: FrameConfig) -> FeatureMatrix:
    """Mean instantaneous frequency of each band per frame (T x num_bands)."""
    n = _check_bands(demods)
    rate = demods[0].sample_rate
    num_frames, win, hop = _frame_grid(n, cfg, rate)
    data = np.empty((num_frames, len(demods)))
    starts = np.arange(num_frames) * hop
    for k, d in enumerate(demods):
        csum = np.concatenate([[0.0], np.cumsum(d.freq)])
        data[:, k] = (csum[starts + win] - csum[starts]) / win
    return FeatureMatrix(
        data=data, frame_times=starts / rate, kind="mif",
        column_names=tuple(f"mif_b{d.band_index:02d}" for d in demods),
        meta={"num_bands": len(demods), "win": cfg.win, "hop": cfg.hop,
              "sample_rate": rate})


def extract_cif(demods: list[BandDemodulation], cfg: FrameConfig,
                num_dct: int = 10) -> FeatureMatrix:
    """Leading DCT coefficients of each band's within-frame trajectory.

    Uses the orthonormal DCT-II, so a constant frame of value c yields
    coefficient 0 = c * sqrt(window) and keeping all coefficients
    reconstructs the frame exactly. Output is T x (num_bands * num_dct),
    band-major.
    """
    n = _check_bands(demods)
    rate = demods[0].sample_rate
    num_frames, win, hop = _frame_grid(n, cfg, rate)
    if num_dct < 1 or num_dct > win:
        raise ValueError(f"num_dct must be in [1, {win}], got {num_dct}")
    starts = np.arange(num_frames) * hop
    data = np.empty((num_frames, len(demods) * num_dct))
    for k, d in enumerate(demods):
        frames = np.lib.stride_tricks.sliding_window_view(d.freq, win)[::hop]
        coef = dct(frames[:num_frames], type=2, norm="ortho", axis=1)[:, :num_dct]
        data[:, k * num_dct:(k + 1) * num_dct] = coef
    names = tuple(f"cif_b{d.band_index:02d}_c{c:02d}"
                  for d in demods for c in range(num_dct))
    return FeatureMatrix(
        data=data, frame_times=starts / rate, kind="cif", column_names=names,
        meta={"num_bands": len(demods), "num_dct": num_dct, "win": cfg.win,
              "hop": cfg.hop, "sample_rate": rate})


def cif_reconstruct_frame(coefficients: np.ndarray, win: int) -> np.ndarray:
    """Invert truncated CIF coefficients back to a window-length trajectory."""
    full = np.zeros(win)
    full[: len(coefficients)] = coefficients
    return idct(full, type=2, norm="ortho")


def splice(features: FeatureMatrix, context: int = 4) -> FeatureMatrix:
    """Concatenate each row with its +-context neighbors, edges replicated."""
    if context < 0:
        raise ValueError("context must be nonnegative")
    if context == 0:
        return features
    rows = features.num_frames
    idx = np.arange(rows)
    blocks = []
    names = []
    for off in range(-context, context + 1):
        blocks.append(features.data[np.clip(idx + off, 0, rows - 1)])
        names.extend(f"t{off:+d}_{c}" for c in features.column_names)
    meta = dict(features.meta)
    meta.update({"context": context, "base_kind": features.kind})
    return FeatureMatrix(data=np.concatenate(blocks, axis=1),
                         frame_times=features.frame_times, kind="spliced",
                         column_names=tuple(names), meta=meta)


def cmvn(features: FeatureMatrix) -> FeatureMatrix:
    """Column-wise mean/variance normalization of a feature matrix."""
    mean = features.data.mean(axis=0)
    std = features.data.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    meta = dict(features.meta)
    meta["cmvn"] = True
    return replace(features, data=(features.data - mean) / std, meta=meta)


def save_feature_csv(features: FeatureMatrix, path) -> None:
    """Write a CSV with one header row naming every column."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(features.column_names) + "\n")
        for row in features.data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def save_mmdf(features: FeatureMatrix, path) -> None:
    """Write the binary feature container.

    Layout: magic "MMDF", version u16, rows u32, cols u32 (little-endian),
    then row-major float32 samples.
    """
    rows, cols = features.data.shape
    with open(path, "wb") as fh:
        fh.write(MMDF_MAGIC)
        fh.write(struct.pack("<HII", MMDF_VERSION, rows, cols))
        fh.write(features.data.astype("<f4").tobytes())


def load_mmdf(path) -> np.ndarray:
    """Read an MMDF container back as a (rows, cols) float32 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MMDF_MAGIC:
        raise ValueError(f"not an MMDF file: {path}")
    version, rows, cols = struct.unpack("<HII", blob[4:14])
    if version != MMDF_VERSION:
        raise ValueError(f"unsupported MMDF version {version}")
    data = np.frombuffer(blob[14:], dtype="<f4")
    if data.size != rows * cols:
        raise ValueError("MMDF payload size does not match header")
    return data.reshape(rows, cols)


def write_sidecar(config_items: dict, path, notes: dict | None = None) -> None:
    """Record the effective extraction config as flat key=value text.

    ``notes`` are written as comment lines, so the sidecar stays usable as a
    config file verbatim.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(notes or {}):
            fh.write(f"# {key}={notes[key]}\n")
        for key in sorted(config_items):
            fh.write(f"{key}={config_items[key]}\n")
