"""WAV ingestion and multichannel audio containers.

All buffers hold float64 samples nominally in [-1, 1]. Integer PCM is
normalized by the type's full scale 2**(bits-1), so 0 maps to 0 and the
most negative code to -1. Mixed sample rates are rejected, never resampled.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioBuffer:
    """A single channel of audio: float samples plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ValueError("AudioBuffer samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("AudioBuffer samples must be finite")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class MultichannelAudio:
    """Time-aligned channels sharing one sample rate and one length."""

    channels: tuple[AudioBuffer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        channels = tuple(self.channels)
        object.__setattr__(self, "channels", channels)
        if not channels:
            raise ValueError("MultichannelAudio needs at least one channel")
        rate = channels[0].sample_rate
        length = len(channels[0])
        for i, ch in enumerate(channels):
            if ch.sample_rate != rate:
                raise ValueError(
                    f"channel {i} sample rate {ch.sample_rate} != {rate}")
            if len(ch) != length:
                raise ValueError(
                    f"channel {i} length {len(ch)} != {length}")

    @property
    def num_channels(self) -> int:
        return len(self.channels)

    @property
    def sample_rate(self) -> int:
        return self.channels[0].sample_rate

    def __len__(self) -> int:
        return len(self.channels[0])

    def as_array(self) -> np.ndarray:
        """Channels stacked as a (num_channels, length) array."""
        return np.stack([ch.samples for ch in self.channels])


def stack_channels(buffers: list[AudioBuffer]) -> MultichannelAudio:
    """Combine equally-sized, equal-rate buffers into one multichannel object."""
    if not buffers:
        raise ValueError("cannot stack an empty list of buffers")
    return MultichannelAudio(tuple(buffers))


def _parse_fmt_chunk(data: bytes) -> tuple[int, int, int, int]:
    if len(data) < 16:
        raise ValueError("malformed WAV: fmt chunk too short")
    fmt_tag, n_channels, sample_rate, _, _, bits = struct.unpack("<HHIIHH", data[:16])
    if fmt_tag == _WAVE_FORMAT_EXTENSIBLE:
        if len(data) < 40:
            raise ValueError("malformed WAV: extensible fmt chunk too short")
        # SubFormat GUID starts with the effective format tag
        fmt_tag = struct.unpack("<H", data[24:26])[0]
    return fmt_tag, n_channels, sample_rate, bits


def _decode_samples(raw: bytes, fmt_tag: int, bits: int, n_channels: int) -> np.ndarray:
    if fmt_tag == _WAVE_FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise ValueError(f"unsupported float WAV bit depth: {bits}")
        data = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    elif fmt_tag == _WAVE_FORMAT_PCM:
        if bits == 16:
            data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 2.0 ** 15
        elif bits == 32:
            data = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2.0 ** 31
        elif bits == 24:
            b = np.frombuffer(raw, dtype=np.uint8)
            if b.size % 3:
                raise ValueError("malformed WAV: 24-bit data not a multiple of 3 bytes")
            b = b.reshape(-1, 3)
            vals = (b[:, 0].astype(np.int32)
                    | (b[:, 1].astype(np.int32) << 8)
                    | (b[:, 2].astype(np.int32) << 16))
            vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
            data = vals.astype(np.float64) / 2.0 ** 23
        else:
            raise ValueError(f"unsupported PCM bit depth: {bits}")
    else:
        raise ValueError(f"unsupported WAV format tag: 0x{fmt_tag:04X}")
    frames = data.size // n_channels
    if frames == 0:
        raise ValueError("WAV stream contains no complete frames")
    return data[: frames * n_channels].reshape(frames, n_channels)


def load_wav(path) -> MultichannelAudio:
    """Read a PCM 16/24/32-bit or 32-bit float WAV file.

    Integer samples are scaled by the type's full scale 2**(bits-1);
    float samples are taken verbatim. Channel order is preserved.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise ValueError(f"not a RIFF/WAVE file: {path}")
    fmt = None
    raw = None
    pos = 12
    while pos + 8 <= len(blob):
        cid, size = blob[pos:pos + 4], struct.unpack("<I", blob[pos + 4:pos + 8])[0]
        body = blob[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            fmt = _parse_fmt_chunk(body)
        elif cid == b"data":
            raw = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None:
        raise ValueError(f"malformed WAV (no fmt chunk): {path}")
    if raw is None or len(raw) == 0:
        raise ValueError(f"WAV file has no sample data: {path}")
    fmt_tag, n_channels, sample_rate, bits = fmt
    if n_channels < 1:
        raise ValueError(f"malformed WAV (zero channels): {path}")
    frames = _decode_samples(raw, fmt_tag, bits, n_channels)
    return MultichannelAudio(tuple(
        AudioBuffer(frames[:, c], sample_rate) for c in range(n_channels)))


def save_wav(audio: MultichannelAudio, path) -> None:
    """Write audio as interleaved 32-bit float WAV, channel order preserved."""
    if not str(path):
        raise ValueError("empty output path")
    interleaved = audio.as_array().T.astype("<f4").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(interleaved), b"WAVE",
        b"fmt ", 16, _WAVE_FORMAT_IEEE_FLOAT,
        audio.num_channels, audio.sample_rate,
        audio.sample_rate * audio.num_channels * 4,
        audio.num_channels * 4, 32,
        b"data", len(interleaved))
    with open(path, "wb") as fh:
        fh.write(header + interleaved)
