import struct

import numpy as np
import pytest

from mmdemod import AudioBuffer, MultichannelAudio, load_wav, save_wav, stack_channels


def write_pcm_wav(path, frames: np.ndarray, rate: int, bits: int) -> None:
    """Minimal PCM writer used as an independent counterpart to load_wav."""
    n_ch = frames.shape[1]
    if bits == 16:
        payload = frames.astype("<i2").tobytes()
    elif bits == 32:
        payload = frames.astype("<i4").tobytes()
    elif bits == 24:
        as32 = frames.astype("<i4")
        raw = as32.tobytes()
        payload = b"".join(raw[i:i + 3] for i in range(0, len(raw), 4))
    else:
        raise ValueError(bits)
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, 1, n_ch, rate, rate * n_ch * bits // 8,
        n_ch * bits // 8, bits, b"data", len(payload))
    path.write_bytes(header + payload)


class TestLoadWav:
    def test_16bit_full_scale_normalization(self, tmp_path):
        path = tmp_path / "mono.wav"
        write_pcm_wav(path, np.array([[16384], [-32768], [0]]), 16000, 16)
        audio = load_wav(path)
        np.testing.assert_allclose(audio.channels[0].samples, [0.5, -1.0, 0.0])
        assert audio.sample_rate == 16000

    def test_24bit_full_scale_normalization(self, tmp_path):
        path = tmp_path / "deep.wav"
        write_pcm_wav(path, np.array([[1 << 22], [-(1 << 23)]]), 48000, 24)
        audio = load_wav(path)
        np.testing.assert_allclose(audio.channels[0].samples, [0.5, -1.0])

    def test_32bit_int(self, tmp_path):
        path = tmp_path / "deep32.wav"
        write_pcm_wav(path, np.array([[1 << 30]]), 8000, 32)
        np.testing.assert_allclose(load_wav(path).channels[0].samples, [0.5])

    def test_stereo_shape_preserved(self, tmp_path):
        rng = np.random.default_rng(0)
        frames = (rng.uniform(-0.5, 0.5, size=(16000, 2)) * 2 ** 15).astype(int)
        path = tmp_path / "stereo.wav"
        write_pcm_wav(path, frames, 16000, 16)
        audio = load_wav(path)
        assert audio.num_channels == 2
        assert len(audio) == 16000

    def test_channel_order_preserved(self, tmp_path):
        frames = np.array([[1000, -2000], [3000, -4000]])
        path = tmp_path / "order.wav"
        write_pcm_wav(path, frames, 16000, 16)
        audio = load_wav(path)
        assert audio.channels[0].samples[0] > 0 > audio.channels[1].samples[0]

    def test_normalization_is_linear(self, tmp_path):
        base = np.array([[1200], [-900], [333]])
        p1, p2 = tmp_path / "a.wav", tmp_path / "b.wav"
        write_pcm_wav(p1, base, 16000, 16)
        write_pcm_wav(p2, 20 * base, 16000, 16)
        np.testing.assert_allclose(load_wav(p2).channels[0].samples,
                                   20 * load_wav(p1).channels[0].samples)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"not a wav at all")
        with pytest.raises(ValueError):
            load_wav(path)

    def test_rejects_empty_data(self, tmp_path):
        header = struct.pack(
            "<4sI4s4sIHHIIHH4sI", b"RIFF", 36, b"WAVE", b"fmt ", 16, 1, 1,
            16000, 32000, 2, 16, b"data", 0)
        path = tmp_path / "empty.wav"
        path.write_bytes(header)
        with pytest.raises(ValueError):
            load_wav(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_wav(tmp_path / "nope.wav")


class TestSaveWav:
    def test_float_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(7)
        original = MultichannelAudio(tuple(
            AudioBuffer(rng.uniform(-1, 1, 500).astype(np.float32).astype(np.float64),
                        22050)
            for _ in range(3)))
        path = tmp_path / "rt.wav"
        save_wav(original, path)
        loaded = load_wav(path)
        assert loaded.num_channels == 3
        assert loaded.sample_rate == 22050
        for a, b in zip(loaded.channels, original.channels):
            assert np.array_equal(a.samples, b.samples)

    def test_save_load_save_stable(self, tmp_path):
        audio = MultichannelAudio((AudioBuffer(
            np.sin(np.arange(300) * 0.1).astype(np.float32).astype(np.float64),
            16000),))
        p1, p2 = tmp_path / "one.wav", tmp_path / "two.wav"
        save_wav(audio, p1)
        save_wav(load_wav(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_mono_header(self, tmp_path):
        path = tmp_path / "mono.wav"
        save_wav(MultichannelAudio((AudioBuffer(np.zeros(10), 16000),)), path)
        blob = path.read_bytes()
        n_channels = struct.unpack("<H", blob[22:24])[0]
        fmt_tag = struct.unpack("<H", blob[20:22])[0]
        assert n_channels == 1
        assert fmt_tag == 3  # IEEE float

    def test_empty_path_rejected(self):
        audio = MultichannelAudio((AudioBuffer(np.zeros(4), 16000),))
        with pytest.raises(ValueError):
            save_wav(audio, "")


class TestStackChannels:
    def test_two_identical(self):
        buf = AudioBuffer(np.ones(8), 16000)
        audio = stack_channels([buf, buf])
        assert audio.num_channels == 2
        np.testing.assert_array_equal(audio.channels[0].samples,
                                      audio.channels[1].samples)

    def test_rate_mismatch(self):
        with pytest.raises(ValueError):
            stack_channels([AudioBuffer(np.zeros(8), 16000),
                            AudioBuffer(np.zeros(8), 8000)])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            stack_channels([AudioBuffer(np.zeros(8), 16000),
                            AudioBuffer(np.zeros(9), 16000)])

    def test_empty_list(self):
        with pytest.raises(ValueError):
            stack_channels([])

    def test_three_buffers(self):
        bufs = [AudioBuffer(np.zeros(400), 16000) for _ in range(3)]
        audio = stack_channels(bufs)
        assert audio.num_channels == 3
        assert len(audio) == 400


class TestInvariants:
    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            AudioBuffer(np.array([0.0, np.nan]), 16000)

    def test_nonpositive_rate_rejected(self):
        with pytest.raises(ValueError):
            AudioBuffer(np.zeros(4), 0)
