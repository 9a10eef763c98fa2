import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.fft import dct

from mmdemod import (FeatureMatrix, FrameConfig, cmvn, extract_cif,
                     extract_mif, load_mmdf, save_feature_csv, save_mmdf,
                     splice, standardize_bands)
from mmdemod.demod import BandDemodulation
from mmdemod.features import cif_reconstruct_frame, write_sidecar

from .conftest import RATE


def make_band(freq: np.ndarray, band_index: int = 0,
              rate: int = RATE) -> BandDemodulation:
    freq = np.asarray(freq, dtype=np.float64)
    return BandDemodulation(amp=np.ones_like(freq), freq=freq,
                            band_index=band_index, source="single",
                            sample_rate=rate)


def make_bands(tracks) -> list:
    return [make_band(t, k) for k, t in enumerate(tracks)]


class TestStandardize:
    def test_zero_mean_unit_variance(self):
        rng = np.random.default_rng(0)
        bands = make_bands([500 + 40 * rng.standard_normal(4000),
                            1500 + 90 * rng.standard_normal(4000)])
        for d in standardize_bands(bands):
            assert abs(np.mean(d.freq)) < 1e-9
            assert abs(np.var(d.freq) - 1.0) < 1e-6

    def test_constant_track_becomes_zero(self):
        out = standardize_bands(make_bands([np.full(100, 440.0)]))
        assert np.all(out[0].freq == 0.0)

    @given(st.floats(0.1, 50.0), st.floats(-200.0, 200.0))
    @settings(max_examples=25)
    def test_affine_invariance(self, a, b):
        rng = np.random.default_rng(1)
        track = 900 + 100 * rng.standard_normal(512)
        plain = standardize_bands(make_bands([track]))[0].freq
        affine = standardize_bands(make_bands([a * track + b]))[0].freq
        np.testing.assert_allclose(affine, plain, rtol=1e-9, atol=1e-9)

    def test_amplitude_untouched(self):
        band = make_band(np.linspace(100, 200, 50))
        out = standardize_bands([band])[0]
        np.testing.assert_array_equal(out.amp, band.amp)


class TestExtractMif:
    def test_constant_tracks(self):
        bands = make_bands([np.full(8000, 450.0), np.full(8000, 1250.0)])
        mat = extract_mif(bands, FrameConfig())
        assert mat.kind == "mif"
        np.testing.assert_allclose(mat.data[:, 0], 450.0)
        np.testing.assert_allclose(mat.data[:, 1], 1250.0)

    def test_frame_count_one_second(self):
        bands = make_bands([np.zeros(16000)])
        mat = extract_mif(bands, FrameConfig(win=0.025, hop=0.010))
        # (16000 - 400) / 160 + 1
        assert mat.num_frames == 98

    def test_ramp_mean_is_value_at_frame_center(self):
        slope, intercept = 0.25, 100.0
        n = 4000
        bands = make_bands([slope * np.arange(n) + intercept])
        cfg = FrameConfig(win=0.025, hop=0.010)
        mat = extract_mif(bands, cfg)
        win = int(cfg.win * RATE)
        hop = int(cfg.hop * RATE)
        # mean of an arithmetic sequence = value at the window's center index
        centers = np.arange(mat.num_frames) * hop + (win - 1) / 2
        np.testing.assert_allclose(mat.data[:, 0], slope * centers + intercept,
                                   rtol=1e-12)

    def test_frame_times(self):
        bands = make_bands([np.zeros(16000)])
        mat = extract_mif(bands, FrameConfig())
        np.testing.assert_allclose(mat.frame_times[:3], [0.0, 0.010, 0.020])

    def test_short_utterance_rejected(self):
        with pytest.raises(ValueError):
            extract_mif(make_bands([np.zeros(100)]), FrameConfig())

    def test_band_length_mismatch_rejected(self):
        bands = make_bands([np.zeros(8000), np.zeros(4000)])
        with pytest.raises(ValueError):
            extract_mif(bands, FrameConfig())

    def test_order_invariance(self):
        rng = np.random.default_rng(2)
        tracks = [rng.uniform(200, 3000, 4000) for _ in range(4)]
        cfg = FrameConfig()
        forward = extract_mif(make_bands(tracks), cfg)
        perm = [2, 0, 3, 1]
        permuted = extract_mif(
            [make_band(tracks[p], k) for k, p in enumerate(perm)], cfg)
        np.testing.assert_array_equal(permuted.data[:, np.argsort(perm)],
                                      forward.data)

    def test_standardize_then_mif_zero_mean_when_frames_tile(self):
        rng = np.random.default_rng(3)
        bands = standardize_bands(make_bands([rng.uniform(0, 1, 4000)]))
        mat = extract_mif(bands, FrameConfig(win=0.025, hop=0.025))
        assert abs(np.mean(mat.data)) < 1e-9


class TestExtractCif:
    def test_constant_frame_energy_in_dc_coefficient(self):
        bands = make_bands([np.full(4000, 3.0)])
        cfg = FrameConfig()
        mat = extract_cif(bands, cfg, num_dct=10)
        win = int(cfg.win * RATE)
        np.testing.assert_allclose(mat.data[:, 0], 3.0 * np.sqrt(win), rtol=1e-12)
        np.testing.assert_allclose(mat.data[:, 1:10], 0.0, atol=1e-9)

    def test_shapes_band_major(self):
        bands = make_bands([np.zeros(4000)] * 6)
        mat = extract_cif(bands, FrameConfig(), num_dct=10)
        assert mat.dim == 60
        assert mat.column_names[10].startswith("cif_b01_c00")

    def test_full_order_round_trip(self):
        rng = np.random.default_rng(4)
        track = rng.uniform(100, 3000, 2000)
        cfg = FrameConfig()
        win = int(cfg.win * RATE)
        mat = extract_cif(make_bands([track]), cfg, num_dct=win)
        frame0 = track[:win]
        recon = cif_reconstruct_frame(mat.data[0], win)
        assert np.max(np.abs(recon - frame0)) < 1e-9

    def test_cosine_pattern_hits_single_bin(self):
        cfg = FrameConfig()
        win = int(cfg.win * RATE)
        n = np.arange(win)
        frame = np.cos(np.pi * 3 * (2 * n + 1) / (2 * win))  # DCT-II basis bin 3
        track = np.tile(frame, 10)
        mat = extract_cif(make_bands([track]), cfg, num_dct=10)
        coef = mat.data[0]
        assert abs(coef[3]) > 1.0
        others = np.delete(coef, 3)
        assert np.max(np.abs(others)) < 1e-9

    def test_reconstruction_error_monotone_in_order(self):
        rng = np.random.default_rng(5)
        cfg = FrameConfig()
        win = int(cfg.win * RATE)
        frame = rng.uniform(-1, 1, win)
        full = dct(frame, type=2, norm="ortho")
        errors = []
        for order in (2, 5, 10, 50, 200, win):
            recon = cif_reconstruct_frame(full[:order], win)
            errors.append(np.linalg.norm(recon - frame))
        assert all(a >= b - 1e-12 for a, b in zip(errors, errors[1:]))
        assert errors[-1] < 1e-9

    def test_num_dct_exceeding_window_rejected(self):
        with pytest.raises(ValueError):
            extract_cif(make_bands([np.zeros(4000)]), FrameConfig(), num_dct=401)


class TestSplice:
    def test_context_zero_is_identity(self):
        mat = extract_mif(make_bands([np.arange(4000.0)]), FrameConfig())
        assert splice(mat, 0) is mat

    def test_single_frame_replicates(self):
        mat = FeatureMatrix(data=np.array([[1.0, 2.0]]), frame_times=np.zeros(1),
                            kind="mif", column_names=("a", "b"))
        out = splice(mat, 2)
        assert out.data.shape == (1, 10)
        np.testing.assert_array_equal(out.data[0], np.tile([1.0, 2.0], 5))

    def test_context_four_on_12d(self):
        mat = FeatureMatrix(data=np.zeros((7, 12)), frame_times=np.zeros(7),
                            kind="mif", column_names=tuple(f"c{i}" for i in range(12)))
        out = splice(mat, 4)
        assert out.dim == 108
        assert out.kind == "spliced"

    def test_middle_rows_concatenate_neighbors(self):
        data = np.arange(12.0).reshape(6, 2)
        mat = FeatureMatrix(data=data, frame_times=np.zeros(6), kind="mif",
                            column_names=("x", "y"))
        out = splice(mat, 1)
        np.testing.assert_array_equal(out.data[3], np.concatenate(
            [data[2], data[3], data[4]]))

    @given(st.integers(0, 5), st.integers(1, 9), st.integers(1, 6))
    @settings(max_examples=30)
    def test_shape_contract(self, context, rows, dims):
        mat = FeatureMatrix(data=np.zeros((rows, dims)),
                            frame_times=np.zeros(rows), kind="mif",
                            column_names=tuple(f"c{i}" for i in range(dims)))
        out = splice(mat, context)
        assert out.data.shape == (rows, (2 * context + 1) * dims)


class TestCmvn:
    def test_columns_normalized(self):
        rng = np.random.default_rng(6)
        mat = FeatureMatrix(data=rng.uniform(5, 9, (200, 3)),
                            frame_times=np.zeros(200), kind="mif",
                            column_names=("a", "b", "c"))
        out = cmvn(mat)
        np.testing.assert_allclose(out.data.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.data.std(axis=0), 1.0, rtol=1e-9)


class TestSerialization:
    def _matrix(self):
        rng = np.random.default_rng(7)
        return FeatureMatrix(data=rng.standard_normal((13, 5)),
                             frame_times=np.arange(13) * 0.01, kind="mif",
                             column_names=tuple(f"c{i}" for i in range(5)))

    def test_mmdf_round_trip(self, tmp_path):
        mat = self._matrix()
        path = tmp_path / "f.mmdf"
        save_mmdf(mat, path)
        loaded = load_mmdf(path)
        assert loaded.shape == (13, 5)
        np.testing.assert_allclose(loaded, mat.data.astype(np.float32))

    def test_mmdf_header_layout(self, tmp_path):
        path = tmp_path / "f.mmdf"
        save_mmdf(self._matrix(), path)
        blob = path.read_bytes()
        assert blob[:4] == b"MMDF"
        import struct
        version, rows, cols = struct.unpack("<HII", blob[4:14])
        assert (version, rows, cols) == (1, 13, 5)
        assert len(blob) == 14 + 13 * 5 * 4

    def test_mmdf_rejects_corrupt(self, tmp_path):
        path = tmp_path / "bad.mmdf"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(ValueError):
            load_mmdf(path)

    def test_csv_layout(self, tmp_path):
        mat = self._matrix()
        path = tmp_path / "f.csv"
        save_feature_csv(mat, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(mat.column_names)
        assert len(lines) == 14
        row0 = np.array([float(v) for v in lines[1].split(",")])
        np.testing.assert_array_equal(row0, mat.data[0])

    def test_sidecar_round_trip_as_config(self, tmp_path):
        path = tmp_path / "run.sidecar"
        write_sidecar({"num_filters": 12, "overlap": 0.7}, path)
        text = path.read_text()
        assert "num_filters=12" in text
        assert "overlap=0.7" in text


class TestFeatureMatrixValidation:
    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            FeatureMatrix(data=np.zeros((3, 2)), frame_times=np.zeros(3),
                          kind="mif", column_names=("only_one",))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            FeatureMatrix(data=np.array([[np.inf]]), frame_times=np.zeros(1),
                          kind="mif", column_names=("a",))
