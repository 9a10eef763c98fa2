"""Multichannel multiband AM-FM demodulation of speech resonances.

Bandpass speech components are tracked with Gabor-filtered Teager-Kaiser
energies; across a microphone array, the ordered channel pair with minimum
average cross energy drives the per-band energy separation, yielding
noise-robust instantaneous frequency tracks and the MIF/CIF frame features
derived from them.
"""

from .audio_io import AudioBuffer, MultichannelAudio, load_wav, save_wav, stack_channels
from .demod import (BandDemodulation, MediumFrameConfig, PairSelection,
                    esa_single, mmd_demodulate, repair_and_smooth, select_pairs)
from .energy_ops import (EnergyTrack, cross_teager, gabor_cross_teager,
                         gabor_cross_teager_deriv, teager)
from .eval_harness import (AmFmSpec, EvalResult, Resonance, ScenarioConfig,
                           add_noise_at_snr, apply_rir, calibration_tone,
                           freq_rms_error, fricative_like, run_scenario,
                           synthesize_amfm, trend_bank, vowel_like)
from .features import (FeatureMatrix, FrameConfig, cmvn, extract_cif,
                       extract_mif, load_mmdf, save_feature_csv, save_mmdf,
                       splice, standardize_bands)
from .filterbank import (Filterbank, FilterbankConfig, GaborFilter, bandpass,
                         design_filterbank, mel, mel_inv)

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "MultichannelAudio", "load_wav", "save_wav", "stack_channels",
    "Filterbank", "FilterbankConfig", "GaborFilter", "bandpass",
    "design_filterbank", "mel", "mel_inv",
    "EnergyTrack", "teager", "cross_teager", "gabor_cross_teager",
    "gabor_cross_teager_deriv",
    "BandDemodulation", "MediumFrameConfig", "PairSelection", "esa_single",
    "mmd_demodulate", "repair_and_smooth", "select_pairs",
    "FeatureMatrix", "FrameConfig", "standardize_bands", "extract_mif",
    "extract_cif", "splice", "cmvn", "save_feature_csv", "save_mmdf", "load_mmdf",
    "AmFmSpec", "Resonance", "ScenarioConfig", "EvalResult", "synthesize_amfm",
    "add_noise_at_snr", "apply_rir", "freq_rms_error", "run_scenario",
    "vowel_like", "fricative_like", "calibration_tone", "trend_bank",
]
