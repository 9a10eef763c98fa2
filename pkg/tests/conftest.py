import numpy as np
import pytest

from mmdemod import AudioBuffer, FilterbankConfig, design_filterbank

RATE = 16000


@pytest.fixture(scope="session")
def bank12():
    """Default 12-band analysis profile (70% overlap)."""
    return design_filterbank(FilterbankConfig(
        num_filters=12, f_min=200.0, f_max=0.45 * RATE, overlap=0.70,
        sample_rate=RATE))


@pytest.fixture(scope="session")
def bank6():
    """Default 6-band analysis profile (50% overlap)."""
    return design_filterbank(FilterbankConfig(
        num_filters=6, f_min=200.0, f_max=0.45 * RATE, overlap=0.50,
        sample_rate=RATE))


def tone(freq_hz: float, duration: float = 1.0, amplitude: float = 0.5,
         phase: float = 0.0, rate: int = RATE) -> AudioBuffer:
    t = np.arange(int(duration * rate)) / rate
    return AudioBuffer(amplitude * np.cos(2 * np.pi * freq_hz * t + phase), rate)


def dtft_at(kernel: np.ndarray, omega: float) -> complex:
    """Direct DTFT of a zero-centered odd-length kernel at one frequency."""
    half = (len(kernel) - 1) // 2
    lags = np.arange(-half, half + 1)
    return complex(np.sum(kernel * np.exp(-1j * omega * lags)))
