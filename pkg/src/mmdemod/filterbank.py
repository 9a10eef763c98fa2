"""Mel-spaced Gabor analysis filterbank with analytic derivative kernels.

Each band is a real Gabor filter g(t) = exp(-alpha^2 t^2) cos(wc t) sampled
on the integer grid (t in samples, wc in rad/sample). Its first three
derivatives are derived in closed form and sampled on the same grid, so the
filtered energy operators can differentiate by convolution instead of by
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve

from .audio_io import AudioBuffer

MEL_SCALE = 2595.0
MEL_BREAK_HZ = 700.0

#: kernels are cut where the Gaussian envelope falls to exp(-t^2/(2 sigma^2))
#: with |t| = truncation_sigmas * sigma; the default 4 sigma leaves a tail of
#: exp(-8) ~= 3.4e-4.
DEFAULT_TRUNCATION_SIGMAS = 4.0

#: Bands whose Gaussian response would fold across Nyquist are narrowed so the
#: folded tail contaminates the response at the center frequency by at most
#: exp(-8) (the same error budget as the kernel truncation). Without this the
#: sampled derivative kernels of the top bands alias and the energy-ratio
#: frequency estimates break down.
_ALIAS_BUDGET_SIGMAS = 2.0 * np.sqrt(2.0)

MAX_KERNEL_LEN = (1 << 16) + 1


def mel(f):
    """Hz to mel, HTK convention: 2595 log10(1 + f/700)."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("mel() requires nonnegative frequency")
    return MEL_SCALE * np.log10(1.0 + f / MEL_BREAK_HZ)


def mel_inv(m):
    """Mel to Hz, exact inverse of :func:`mel`."""
    m = np.asarray(m, dtype=np.float64)
    return MEL_BREAK_HZ * (10.0 ** (m / MEL_SCALE) - 1.0)


@dataclass(frozen=True)
class FilterbankConfig:
    """Design parameters for the Gabor filterbank.

    ``overlap`` is the fraction of a filter's equivalent rectangular
    bandwidth B shared with each neighbor: adjacent bands (center +- B/2)
    share ``overlap * B`` of width, so B = spacing / (1 - overlap) with the
    spacing taken from the mel-equidistant center grid.
    """

    num_filters: int
    f_min: float
    f_max: float
    overlap: float
    sample_rate: int
    truncation_sigmas: float = DEFAULT_TRUNCATION_SIGMAS

    def __post_init__(self):
        if self.num_filters < 1:
            raise ValueError("num_filters must be >= 1")
        if not (0.0 < self.f_min < self.f_max <= self.sample_rate / 2):
            raise ValueError(
                f"need 0 < f_min < f_max <= Nyquist, got "
                f"({self.f_min}, {self.f_max}) at rate {self.sample_rate}")
        if not (0.0 <= self.overlap <= 0.95):
            raise ValueError(f"overlap must be in [0, 0.95], got {self.overlap}")
        if self.truncation_sigmas <= 0:
            raise ValueError("truncation_sigmas must be positive")


@dataclass(frozen=True)
class GaborFilter:
    """One analysis band: sampled g and its first three derivatives.

    ``center_freq`` is in rad/sample, ``alpha`` in 1/sample. All four
    kernels share one scale factor chosen so the DTFT magnitude of the
    0th-order kernel is exactly 1 at ``center_freq``.
    """

    center_freq: float
    alpha: float
    kernel: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    band_index: int

    @property
    def half_length(self) -> int:
        return (len(self.kernel) - 1) // 2

    def center_hz(self, sample_rate: float) -> float:
        return self.center_freq * sample_rate / (2.0 * np.pi)


@dataclass(frozen=True)
class Filterbank:
    config: FilterbankConfig
    filters: tuple[GaborFilter, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(self.filters))
        if len(self.filters) != self.config.num_filters:
            raise ValueError("filter count does not match config")

    def __iter__(self):
        return iter(self.filters)

    def __len__(self) -> int:
        return len(self.filters)

    @property
    def centers_hz(self) -> np.ndarray:
        rate = self.config.sample_rate
        return np.array([f.center_hz(rate) for f in self.filters])


def _sample_gabor_kernels(wc: float, alpha: float, half_len: int) -> list[np.ndarray]:
    """Sample g, g', g'', g''' on [-half_len, half_len].

    With z(t) = exp(-alpha^2 t^2 + i wc t) the derivatives satisfy
    z^(j) = p_j(t) z with p_{j+1} = p_j' + (-2 alpha^2 t + i wc) p_j, and
    g^(j) = Re z^(j). Kernels are evaluated on the nonnegative half-grid and
    mirrored with the parity of each order, which makes the symmetries exact.
    """
    n = np.arange(0, half_len + 1, dtype=np.float64)
    z = np.exp(-(alpha * n) ** 2) * np.exp(1j * wc * n)
    step = np.polynomial.Polynomial([1j * wc, -2.0 * alpha * alpha])
    p = np.polynomial.Polynomial([1.0 + 0.0j])
    kernels = []
    for order in range(4):
        half = np.real(p(n) * z)
        parity = 1.0 if order % 2 == 0 else -1.0
        kernels.append(np.concatenate([parity * half[:0:-1], half]))
        p = p.deriv() + step * p
    return kernels


def design_filterbank(config: FilterbankConfig) -> Filterbank:
    """Design ``num_filters`` Gabor bands equidistant on the mel scale.

    Center frequencies are the interior points of a mel-uniform grid over
    [f_min, f_max] (num_filters + 2 points), so a single filter lands on the
    mel midpoint. Each band's rectangular-equivalent bandwidth follows from
    the overlap rule in :class:`FilterbankConfig`; the Gaussian width is then
    alpha = sqrt(2 pi) B / sample_rate per sample, reduced near Nyquist per
    the alias budget.
    """
    rate = float(config.sample_rate)
    grid = mel_inv(np.linspace(mel(config.f_min), mel(config.f_max),
                               config.num_filters + 2))
    filters = []
    for k in range(config.num_filters):
        center_hz = grid[k + 1]
        half_span = 0.5 * (grid[k + 2] - grid[k])
        erb_hz = half_span / (1.0 - config.overlap)
        wc = 2.0 * np.pi * center_hz / rate
        alpha = np.sqrt(2.0 * np.pi) * erb_hz / rate
        alpha = min(alpha, (np.pi - wc) / _ALIAS_BUDGET_SIGMAS)
        if alpha <= 0:
            raise ValueError(f"infeasible design: band {k} has nonpositive width")
        sigma = 1.0 / (alpha * np.sqrt(2.0))
        half_len = int(np.ceil(config.truncation_sigmas * sigma))
        if 2 * half_len + 1 > MAX_KERNEL_LEN:
            raise ValueError(
                f"band {k} kernel length {2 * half_len + 1} exceeds cap "
                f"{MAX_KERNEL_LEN}; raise f_min or reduce overlap")
        g0, g1, g2, g3 = _sample_gabor_kernels(wc, alpha, half_len)
        lags = np.arange(-half_len, half_len + 1, dtype=np.float64)
        peak = np.sum(g0 * np.cos(wc * lags))  # real DTFT of the even kernel
        filters.append(GaborFilter(
            center_freq=wc, alpha=alpha,
            kernel=g0 / peak, d1=g1 / peak, d2=g2 / peak, d3=g3 / peak,
            band_index=k))
    return Filterbank(config=config, filters=tuple(filters))


def bandpass(signal: AudioBuffer, filt: GaborFilter,
             derivative_order: int = 0) -> np.ndarray:
    """Convolve a signal with one band kernel (or a derivative kernel).

    Output has the input's length, zero-padded at the edges, with the kernel
    center at lag zero. ``derivative_order`` 0..3 selects g, g', g'', g'''.
    """
    kernels = (filt.kernel, filt.d1, filt.d2, filt.d3)
    if not 0 <= derivative_order < len(kernels):
        raise ValueError(f"derivative_order must be 0..3, got {derivative_order}")
    return filter_array(signal.samples, filt, derivative_order)


def filter_array(x: np.ndarray, filt: GaborFilter, derivative_order: int = 0) -> np.ndarray:
    kernel = (filt.kernel, filt.d1, filt.d2, filt.d3)[derivative_order]
    return convolve(np.asarray(x, dtype=np.float64), kernel, mode="same")
