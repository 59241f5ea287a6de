"""Log-Mel spectrogram: Hann-windowed STFT, HTK-style mel filterbank, dB."""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio import DEFAULT_SAMPLE_RATE, AudioBuffer

POWER_FLOOR = 1e-10


class ClipTooShort(ValueError):
    pass


class DegenerateBank(ValueError):
    pass


@dataclass(frozen=True)
class MelParams:
    n_fft: int = 1024
    hop: int = 320
    n_mels: int = 64
    f_min: float = 20.0
    f_max: float = 2560.0
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        if not (self.n_fft >= self.hop >= 1):
            raise ValueError(f"need n_fft >= hop >= 1 (n_fft={self.n_fft}, hop={self.hop})")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not (0 <= self.f_min < self.f_max <= self.sample_rate / 2):
            raise ValueError(
                f"need 0 <= f_min < f_max <= sample_rate/2 "
                f"(f_min={self.f_min}, f_max={self.f_max}, sample_rate={self.sample_rate})"
            )
        if self.n_mels < 2:
            raise ValueError("n_mels must be at least 2")

    @property
    def frame_duration(self) -> float:
        return self.hop / self.sample_rate

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.n_fft:
            return 0
        return 1 + (n_samples - self.n_fft) // self.hop


@dataclass(frozen=True)
class LogMelSpectrogram:
    values: np.ndarray  # [n_mels, n_frames], max-referenced dB
    band_centers: np.ndarray
    frame_duration: float
    params: MelParams

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def to_csv(self) -> str:
        """Rows are bands from low to high frequency, dB with 3 decimals."""
        out = io.StringIO()
        for row in self.values:
            out.write(",".join(f"{v:.3f}" for v in row))
            out.write("\n")
        return out.getvalue()


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window, zero at both ends for n > 1."""
    if n < 1:
        raise ValueError("window length must be >= 1")
    if n == 1:
        return np.ones(1)
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (n - 1)))


def _frames(x: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    n = 1 + (len(x) - n_fft) // hop
    return np.lib.stride_tricks.as_strided(
        x, shape=(n, n_fft), strides=(x.strides[0] * hop, x.strides[0]), writeable=False
    )


def power_stft(buf: AudioBuffer, params: MelParams) -> np.ndarray:
    """One-sided power spectrogram, shape ``[n_fft // 2 + 1, n_frames]``.

    Frame ``t`` starts at sample ``t * hop``; no centering or padding.
    """
    if buf.sample_rate != params.sample_rate:
        raise ValueError(f"buffer rate {buf.sample_rate} != params rate {params.sample_rate}")
    if len(buf) < params.n_fft:
        raise ClipTooShort(f"{len(buf)} samples is shorter than one FFT frame ({params.n_fft})")
    x = np.ascontiguousarray(buf.samples, dtype=np.float64)
    frames = _frames(x, params.n_fft, params.hop) * _hann(params.n_fft)
    spec = np.fft.rfft(frames, n=params.n_fft, axis=1)
    return (spec.real**2 + spec.imag**2).T


@lru_cache(maxsize=None)
def _hann(n: int) -> np.ndarray:
    w = hann_window(n)
    w.setflags(write=False)
    return w


def mel_band_edges(params: MelParams) -> np.ndarray:
    """The ``n_mels + 2`` filter corner frequencies in Hz."""
    m = np.linspace(hz_to_mel(params.f_min), hz_to_mel(params.f_max), params.n_mels + 2)
    return mel_to_hz(m)


def band_centers(params: MelParams) -> np.ndarray:
    return mel_band_edges(params)[1:-1]


@lru_cache(maxsize=32)
def _filterbank(params: MelParams) -> np.ndarray:
    edges = mel_band_edges(params)
    freqs = np.arange(params.n_fft // 2 + 1) * params.sample_rate / params.n_fft
    lower = edges[:-2, None]
    center = edges[1:-1, None]
    upper = edges[2:, None]
    rising = (freqs[None, :] - lower) / (center - lower)
    falling = (upper - freqs[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(fb.sum(axis=1) == 0)
    if len(empty):
        raise DegenerateBank(
            f"{len(empty)} of {params.n_mels} mel filters have no FFT bin inside them "
            f"(first: band {empty[0]}); lower n_mels or raise n_fft"
        )
    fb.setflags(write=False)
    return fb


def mel_filterbank(params: MelParams) -> np.ndarray:
    """Triangular filters, ``[n_mels, n_fft // 2 + 1]``, unit peak height.

    Corners are equally spaced on the mel scale between ``f_min`` and
    ``f_max``; filter ``m`` rises from corner ``m`` to corner ``m + 1``
    and falls to corner ``m + 2``.
    """
    return _filterbank(params)


def mel_power(buf: AudioBuffer, params: MelParams) -> np.ndarray:
    return mel_filterbank(params) @ power_stft(buf, params)


def log_mel(buf: AudioBuffer, params: MelParams | None = None) -> LogMelSpectrogram:
    """Log-Mel spectrogram referenced to its own maximum (max is 0 dB)."""
    params = params or MelParams()
    db = 10.0 * np.log10(mel_power(buf, params) + POWER_FLOOR)
    db -= db.max()
    return LogMelSpectrogram(db, band_centers(params), params.frame_duration, params)
