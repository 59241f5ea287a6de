"""Parametric test signals: Hi-Lo sirens, tones, white noise, linear sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import DEFAULT_SAMPLE_RATE, AudioBuffer

AMPLITUDE = 0.8


class NyquistViolation(ValueError):
    pass


def _check_nyquist(f: float, sample_rate: int) -> None:
    if f >= sample_rate / 2:
        raise NyquistViolation(f"{f} Hz is not below Nyquist ({sample_rate / 2} Hz)")


@dataclass(frozen=True)
class SirenSpec:
    f_hi: float = 1250.0
    f_lo: float = 970.0
    dwell: float = 0.5
    cycles: int = 2
    amplitude: float = AMPLITUDE
    noise_snr_db: float | None = None
    # one (position_s, length_s) pair or a tuple of them
    dropout: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.f_hi > self.f_lo > 0:
            raise ValueError(f"need f_hi > f_lo > 0, got {self.f_hi}, {self.f_lo}")
        if self.dwell <= 0:
            raise ValueError("dwell must be positive")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if not 0 <= self.amplitude <= 1:
            raise ValueError("amplitude must be in [0, 1]")

    @property
    def duration(self) -> float:
        return 2 * self.dwell * self.cycles

    def dropouts(self) -> list[tuple[float, float]]:
        if self.dropout is None:
            return []
        if len(self.dropout) == 2 and np.isscalar(self.dropout[0]):
            return [tuple(self.dropout)]
        return [tuple(d) for d in self.dropout]


def _phase_continuous(freqs: np.ndarray, sample_rate: int) -> np.ndarray:
    """Sine whose instantaneous frequency per sample is ``freqs``."""
    phase = 2 * np.pi * np.cumsum(freqs) / sample_rate
    return np.sin(np.concatenate([[0.0], phase[:-1]]))


def _white(n: int, rms: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    # uniform on [-r, r] has rms r / sqrt(3)
    return rng.uniform(-1.0, 1.0, n) * rms * np.sqrt(3.0)


def gen_siren(spec: SirenSpec, sample_rate: int = DEFAULT_SAMPLE_RATE) -> AudioBuffer:
    """Alternate ``f_hi`` and ``f_lo`` every ``dwell`` seconds, starting high."""
    _check_nyquist(spec.f_hi, sample_rate)
    n = int(round(spec.duration * sample_rate))
    t = np.arange(n) / sample_rate
    phase_idx = np.floor(t / spec.dwell + 1e-9).astype(np.int64)
    freqs = np.where(phase_idx % 2 == 0, spec.f_hi, spec.f_lo)
    x = spec.amplitude * _phase_continuous(freqs, sample_rate)
    if spec.noise_snr_db is not None and np.isfinite(spec.noise_snr_db):
        rms = np.sqrt(np.mean(x**2)) / 10 ** (spec.noise_snr_db / 20)
        x = x + _white(n, rms, spec.seed)
    for pos, length in spec.dropouts():
        start = int(round(pos * sample_rate))
        x[start : start + int(round(length * sample_rate))] = 0.0
    return AudioBuffer(np.clip(x, -1.0, 1.0), sample_rate)


def gen_tone(f: float, dur: float, sample_rate: int = DEFAULT_SAMPLE_RATE) -> AudioBuffer:
    _check_nyquist(f, sample_rate)
    if dur <= 0:
        raise ValueError("dur must be positive")
    t = np.arange(int(round(dur * sample_rate))) / sample_rate
    return AudioBuffer(AMPLITUDE * np.sin(2 * np.pi * f * t), sample_rate)


def gen_noise(dur: float, sample_rate: int = DEFAULT_SAMPLE_RATE, seed: int = 0) -> AudioBuffer:
    """Seeded uniform white noise with peak amplitude 0.8."""
    if dur <= 0:
        raise ValueError("dur must be positive")
    rng = np.random.default_rng(seed)
    return AudioBuffer(AMPLITUDE * rng.uniform(-1.0, 1.0, int(round(dur * sample_rate))), sample_rate)


def gen_sweep(f_start: float, f_end: float, dur: float, sample_rate: int = DEFAULT_SAMPLE_RATE) -> AudioBuffer:
    """Linear chirp from ``f_start`` to ``f_end``."""
    _check_nyquist(max(f_start, f_end), sample_rate)
    if dur <= 0:
        raise ValueError("dur must be positive")
    n = int(round(dur * sample_rate))
    freqs = np.linspace(f_start, f_end, n)
    return AudioBuffer(AMPLITUDE * _phase_continuous(freqs, sample_rate), sample_rate)
