"""Symbolic encoders over the Log-Mel matrix and the string transforms on {a, b, -}.

Strings are plain ``str`` objects; the alphabet is ``HI``, ``LO`` and ``GAP``.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .mel import LogMelSpectrogram

HI, LO, GAP = "a", "b", "-"
ALPHABET = frozenset((HI, LO, GAP))
NO_TONE = -1

_CYCLES = re.compile(r"(?:a+b+)+")


class EmptyBand(ValueError):
    pass


class TooFewRuns(ValueError):
    pass


class OverlappingTones(ValueError):
    pass


class OverlappingTonesWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BandSlice:
    values: np.ndarray  # [k, n_frames] dB
    band_centers: np.ndarray
    frame_duration: float


@dataclass(frozen=True)
class DominantVector:
    """Per-frame dominant band index into ``band_centers`` or ``NO_TONE``."""

    bands: np.ndarray
    band_centers: np.ndarray

    def __len__(self) -> int:
        return len(self.bands)

    @property
    def tones(self) -> list[float | None]:
        return [None if b == NO_TONE else float(self.band_centers[b]) for b in self.bands]

    def __str__(self) -> str:
        return " ".join("-" if t is None else f"{t:.1f}" for t in self.tones)


class CycleMatch(NamedTuple):
    start: int
    stop: int
    cycles: int


def check_symbols(s: str) -> str:
    bad = set(s) - ALPHABET
    if bad:
        raise ValueError(f"symbols outside {{a, b, -}}: {sorted(bad)}")
    return s


def band_filter(spec: LogMelSpectrogram, f_lo: float, f_hi: float) -> BandSlice:
    """Keep the rows whose band center lies in ``[f_lo, f_hi]``."""
    if not f_lo < f_hi:
        raise ValueError(f"need f_lo < f_hi, got {f_lo}, {f_hi}")
    keep = (spec.band_centers >= f_lo) & (spec.band_centers <= f_hi)
    if not keep.any():
        raise EmptyBand(f"no mel band center falls inside [{f_lo}, {f_hi}] Hz")
    return BandSlice(spec.values[keep], spec.band_centers[keep], spec.frame_duration)


def binarize(slice_: BandSlice, db_min: float) -> np.ndarray:
    """1 where a cell is within ``db_min`` of the clip maximum."""
    if db_min <= 0:
        raise ValueError("db_min must be positive")
    return (slice_.values > -db_min).astype(np.uint8)


def dominant_vector(slice_: BandSlice, db_min: float) -> DominantVector:
    active = binarize(slice_, db_min).astype(bool)
    masked = np.where(active, slice_.values, -np.inf)
    # argmax returns the first maximum, i.e. the lowest band on ties
    bands = np.argmax(masked, axis=0)
    bands = np.where(active.any(axis=0), bands, NO_TONE)
    return DominantVector(bands.astype(np.int64), slice_.band_centers)


def histogram(v: DominantVector) -> dict[float, int]:
    """Frame count per dominant tone (Hz), ascending by frequency."""
    idx, counts = np.unique(v.bands[v.bands != NO_TONE], return_counts=True)
    return {float(v.band_centers[i]): int(n) for i, n in zip(idx, counts)}


def encode_ab(v: DominantVector, hi: float, lo: float, tol: float, strict: bool = False) -> str:
    """Map each frame to ``a`` (near ``hi``), ``b`` (near ``lo``) or ``-``."""
    if not hi > lo:
        raise ValueError(f"need hi > lo, got hi={hi}, lo={lo}")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if hi - lo <= 2 * tol:
        msg = f"tone windows overlap: hi-lo={hi - lo:g} Hz <= 2*tol={2 * tol:g} Hz"
        if strict:
            raise OverlappingTones(msg)
        warnings.warn(msg + "; nearest tone wins", OverlappingTonesWarning, stacklevel=2)
    has = v.bands != NO_TONE
    f = np.where(has, v.band_centers[np.where(has, v.bands, 0)], np.nan)
    d_hi = np.abs(f - hi)
    d_lo = np.abs(f - lo)
    is_a = has & (d_hi <= tol) & ~((d_lo <= tol) & (d_lo < d_hi))
    is_b = has & (d_lo <= tol) & ~is_a
    out = np.full(len(f), GAP)
    out[is_a] = HI
    out[is_b] = LO
    return "".join(out)


def repair(s: str, max_gap: int = 2) -> str:
    """Fill runs of up to ``max_gap`` dashes that sit between two equal tones.

    ``a--a`` becomes ``aaaa``; ``a-b`` and dashes at either edge are kept.
    """
    if max_gap < 1:
        return s
    # flanking lookarounds make every matched dash run maximal
    pattern = re.compile(r"(?<=([ab]))-{1,%d}(?=\1)" % max_gap)
    return pattern.sub(lambda m: m.group(1) * len(m.group(0)), s)


def _cycle_pattern(transition_gap: int) -> re.Pattern:
    if transition_gap == 0:
        return _CYCLES
    g = "-{0,%d}" % transition_gap
    return re.compile(rf"a+{g}b+(?:{g}a+{g}b+)*")


def match_periodicity(s: str, min_cycles: int = 2, transition_gap: int = 0) -> CycleMatch | None:
    """Longest ``(a+b+)+`` stretch with at least ``min_cycles`` repetitions.

    Dashes inside a stretch break it, except that up to ``transition_gap``
    dashes are allowed exactly where the tone changes (``a-b``, ``b-a``).
    Returns ``None`` when nothing matches.
    """
    if min_cycles < 1:
        raise ValueError("min_cycles must be >= 1")
    if transition_gap < 0:
        raise ValueError("transition_gap must be >= 0")
    best = None
    for m in _cycle_pattern(transition_gap).finditer(s):
        n = len(re.findall(r"a+", m.group(0)))
        if n >= min_cycles and (best is None or m.end() - m.start() > best.stop - best.start):
            best = CycleMatch(m.start(), m.end(), n)
    return best


def run_length(s: str) -> list[tuple[str, int]]:
    return [(m.group(0)[0], len(m.group(0))) for m in re.finditer(r"a+|b+|-+", s)]


def format_runs(runs: list[tuple[str, int]]) -> str:
    return "".join(f"{sym}{n}" for sym, n in runs)


def expand(runs: list[tuple[str, int]]) -> str:
    return "".join(sym * n for sym, n in runs)


def trim_outliers(lengths) -> list[int]:
    """Drop the value farthest from the median until two remain.

    On ties the later element goes first.
    """
    values = list(lengths)
    if len(values) < 2:
        raise TooFewRuns(f"need at least 2 runs to judge regularity, got {len(values)}")
    while len(values) > 2:
        med = float(np.median(values))
        dist = [abs(v - med) for v in values]
        worst = max(range(len(values)), key=lambda i: (dist[i], i))
        del values[worst]
    return values


def regularity_ok(lengths) -> bool:
    x = np.asarray(lengths, dtype=np.float64)
    if len(x) < 2:
        raise TooFewRuns(f"need at least 2 runs, got {len(x)}")
    return bool(x.mean() > x.var())
