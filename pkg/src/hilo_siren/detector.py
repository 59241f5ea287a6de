"""Hi-Lo siren detection: the histogram elimination loop and its streaming driver."""

from __future__ import annotations

import dataclasses
import enum
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from . import symbolizer as sym
from .audio import AudioBuffer, FrameStream, resample
from .mel import MelParams, log_mel


class ConfigError(ValueError):
    pass


class RejectReason(enum.Enum):
    NONE = "None"
    NO_TONES = "NoTones"
    GAP_FAIL = "GapFail"
    PERIODICITY_FAIL = "PeriodicityFail"
    REGULARITY_FAIL = "RegularityFail"
    LOOP_EXHAUSTED = "LoopExhausted"
    CLIP_TOO_SHORT = "ClipTooShort"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class DetectorConfig:
    f_hi_limit: float = 1500.0
    f_lo_limit: float = 700.0
    db_min: float = 20.0
    min_distinct_tones: int = 2
    min_gap: float = 122.0
    tone_tol: float = 31.0
    max_gap_frames: int = 2
    transition_gap_frames: int = 1
    min_phase_frames: int = 3
    min_cycles: int = 2
    min_duration: float = 2.0
    max_loop_iters: int = 4
    mel: MelParams = field(default_factory=MelParams)

    def __post_init__(self):
        if not self.f_lo_limit < self.f_hi_limit:
            raise ConfigError("f_lo_limit must be below f_hi_limit")
        if self.db_min <= 0:
            raise ConfigError("db_min must be positive")
        if self.max_loop_iters < 1:
            raise ConfigError("max_loop_iters must be >= 1")
        if self.min_cycles < 1:
            raise ConfigError("min_cycles must be >= 1")
        if self.min_distinct_tones < 2:
            raise ConfigError("min_distinct_tones must be >= 2")
        if self.tone_tol < 0 or self.max_gap_frames < 0 or self.transition_gap_frames < 0 or self.min_phase_frames < 0:
            raise ConfigError("tone_tol and the frame counts must be non-negative")
        if self.min_gap <= 2 * self.tone_tol:
            warnings.warn(
                f"min_gap={self.min_gap} <= 2*tone_tol={2 * self.tone_tol}: tone windows may overlap",
                sym.OverlappingTonesWarning,
                stacklevel=3,
            )

    # flat key=value view; MelParams fields appear as ``mel.<name>``
    def to_items(self) -> list[tuple[str, object]]:
        items: list[tuple[str, object]] = []
        for f in dataclasses.fields(self):
            if f.name == "mel":
                items += [(f"mel.{m.name}", getattr(self.mel, m.name)) for m in dataclasses.fields(MelParams)]
            else:
                items.append((f.name, getattr(self, f.name)))
        return items

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.to_items())

    def replace(self, overrides: Mapping[str, object]) -> "DetectorConfig":
        """Copy with ``overrides`` applied; values may be strings."""
        top, mel = {}, {}
        types = {f.name: f.type for f in dataclasses.fields(self)}
        mel_types = {f.name: f.type for f in dataclasses.fields(MelParams)}
        for key, raw in overrides.items():
            key = key.strip()
            if key.startswith("mel."):
                name = key[4:]
                if name not in mel_types:
                    raise ConfigError(f"unknown config key {key!r}")
                mel[name] = _coerce(key, raw, getattr(self.mel, name))
            elif key in types and key != "mel":
                top[key] = _coerce(key, raw, getattr(self, key))
            else:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            if mel:
                top["mel"] = dataclasses.replace(self.mel, **mel)
            return dataclasses.replace(self, **top)
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def from_text(cls, text: str, base: "DetectorConfig | None" = None) -> "DetectorConfig":
        return (base or cls()).replace(parse_key_values(text.splitlines()))

    @classmethod
    def from_file(cls, path, base: "DetectorConfig | None" = None) -> "DetectorConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), base)


def parse_key_values(lines: Iterable[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(key: str, raw, current):
    kind = type(current)
    if not isinstance(raw, str):
        return kind(raw)
    try:
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


@dataclass(frozen=True)
class DetectionResult:
    detected: bool
    hi_tone: float | None = None
    lo_tone: float | None = None
    cycles: int = 0
    iterations_used: int = 0
    reject_reason: RejectReason = RejectReason.NONE
    stage_trace: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.detected


def _fmt_hist(hist: Mapping[float, int]) -> str:
    return " ".join(f"{f:.1f}:{n}" for f, n in hist.items()) or "(empty)"


def _reject(reason: RejectReason, trace: list[str], iterations: int = 0) -> DetectionResult:
    trace.append(f"verdict: false {reason}")
    return DetectionResult(False, iterations_used=iterations, reject_reason=reason, stage_trace=tuple(trace))


def dominant_tones(buf: AudioBuffer, cfg: DetectorConfig | None = None,
                   trace: list[str] | None = None) -> sym.DominantVector:
    """Front end of :func:`detect`: Log-Mel, band filter, per-frame dominant tone.

    The buffer is peak-normalized first so the power floor cannot break
    gain invariance. Raises ``EmptyBand`` when no mel band falls inside
    the siren limits.
    """
    cfg = cfg or DetectorConfig()
    trace = [] if trace is None else trace
    if buf.sample_rate != cfg.mel.sample_rate:
        buf = resample(buf, cfg.mel.sample_rate)
    peak = np.max(np.abs(buf.samples))
    if peak > 0:
        buf = AudioBuffer(buf.samples / peak, buf.sample_rate)
    spec = log_mel(buf, cfg.mel)
    trace.append(f"logmel: {spec.values.shape[0]}x{spec.n_frames}")
    band = sym.band_filter(spec, cfg.f_lo_limit, cfg.f_hi_limit)
    trace.append("band: " + " ".join(f"{c:.1f}" for c in band.band_centers))
    return sym.dominant_vector(band, cfg.db_min)


def detect(buf: AudioBuffer, cfg: DetectorConfig | None = None) -> DetectionResult:
    """Decide whether ``buf`` contains a Hi-Lo siren."""
    cfg = cfg or DetectorConfig()
    trace: list[str] = []
    if buf.sample_rate != cfg.mel.sample_rate:
        buf = resample(buf, cfg.mel.sample_rate)
    if buf.duration < cfg.min_duration or len(buf) < cfg.mel.n_fft:
        trace.append(f"input: {len(buf)} samples ({buf.duration:.3f} s) < min_duration {cfg.min_duration} s")
        return _reject(RejectReason.CLIP_TOO_SHORT, trace)
    try:
        v = dominant_tones(buf, cfg, trace)
    except sym.EmptyBand as e:
        trace.append(f"band: {e}")
        return _reject(RejectReason.NO_TONES, trace)
    return classify_dominant(v, cfg, trace)


def classify_dominant(v: sym.DominantVector, cfg: DetectorConfig | None = None,
                      trace: list[str] | None = None) -> DetectionResult:
    """Histogram, tone selection and the elimination loop on a dominant-tone vector."""
    cfg = cfg or DetectorConfig()
    trace = [] if trace is None else trace
    trace.append(f"dominant: {v}")
    hist = sym.histogram(v)
    trace.append(f"histogram: {_fmt_hist(hist)}")
    if len(hist) < cfg.min_distinct_tones:
        return _reject(RejectReason.NO_TONES, trace)

    work = dict(hist)
    last_fail = RejectReason.NO_TONES
    iterations = 0
    for it in range(1, cfg.max_loop_iters + 1):
        if len(work) < 2:
            return _reject(last_fail, trace, iterations)
        iterations = it
        ranked = sorted(work.items(), key=lambda kv: (-kv[1], kv[0]))
        (f1, _), (f2, _) = ranked[0], ranked[1]
        hi, lo = max(f1, f2), min(f1, f2)
        trace.append(f"iter{it}.tones: hi={hi:.1f} lo={lo:.1f} working={_fmt_hist(work)}")
        if hi - lo < cfg.min_gap:
            trace.append(f"iter{it}.gap: {hi - lo:.1f} < {cfg.min_gap:g}, drop {f1:.1f}")
            del work[f1]
            last_fail = RejectReason.GAP_FAIL
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sym.OverlappingTonesWarning)
            s = sym.encode_ab(v, hi, lo, cfg.tone_tol)
        trace.append(f"iter{it}.encode: {s}")
        s = sym.repair(s, cfg.max_gap_frames)
        trace.append(f"iter{it}.repair: {s}")
        m = sym.match_periodicity(s, cfg.min_cycles, cfg.transition_gap_frames)
        if m is None:
            top = max(work)
            trace.append(f"iter{it}.periodicity: no match, drop {top:.1f}")
            del work[top]
            last_fail = RejectReason.PERIODICITY_FAIL
            continue
        runs = sym.run_length(s[m.start : m.stop])
        trace.append(f"iter{it}.periodicity: span [{m.start},{m.stop}) cycles={m.cycles}")
        trace.append(f"iter{it}.runs: {sym.format_runs(runs)}")
        try:
            a_runs = sym.trim_outliers([n for c, n in runs if c == sym.HI])
            b_runs = sym.trim_outliers([n for c, n in runs if c == sym.LO])
            ok = (
                sym.regularity_ok(a_runs)
                and sym.regularity_ok(b_runs)
                and min(a_runs + b_runs) >= cfg.min_phase_frames
            )
        except sym.TooFewRuns:
            # a single cycle (min_cycles=1) cannot show regularity
            a_runs = b_runs = []
            ok = False
        trace.append(f"iter{it}.regularity: a={a_runs} b={b_runs} ok={ok}")
        if ok:
            trace.append("verdict: true")
            return DetectionResult(True, hi, lo, m.cycles, it, RejectReason.NONE, tuple(trace))
        top = max(work)
        del work[top]
        last_fail = RejectReason.REGULARITY_FAIL
    if len(work) < 2:
        return _reject(last_fail, trace, iterations)
    return _reject(RejectReason.LOOP_EXHAUSTED, trace, iterations)


@dataclass(frozen=True)
class StreamEvent:
    timestamp: float  # seconds from stream start to the end of the detecting window
    result: DetectionResult

    def to_line(self) -> str:
        r = self.result
        return f"{self.timestamp:.3f}\tHI-LO\t{r.hi_tone:.1f}\t{r.lo_tone:.1f}\t{r.cycles}"


class SirenStream:
    """Edge-triggered sliding-window detector over a chunked sample stream.

    Every ``stride`` seconds the last ``window`` seconds are run through
    :func:`detect`; an event is emitted on each false-to-true transition.
    Memory is bounded by one window plus the pending chunk.
    """

    def __init__(self, cfg: DetectorConfig | None = None, sample_rate: int | None = None,
                 window: float = 4.0, stride: float = 1.0):
        self.cfg = cfg or DetectorConfig()
        self.sample_rate = int(sample_rate or self.cfg.mel.sample_rate)
        if window < self.cfg.min_duration:
            raise ConfigError(f"window {window} s is shorter than min_duration {self.cfg.min_duration} s")
        if not 0 < stride <= window:
            raise ConfigError("need 0 < stride <= window")
        self.window_len = int(round(window * self.sample_rate))
        self.stride_len = int(round(stride * self.sample_rate))
        self._framer = FrameStream(self.window_len, self.stride_len)
        self._active = False

    @property
    def buffered(self) -> int:
        return self._framer.buffered

    def push(self, chunk) -> list[StreamEvent]:
        events = []
        for window in self._framer.push(chunk):
            idx = self._framer.frames_emitted - 1
            end = self._framer.frame_start(idx) + self.window_len
            result = detect(AudioBuffer(window, self.sample_rate), self.cfg)
            if result.detected and not self._active:
                events.append(StreamEvent(end / self.sample_rate, result))
            self._active = result.detected
        return events


def detect_stream(chunks: Iterable, cfg: DetectorConfig | None = None, sample_rate: int | None = None,
                  window: float = 4.0, stride: float = 1.0) -> Iterator[StreamEvent]:
    stream = SirenStream(cfg, sample_rate, window, stride)
    for chunk in chunks:
        yield from stream.push(chunk)
