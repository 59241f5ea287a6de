"""WAV decoding/encoding, resampling and chunk-invariant framing."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np
from scipy.signal import resample_poly

DEFAULT_SAMPLE_RATE = 22050

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class AudioError(ValueError):
    """Base class for audio input problems."""


class MalformedContainer(AudioError):
    pass


class UnsupportedEncoding(AudioError):
    pass


@dataclass(frozen=True)
class AudioBuffer:
    """Mono PCM samples in [-1, 1] at a known sample rate.

    Input that exceeds full scale is peak-normalized, never clipped.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError(f"expected mono samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise AudioError("samples contain NaN or inf")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise AudioError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        peak = np.max(np.abs(samples)) if samples.size else 0.0
        if peak > 1.0:
            # scale down rather than clip so over-range input keeps its shape
            samples = samples / peak
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def scaled(self, gain: float) -> "AudioBuffer":
        return AudioBuffer(self.samples * gain, self.sample_rate)


def _parse_chunks(data: bytes) -> dict[bytes, bytes]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedContainer("missing RIFF/WAVE header")
    chunks: dict[bytes, bytes] = {}
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise MalformedContainer(f"chunk {cid!r} truncated ({len(body)} of {size} bytes)")
        chunks.setdefault(cid, body)
        pos += 8 + size + (size & 1)
    for required in (b"fmt ", b"data"):
        if required not in chunks:
            raise MalformedContainer(f"missing {required.decode().strip()!r} chunk")
    return chunks


def decode_wav(data: bytes) -> AudioBuffer:
    """Decode a RIFF/WAVE byte string into a mono :class:`AudioBuffer`.

    Integer PCM (8/16/24/32 bit) and 32-bit float payloads with one or two
    channels are accepted. Stereo is averaged per sample.
    """
    chunks = _parse_chunks(bytes(data))
    fmt = chunks[b"fmt "]
    if len(fmt) < 16:
        raise MalformedContainer("fmt chunk too short")
    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == _WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 40:
            raise MalformedContainer("extensible fmt chunk too short")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if tag not in (_WAVE_FORMAT_PCM, _WAVE_FORMAT_IEEE_FLOAT):
        raise UnsupportedEncoding(f"format tag 0x{tag:04x} is not PCM")
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{channels} channels (only mono/stereo supported)")
    if rate == 0:
        raise MalformedContainer("sample rate is zero")
    if tag == _WAVE_FORMAT_IEEE_FLOAT and bits != 32:
        raise UnsupportedEncoding(f"{bits}-bit float")
    if tag == _WAVE_FORMAT_PCM and bits not in (8, 16, 24, 32):
        raise UnsupportedEncoding(f"{bits}-bit integer PCM")

    width = bits // 8
    if block_align != width * channels:
        raise MalformedContainer(f"block_align {block_align} inconsistent with {channels}x{bits} bit")
    raw = chunks[b"data"]
    n_frames = len(raw) // block_align
    raw = raw[: n_frames * block_align]

    if tag == _WAVE_FORMAT_IEEE_FLOAT:
        x = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        if not np.all(np.isfinite(x)):
            raise MalformedContainer("float payload contains NaN or inf")
    elif bits == 8:
        x = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif bits == 16:
        x = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        x = v.astype(np.float64) / float(1 << 23)
    else:
        x = np.frombuffer(raw, dtype="<i4").astype(np.float64) / float(1 << 31)

    x = x.reshape(n_frames, channels).mean(axis=1)
    return AudioBuffer(x, rate)


def encode_wav(buf: AudioBuffer, bits: int = 16, float_format: bool = False) -> bytes:
    """Serialize a mono buffer as a RIFF/WAVE byte string."""
    x = np.asarray(buf.samples, dtype=np.float64)
    if float_format:
        if bits != 32:
            raise UnsupportedEncoding(f"{bits}-bit float")
        payload = x.astype("<f4").tobytes()
        tag = _WAVE_FORMAT_IEEE_FLOAT
    else:
        if bits not in (8, 16, 24, 32):
            raise UnsupportedEncoding(f"{bits}-bit integer PCM")
        full = float(1 << (bits - 1))
        q = np.clip(np.round(x * full), -full, full - 1).astype(np.int64)
        if bits == 8:
            payload = (q + 128).astype(np.uint8).tobytes()
        elif bits == 16:
            payload = q.astype("<i2").tobytes()
        elif bits == 24:
            u = q & 0xFFFFFF
            payload = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1).astype(np.uint8).tobytes()
        else:
            payload = q.astype("<i4").tobytes()
        tag = _WAVE_FORMAT_PCM
    width = bits // 8
    out = io.BytesIO()
    fmt = struct.pack("<HHIIHH", tag, 1, buf.sample_rate, buf.sample_rate * width, width, bits)
    body_size = 4 + (8 + len(fmt)) + (8 + len(payload)) + (len(payload) & 1)
    out.write(struct.pack("<4sI4s", b"RIFF", body_size, b"WAVE"))
    out.write(struct.pack("<4sI", b"fmt ", len(fmt)) + fmt)
    out.write(struct.pack("<4sI", b"data", len(payload)) + payload)
    if len(payload) & 1:
        out.write(b"\x00")
    return out.getvalue()


def read_wav(path) -> AudioBuffer:
    with open(path, "rb") as fh:
        return decode_wav(fh.read())


def decode_s16le(data: bytes, sample_rate: int) -> AudioBuffer:
    """Raw signed 16-bit little-endian mono PCM (the stdin stream format)."""
    if len(data) % 2:
        raise MalformedContainer("odd byte count in s16le stream")
    return AudioBuffer(np.frombuffer(data, dtype="<i2") / 32768.0, sample_rate)


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited polyphase resampling to ``target_rate``."""
    if target_rate <= 0 or int(target_rate) != target_rate:
        raise AudioError(f"target_rate must be a positive integer, got {target_rate}")
    target_rate = int(target_rate)
    if target_rate == buf.sample_rate:
        return AudioBuffer(buf.samples.copy(), buf.sample_rate)
    ratio = Fraction(target_rate, buf.sample_rate)
    y = resample_poly(buf.samples, ratio.numerator, ratio.denominator)
    return AudioBuffer(y, target_rate)


class FrameStream:
    """Stateful framer: push chunks, get back every complete frame.

    Output does not depend on how the input is chunked. The trailing
    partial frame is never emitted.
    """

    def __init__(self, frame_len: int, hop: int):
        if not (frame_len >= hop >= 1):
            raise ValueError(f"need frame_len >= hop >= 1, got frame_len={frame_len}, hop={hop}")
        self.frame_len = int(frame_len)
        self.hop = int(hop)
        self._buf = np.zeros(0)
        # absolute index of _buf[0] and of the next frame start
        self._offset = 0
        self._next = 0
        self.frames_emitted = 0

    def push(self, chunk) -> list[np.ndarray]:
        chunk = np.asarray(chunk, dtype=np.float64).ravel()
        self._buf = np.concatenate([self._buf, chunk]) if len(self._buf) else chunk.copy()
        frames = []
        end = self._offset + len(self._buf)
        while self._next + self.frame_len <= end:
            start = self._next - self._offset
            frames.append(self._buf[start : start + self.frame_len].copy())
            self._next += self.hop
            self.frames_emitted += 1
        # keep only what a future frame can still use
        drop = min(self._next - self._offset, len(self._buf))
        if drop > 0:
            self._buf = self._buf[drop:]
            self._offset += drop
        return frames

    @property
    def buffered(self) -> int:
        """Samples currently held for frames not yet complete."""
        return len(self._buf)

    def frame_start(self, index: int) -> int:
        """Sample index at which frame ``index`` begins."""
        return index * self.hop


def frame_stream(source: Iterable, frame_len: int, hop: int) -> Iterator[np.ndarray]:
    framer = FrameStream(frame_len, hop)
    for chunk in source:
        yield from framer.push(chunk)
